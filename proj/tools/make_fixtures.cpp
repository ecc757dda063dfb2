// Regenerates the synthetic input files under data/. Usage: make_fixtures <dir>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "splinegp/data.hpp"
#include "splinegp/studies.hpp"

namespace {

using namespace splinegp;

struct SyntheticState {
  std::string code;
  double scale;        // all-age deaths per week at the start of the series
  double vacc_adults;  // 18-64 coverage reached by mid-June
  double vacc_seniors;
  std::int64_t young_initial;  // cumulative deaths in the youngest band before week 1
};

const std::vector<SyntheticState> kStates{
    {"S1", 420.0, 0.25, 0.78, 3},  {"S2", 300.0, 0.30, 0.80, 0},  {"S3", 520.0, 0.34, 0.83, 12},
    {"S4", 260.0, 0.38, 0.85, 0},  {"S5", 380.0, 0.42, 0.88, 25}, {"S6", 450.0, 0.46, 0.90, 40},
};

const std::vector<std::string> kBands{"0-24", "25-44", "45-54", "55-64", "65-74", "75-84", "85+"};
constexpr int kWeeks = 29;  // 30 cumulative reports from 2021-03-06
const char* kFirstWeek = "2021-03-06";

std::string cell(const data::CumulativeValue& v) {
  return v.kind == data::ReportKind::Censored ? std::string() : std::to_string(v.value);
}

void write_reports(std::ofstream& out, const std::vector<data::CumulativeReport>& reports,
                   const std::string& skip_band = "", int skip_week = -1) {
  for (std::size_t w = 0; w < reports.front().weeks.size(); ++w) {
    for (const auto& r : reports) {
      if (r.band == skip_band && static_cast<int>(w) == skip_week) continue;  // a missing report
      out << r.state << "," << data::format_date(r.weeks[w]) << "," << r.band << "," << cell(r.values[w])
          << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output-dir>\n";
    return 2;
  }
  namespace fs = std::filesystem;
  const fs::path dir(argv[1]);
  fs::create_directories(dir);

  std::ofstream cdc(dir / "cdc_synthetic.csv");
  std::ofstream calib(dir / "calibration_synthetic.csv");
  std::ofstream vacc(dir / "vaccination_synthetic.csv");
  std::ofstream truth(dir / "truth_synthetic.csv");
  cdc << "state,week_start_date,age_band,cum_deaths\n";
  calib << "state,week_start_date,deaths\n";
  vacc << "state,week_start_date,age_class,rate\n";
  truth << "state,age_band,week,week_start_date,expected_deaths,deaths\n";

  const data::Date first = data::parse_date(kFirstWeek);
  std::uint64_t seed = 101;
  for (const auto& st : kStates) {
    // Deaths fall through the spring, then a resurgence from early July whose
    // size and youth grow as adult coverage falls.
    const double gap = 0.5 - st.vacc_adults;
    studies::MortalitySimulation sim;
    sim.bands = kBands;
    sim.weeks = kWeeks;
    sim.seed = seed++;
    sim.centre_start = 0.74;
    sim.centre_end = 0.74 - 0.6 * gap;
    sim.overdispersion = 0.05;
    for (int w = 1; w <= kWeeks; ++w) {
      double l = st.scale * (0.12 + 0.88 * std::exp(-(w - 1) / 5.0));
      if (w > 17) l += st.scale * 1.6 * gap * (1.0 - std::exp(-(w - 17) / 3.0));
      sim.lambda.push_back(l);
    }
    sim.initial_cumulative.assign(kBands.size(), 0);
    sim.initial_cumulative[0] = st.young_initial;
    for (std::size_t b = 1; b < kBands.size(); ++b) {
      sim.initial_cumulative[b] = static_cast<std::int64_t>(st.scale * 40.0 * (0.05 + 0.15 * b));
    }
    const auto s = studies::simulate_mortality(sim, st.code, kFirstWeek);
    write_reports(cdc, s.reports, st.code == "S2" ? "45-54" : "", st.code == "S2" ? 10 : -1);
    for (int w = 0; w < kWeeks; ++w) {
      const auto day = data::format_date(first + std::chrono::days{7 * w});
      calib << st.code << "," << day << "," << s.calibration[static_cast<std::size_t>(w)] << "\n";
      for (std::size_t b = 0; b < kBands.size(); ++b) {
        char expected[32];
        std::snprintf(expected, sizeof expected, "%.6f", s.mu_band(static_cast<Eigen::Index>(b), w));
        truth << st.code << "," << kBands[b] << "," << w + 1 << "," << day << "," << expected << ","
              << s.deaths(static_cast<Eigen::Index>(b), w) << "\n";
      }
    }
    // Coverage ramps from January and reaches its mid-June level, then creeps up.
    const data::Date vacc_start = data::parse_date("2021-01-02");
    for (int k = 0; k < 39; ++k) {
      const auto day = vacc_start + std::chrono::days{7 * k};
      const double t = std::min(1.0, k / 24.0);
      const double late = k > 24 ? 0.002 * (k - 24) : 0.0;
      char a[32], o[32];
      std::snprintf(a, sizeof a, "%.4f", st.vacc_adults * t + late);
      std::snprintf(o, sizeof o, "%.4f", st.vacc_seniors * std::min(1.0, k / 16.0) + late);
      vacc << st.code << "," << data::format_date(day) << ",18-64," << a << "\n";
      vacc << st.code << "," << data::format_date(day) << ",65+," << o << "\n";
    }
  }

  studies::MortalitySimulation smoke;
  smoke.bands = {"0-44", "45-74", "75+"};
  smoke.weeks = 8;
  smoke.peak_total = 150.0;
  smoke.seed = 7;
  const auto sm = studies::simulate_mortality(smoke, "SM", kFirstWeek);
  std::ofstream smoke_cdc(dir / "smoke_cdc.csv");
  smoke_cdc << "state,week_start_date,age_band,cum_deaths\n";
  write_reports(smoke_cdc, sm.reports);
  std::ofstream smoke_calib(dir / "smoke_calibration.csv");
  smoke_calib << "state,week_start_date,deaths\n";
  for (int w = 0; w < smoke.weeks; ++w) {
    smoke_calib << "SM," << data::format_date(first + std::chrono::days{7 * w}) << ","
                << sm.calibration[static_cast<std::size_t>(w)] << "\n";
  }

  const auto points = studies::synthetic_point_data(3000, 0.1, 11);
  std::ofstream bench(dir / "benchmark_points.csv");
  bench << "x,y,value\n";
  for (std::size_t k = 0; k < points.size(); ++k) {
    char line[96];
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f", points.x[k], points.y[k], points.value[k]);
    bench << line << "\n";
  }
  return 0;
}
