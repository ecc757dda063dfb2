#include "splinegp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>
#include <sstream>

#include "splinegp/errors.hpp"

namespace splinegp::data {

namespace {

std::int64_t parse_count(const std::string& text, const std::string& where) {
  std::int64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || v < 0) {
    throw DataError(where + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_real(const std::string& text, const std::string& where) {
  std::istringstream is(text);
  double v = 0.0;
  is >> v;
  if (text.empty() || is.fail() || !is.eof() || !std::isfinite(v)) {
    throw DataError(where + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

// Reads the header and returns each subsequent non-empty row with its line number.
std::vector<std::pair<int, std::vector<std::string>>> read_rows(std::istream& in,
                                                                 const std::string& header) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV; expected header '" + header + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    throw DataError("unexpected CSV header '" + line + "'; expected '" + header + "'");
  }
  const auto width = split_csv_line(header).size();
  std::vector<std::pair<int, std::vector<std::string>>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != width) {
      std::ostringstream msg;
      msg << "line " << lineno << ": expected " << width << " fields, got " << fields.size();
      throw DataError(msg.str());
    }
    rows.emplace_back(lineno, std::move(fields));
  }
  return rows;
}

std::string where(int lineno) { return "line " + std::to_string(lineno); }

Date parse_week(const std::string& text, int lineno) {
  Date d = parse_date(text);
  if (!is_saturday(d)) throw DataError(where(lineno) + ": " + text + " is not a Saturday");
  return d;
}

}  // namespace

Date parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream is(text);
  is >> y >> dash1 >> m >> dash2 >> d;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (text.size() != 10 || is.fail() || !is.eof() || dash1 != '-' || dash2 != '-' || !ymd.ok()) {
    throw DataError("invalid date '" + text + "'; expected YYYY-MM-DD");
  }
  return std::chrono::sys_days{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

bool is_saturday(Date d) { return std::chrono::weekday{d} == std::chrono::Saturday; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CensoredSeries difference_weekly(std::span<const CumulativeValue> values, const std::string& band) {
  const int wc = static_cast<int>(values.size());
  if (wc < 2) throw ValidationError("band '" + band + "': need at least two cumulative reports");
  std::vector<ReportKind> kind(values.size());
  for (int w = 1; w <= wc; ++w) {
    const auto& v = values[w - 1];
    kind[w - 1] = v.kind;
    if (v.kind == ReportKind::Observed && (v.value < 0 || (v.value >= 1 && v.value <= 9))) {
      std::ostringstream msg;
      msg << "band '" << band << "' week " << w << ": observed cumulative " << v.value
          << " lies in the censored range or is negative";
      throw DataError(msg.str());
    }
  }
  if (kind.front() == ReportKind::Missing || kind.back() == ReportKind::Missing) {
    throw DataError("band '" + band + "': the first and last cumulative reports must be present");
  }

  CensoredSeries out;
  out.band = band;
  out.weeks = wc - 1;

  // Missing reports next to censored weeks join the censored block.
  for (bool changed = true; changed;) {
    changed = false;
    for (int w = 1; w <= wc; ++w) {
      if (kind[w - 1] != ReportKind::Missing) continue;
      const bool left = w > 1 && kind[w - 2] == ReportKind::Censored;
      const bool right = w < wc && kind[w] == ReportKind::Censored;
      if (left || right) {
        kind[w - 1] = ReportKind::Censored;
        out.warnings.push_back("band '" + band + "': missing report at week " + std::to_string(w) +
                               " merged into the adjacent censored block");
        changed = true;
      }
    }
  }

  // Monotone feasibility with censored values in [1, 9] and missing ones free.
  std::vector<std::string> offending;
  std::int64_t running_low = 0;
  int running_week = 0;
  for (int w = 1; w <= wc; ++w) {
    std::int64_t low = 0, high = 0;
    switch (kind[w - 1]) {
      case ReportKind::Observed: low = high = values[w - 1].value; break;
      case ReportKind::Censored: low = 1; high = 9; break;
      case ReportKind::Missing: low = 0; high = INT64_MAX; break;
    }
    if (high < running_low) {
      std::ostringstream msg;
      msg << running_week << "->" << w;
      offending.push_back(msg.str());
    } else if (low > running_low) {
      running_low = low;
      running_week = w;
    }
  }
  if (!offending.empty()) {
    std::ostringstream msg;
    msg << "band '" << band << "': cumulative counts decrease between weeks";
    for (const auto& o : offending) msg << " " << o;
    throw DataError(msg.str());
  }

  std::vector<int> censored;
  for (int w = 1; w <= wc; ++w) {
    if (kind[w - 1] == ReportKind::Censored) censored.push_back(w);
  }
  for (std::size_t i = 1; i < censored.size(); ++i) {
    if (censored[i] != censored[i - 1] + 1) {
      throw DataError("band '" + band + "': more than one censored block (weeks " +
                      std::to_string(censored[i - 1]) + " and " + std::to_string(censored[i]) + ")");
    }
  }

  auto observed = [&](int w) { return kind[w - 1] == ReportKind::Observed; };
  for (int w = 1; w < wc; ++w) {
    if (observed(w) && observed(w + 1)) {
      out.retrievable.emplace_back(w, values[w].value - values[w - 1].value);
    }
  }
  std::set<int> missing;
  for (int w = 1; w <= wc; ++w) {
    if (kind[w - 1] != ReportKind::Missing) continue;
    if (w - 1 >= 1) missing.insert(w - 1);
    if (w <= wc - 1) missing.insert(w);
  }
  out.missing_weeks.assign(missing.begin(), missing.end());

  if (!censored.empty()) {
    const int c0 = censored.front();
    const int c1 = censored.back();
    const bool starts_censored = c0 == 1;
    const bool ends_censored = c1 == wc;
    CensoredBlock block;
    if (!starts_censored && !ends_censored) {
      block.bound = likelihoods::CensoredSumBound::exact(values[c1].value - values[c0 - 2].value);
    } else if (starts_censored && !ends_censored) {
      block.bound = likelihoods::CensoredSumBound::interval_with_observed_end(values[c1].value);
    } else if (!starts_censored) {
      block.bound = likelihoods::CensoredSumBound::trailing_censored();
    } else {
      block.bound = likelihoods::CensoredSumBound::all_censored();
    }
    const int first = starts_censored ? 1 : c0 - 1;
    const int last = ends_censored ? wc - 1 : c1;
    for (int w = first; w <= last; ++w) block.weeks.push_back(w);
    out.block = std::move(block);
  }
  return out;
}

CensoredSeries difference_weekly(const CumulativeReport& report) {
  auto out = difference_weekly(report.values, report.band);
  return out;
}

double estimate_eta(std::span<const double> totals) {
  if (totals.size() < 2) throw ValidationError("eta needs at least two weekly totals");
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t w = 1; w < totals.size(); ++w) {
    const double x = std::abs(totals[w] - totals[w - 1]);
    if (x == 0.0) continue;
    sxy += x * totals[w];
    sxx += x * x;
  }
  if (sxx == 0.0) throw ValidationError("eta is undefined: every first-order difference is zero");
  return sxy / sxx;
}

std::vector<double> retrievable_totals(std::span<const CensoredSeries> series, int weeks) {
  std::vector<double> out(static_cast<std::size_t>(weeks), 0.0);
  for (const auto& s : series) {
    if (s.weeks != weeks) throw ValidationError("series '" + s.band + "' has a different week count");
    for (auto [w, d] : s.retrievable) out[static_cast<std::size_t>(w - 1)] += static_cast<double>(d);
  }
  return out;
}

std::optional<int> resurgence_start(std::span<const double> deaths, int search_from) {
  const int n = static_cast<int>(deaths.size());
  if (search_from < 1 || search_from > n) throw ValidationError("search_from outside the series");
  if (n - search_from < 5) throw ValidationError("need at least five weeks after search_from");
  auto moving_average = [&](int w) {
    const int lo = std::max(1, w - 2);
    const int hi = std::min(n, w + 1);
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += deaths[k - 1];
    return s / (hi - lo + 1);
  };
  for (int w = search_from; w < n; ++w) {
    if (moving_average(w + 1) > moving_average(w)) return w;
  }
  return std::nullopt;
}

std::vector<std::int64_t> align_calibration(const std::map<Date, std::int64_t>& totals,
                                            std::span<const Date> model_weeks) {
  std::vector<std::int64_t> out;
  std::vector<std::string> gaps;
  for (Date d : model_weeks) {
    auto it = totals.find(d);
    if (it == totals.end()) {
      gaps.push_back(format_date(d));
      out.push_back(-1);
    } else {
      out.push_back(it->second);
    }
  }
  if (!model_weeks.empty() && gaps.size() == model_weeks.size()) {
    throw DataError("calibration series does not overlap the model weeks");
  }
  if (!gaps.empty()) {
    std::string msg = "calibration series has gaps at";
    for (const auto& g : gaps) msg += " " + g;
    throw DataError(msg);
  }
  return out;
}

std::string age_class_name(AgeClass c) { return c == AgeClass::Adults18to64 ? "18-64" : "65+"; }

AgeClass parse_age_class(const std::string& text) {
  if (text == "18-64") return AgeClass::Adults18to64;
  if (text == "65+") return AgeClass::Seniors65plus;
  throw DataError("unknown age class '" + text + "'; expected 18-64 or 65+");
}

double VaccinationSeries::rate_on_or_before(Date day) const {
  auto it = std::upper_bound(weeks.begin(), weeks.end(), day);
  if (it == weeks.begin()) {
    throw DataError("no vaccination rate for " + state + " on or before " + format_date(day));
  }
  return rates[static_cast<std::size_t>(it - weeks.begin() - 1)];
}

std::map<std::string, StateReports> load_cdc_csv(std::istream& in) {
  struct Row {
    Date week;
    std::string band;
    CumulativeValue value;
  };
  std::map<std::string, std::vector<Row>> by_state;
  std::map<std::string, std::vector<std::string>> band_order;
  std::set<std::tuple<std::string, Date, std::string>> seen;
  for (auto& [lineno, f] : read_rows(in, "state,week_start_date,age_band,cum_deaths")) {
    if (f[0].empty() || f[2].empty()) throw DataError(where(lineno) + ": empty state or age band");
    const Date week = parse_week(f[1], lineno);
    if (!seen.emplace(f[0], week, f[2]).second) {
      throw DataError(where(lineno) + ": duplicate row for " + f[0] + " " + f[1] + " " + f[2]);
    }
    CumulativeValue v = f[3].empty() ? CumulativeValue::censored()
                                     : CumulativeValue::observed(parse_count(f[3], where(lineno)));
    auto& order = band_order[f[0]];
    if (std::find(order.begin(), order.end(), f[2]) == order.end()) order.push_back(f[2]);
    by_state[f[0]].push_back({week, f[2], v});
  }
  std::map<std::string, StateReports> out;
  for (auto& [state, rows] : by_state) {
    Date lo = rows.front().week, hi = rows.front().week;
    for (const auto& r : rows) {
      lo = std::min(lo, r.week);
      hi = std::max(hi, r.week);
    }
    StateReports sr;
    for (Date d = lo; d <= hi; d += std::chrono::days{7}) sr.weeks.push_back(d);
    for (const auto& band : band_order[state]) {
      CumulativeReport rep;
      rep.state = state;
      rep.band = band;
      rep.weeks = sr.weeks;
      rep.values.assign(sr.weeks.size(), CumulativeValue::missing());
      sr.reports.push_back(std::move(rep));
    }
    for (const auto& r : rows) {
      const auto b = std::find(band_order[state].begin(), band_order[state].end(), r.band) -
                     band_order[state].begin();
      const auto w = (r.week - lo).count() / 7;
      sr.reports[static_cast<std::size_t>(b)].values[static_cast<std::size_t>(w)] = r.value;
    }
    out.emplace(state, std::move(sr));
  }
  return out;
}

std::map<std::string, StateReports> load_cdc_csv(const std::string& path) {
  auto in = open_or_throw(path);
  return load_cdc_csv(in);
}

CalibrationTable load_calibration_csv(std::istream& in) {
  CalibrationTable out;
  for (auto& [lineno, f] : read_rows(in, "state,week_start_date,deaths")) {
    if (f[0].empty()) throw DataError(where(lineno) + ": empty state");
    const Date week = parse_week(f[1], lineno);
    if (!out[f[0]].emplace(week, parse_count(f[2], where(lineno))).second) {
      throw DataError(where(lineno) + ": duplicate row for " + f[0] + " " + f[1]);
    }
  }
  return out;
}

CalibrationTable load_calibration_csv(const std::string& path) {
  auto in = open_or_throw(path);
  return load_calibration_csv(in);
}

std::vector<VaccinationSeries> load_vaccination_csv(std::istream& in) {
  std::map<std::pair<std::string, AgeClass>, std::map<Date, double>> table;
  for (auto& [lineno, f] : read_rows(in, "state,week_start_date,age_class,rate")) {
    if (f[0].empty()) throw DataError(where(lineno) + ": empty state");
    const Date week = parse_week(f[1], lineno);
    const AgeClass c = parse_age_class(f[2]);
    const double rate = parse_real(f[3], where(lineno));
    if (rate < 0.0 || rate > 1.0) throw DataError(where(lineno) + ": rate outside [0, 1]");
    if (!table[{f[0], c}].emplace(week, rate).second) {
      throw DataError(where(lineno) + ": duplicate row for " + f[0] + " " + f[1] + " " + f[2]);
    }
  }
  std::vector<VaccinationSeries> out;
  for (auto& [key, series] : table) {
    VaccinationSeries v;
    v.state = key.first;
    v.age_class = key.second;
    for (auto [d, r] : series) {
      if (!v.rates.empty() && r < v.rates.back()) {
        throw DataError("vaccination rate for " + v.state + " " + age_class_name(v.age_class) +
                        " decreases at " + format_date(d));
      }
      v.weeks.push_back(d);
      v.rates.push_back(r);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<VaccinationSeries> load_vaccination_csv(const std::string& path) {
  auto in = open_or_throw(path);
  return load_vaccination_csv(in);
}

}  // namespace splinegp::data
