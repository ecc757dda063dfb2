#include "splinegp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "splinegp/data.hpp"
#include "splinegp/errors.hpp"
#include "splinegp/meta.hpp"
#include "splinegp/mortality.hpp"
#include "splinegp/studies.hpp"

namespace splinegp::cli {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// A CSV file in the output directory that starts with the provenance line.
class CsvOut {
 public:
  CsvOut(const config::RunConfig& cfg, const std::string& name, const std::string& header,
         std::vector<std::string>& written)
      : path_((fs::path(cfg.out_dir) / name).string()), out_(path_) {
    if (!out_) throw ValidationError("cannot write " + path_);
    out_ << provenance_line(cfg) << "\n" << header << "\n";
    written.push_back(path_);
  }

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cells, first = false), ...);
    out_ << "\n";
  }

 private:
  std::string path_;
  std::ofstream out_;
};

void prepare_out_dir(const config::RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec || !fs::is_directory(cfg.out_dir)) {
    throw ValidationError("cannot create output directory " + cfg.out_dir);
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ValidationError(what + " path is not configured");
  if (!fs::is_regular_file(path)) throw ValidationError(what + " not found: " + path);
}

hmc::SamplerConfig sampler(const config::RunConfig& cfg, bool store_raw) {
  auto s = cfg.mcmc;
  s.seed = cfg.seed;
  s.store_raw = store_raw;
  return s;
}

std::vector<studies::MethodSpec> parse_methods(const std::vector<std::string>& names) {
  std::vector<studies::MethodSpec> out;
  for (const auto& n : names) out.push_back(studies::parse_method(n));
  return out;
}

/// Evenly spaced row indices, `per_chain` from each of `chains` equal blocks.
std::vector<Eigen::Index> thin_rows(Eigen::Index rows, int chains, std::size_t per_chain) {
  std::vector<Eigen::Index> out;
  const Eigen::Index block = rows / chains;
  const auto take = std::min<Eigen::Index>(block, static_cast<Eigen::Index>(per_chain));
  for (int c = 0; c < chains; ++c) {
    for (Eigen::Index k = 0; k < take; ++k) out.push_back(c * block + k * block / take);
  }
  return out;
}

std::vector<double> row_of(const Eigen::MatrixXd& m, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

struct Quantiles {
  double lo, mid, hi;
};

Quantiles quantiles(const std::vector<double>& v) {
  return {hmc::quantile(v, 0.025), hmc::quantile(v, 0.5), hmc::quantile(v, 0.975)};
}

void write_summary(CsvOut& csv, const hmc::PosteriorDraws& draws) {
  for (const auto& s : draws.summarize()) {
    csv.row(s.name, num(s.mean), num(s.sd), num(s.q025), num(s.q50), num(s.q975), num(s.ess_bulk),
            num(s.rhat));
  }
}

// Runtime decrease is relative to the slowest method within the same replicate.
void write_timing(const config::RunConfig& cfg, const std::string& file,
                  const std::vector<std::pair<std::string, double>>& runs, const std::string& prefix_header,
                  const std::vector<std::string>& prefixes, std::vector<std::string>& written) {
  CsvOut csv(cfg, file, prefix_header + "method,runtime_seconds,decrease_vs_slowest", written);
  std::map<std::string, double> slowest;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    auto& s = slowest[prefixes.empty() ? std::string() : prefixes[k]];
    s = std::max(s, runs[k].second);
  }
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const double top = slowest[prefixes.empty() ? std::string() : prefixes[k]];
    const double dec = top > 0.0 ? 1.0 - runs[k].second / top : 0.0;
    if (prefix_header.empty()) {
      csv.row(runs[k].first, num(runs[k].second), num(dec));
    } else {
      csv.row(prefixes[k], runs[k].first, num(runs[k].second), num(dec));
    }
  }
}

// ---- mortality inputs shared by fit and predict ----

struct StateInputs {
  std::string state;
  std::vector<data::Date> model_weeks;
  std::vector<data::CensoredSeries> series;
  std::unique_ptr<mortality::MortalityModel> model;
  std::optional<std::vector<std::int64_t>> calibration;
};

std::vector<std::string> selected_states(const config::RunConfig& cfg,
                                         const std::map<std::string, data::StateReports>& reports) {
  if (cfg.states.empty()) {
    std::vector<std::string> all;
    for (const auto& [s, _] : reports) all.push_back(s);
    return all;
  }
  for (const auto& s : cfg.states) {
    if (!reports.count(s)) throw DataError("state " + s + " is not in " + cfg.cdc_path);
  }
  return cfg.states;
}

std::vector<StateInputs> build_states(const config::RunConfig& cfg, bool need_calibration,
                                      std::ostream& log) {
  require_file(cfg.cdc_path, "CDC deaths file");
  const auto reports = data::load_cdc_csv(cfg.cdc_path);
  std::optional<data::CalibrationTable> calib;
  if (!cfg.calibration_path.empty()) {
    require_file(cfg.calibration_path, "calibration file");
    calib = data::load_calibration_csv(cfg.calibration_path);
  } else if (need_calibration) {
    throw ValidationError("predict needs fit.calibration");
  }
  std::vector<StateInputs> out;
  for (const auto& state : selected_states(cfg, reports)) {
    const auto& sr = reports.at(state);
    if (sr.weeks.size() < 3) throw DataError("state " + state + ": need at least 3 reported weeks");
    StateInputs in;
    in.state = state;
    in.model_weeks.assign(sr.weeks.begin(), sr.weeks.end() - 1);
    std::vector<std::string> labels;
    for (const auto& rep : sr.reports) {
      in.series.push_back(data::difference_weekly(rep));
      labels.push_back(rep.band);
      for (const auto& w : in.series.back().warnings) log << "warning: " << state << " " << w << "\n";
    }
    const int W = static_cast<int>(in.model_weeks.size());
    auto grid = mortality::AgeGrid::from_labels(labels, W);
    auto totals = mortality::TotalsPrior::from_series(in.series, W, cfg.sd_factor);
    auto prior = mortality::make_surface_prior(cfg.prior_kind, grid, cfg.knots_age, cfg.knots_week, cfg.hyper);
    in.model = std::make_unique<mortality::MortalityModel>(std::move(grid), in.series, std::move(prior),
                                                           std::move(totals));
    if (calib) {
      const auto it = calib->find(state);
      if (it == calib->end()) throw DataError("state " + state + " is not in " + cfg.calibration_path);
      in.calibration = data::align_calibration(it->second, in.model_weeks);
    }
    out.push_back(std::move(in));
  }
  return out;
}

std::string draws_name(const std::string& state) { return "draws_" + state + ".csv"; }

std::vector<std::string> split(const std::string& line) { return data::split_csv_line(line); }

/// Reads a file written by CsvOut, checking its provenance against cfg.
std::vector<std::vector<std::string>> read_own_csv(const config::RunConfig& cfg, const std::string& path,
                                                   const std::string& header) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing upstream output: " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("# config_hash=", 0) != 0) throw DataError(path + ": no provenance line");
  const std::string want = provenance_line(cfg);
  if (line != want) {
    throw ValidationError(path + " was produced by a different configuration (" + line + ", expected " +
                          want + ")");
  }
  std::getline(in, line);
  if (line != header) throw DataError(path + ": expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split(line));
  }
  return rows;
}

double to_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw DataError(where + ": '" + s + "' is not a number");
  return v;
}

}  // namespace

std::string provenance_line(const config::RunConfig& cfg) {
  return "# config_hash=" + cfg.hash() + " seed=" + std::to_string(cfg.seed);
}

std::vector<std::string> cmd_simulate(const config::RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  studies::SimulationConfig sc;
  sc.grid_size = cfg.sim_grid;
  sc.lengthscale = cfg.sim_lengthscale;
  sc.overdispersion = cfg.sim_overdispersion;
  sc.train_fraction = cfg.sim_train_fraction;
  sc.methods = parse_methods(cfg.sim_methods);
  sc.mcmc = sampler(cfg, false);
  sc.hyper = cfg.hyper;
  sc.seed = cfg.seed;
  sc.validate();
  prepare_out_dir(cfg);

  std::vector<std::string> written;
  const std::string scenario = studies::correlation_label(cfg.sim_lengthscale);
  CsvOut table(cfg, "simulation.csv",
               "replicate,seed,scenario,lengthscale,grid_size,train_fraction,method,mse_mean,mse_sd,"
               "coverage95,divergences,max_rhat",
               written);
  CsvOut surfaces(cfg, "surfaces.csv", "replicate,layer,row,col,x,y,value,in_train", written);
  std::vector<std::pair<std::string, double>> runs;
  std::vector<std::string> run_prefix;
  for (int r = 0; r < cfg.sim_replicates; ++r) {
    sc.seed = cfg.seed + static_cast<std::uint64_t>(r);
    sc.mcmc.seed = sc.seed;
    log << "replicate " << r + 1 << "/" << cfg.sim_replicates << " (" << scenario
        << " correlated, lengthscale " << num(cfg.sim_lengthscale) << ")\n";
    const auto report = studies::run_simulation(sc);
    const auto& st = report.study;
    const auto n = st.mean.rows();
    Eigen::MatrixXi in_train = Eigen::MatrixXi::Zero(n, n);
    for (const auto& o : st.train) in_train(o.row, o.col) = 1;
    auto cells = [&](const std::string& layer, auto&& value) {
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
          surfaces.row(r + 1, layer, i, j, num(st.coords[static_cast<std::size_t>(i)]),
                       num(st.coords[static_cast<std::size_t>(j)]), value(i, j), in_train(i, j));
        }
      }
    };
    cells("truth", [&](Eigen::Index i, Eigen::Index j) { return num(st.mean(i, j)); });
    cells("counts", [&](Eigen::Index i, Eigen::Index j) { return std::to_string(st.counts(i, j)); });
    for (const auto& m : report.results) {
      table.row(r + 1, sc.seed, scenario, num(cfg.sim_lengthscale), cfg.sim_grid, num(cfg.sim_train_fraction),
                m.method.label(), num(m.mse_mean), num(m.mse_sd), num(m.coverage95), m.divergences,
                num(m.max_rhat));
      cells(m.method.label(), [&](Eigen::Index i, Eigen::Index j) { return num(m.median_surface(i, j)); });
      runs.emplace_back(m.method.label(), m.runtime_seconds);
      run_prefix.push_back(std::to_string(r + 1));
      log << "  " << m.method.label() << ": mse " << num(m.mse_mean) << " (sd " << num(m.mse_sd)
          << "), runtime " << num(m.runtime_seconds) << " s\n";
    }
  }
  write_timing(cfg, "timing.csv", runs, "replicate,", run_prefix, written);
  return written;
}

std::vector<std::string> cmd_benchmark(const config::RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_file(cfg.bench_data, "benchmark data");
  studies::BenchmarkConfig bc;
  bc.train_size = cfg.bench_train;
  bc.test_size = cfg.bench_test;
  bc.methods = parse_methods(cfg.bench_methods);
  bc.mcmc = sampler(cfg, false);
  bc.hyper = cfg.hyper;
  bc.seed = cfg.seed;
  bc.validate();
  const auto points = studies::load_point_csv(cfg.bench_data);
  if (points.size() <= bc.train_size) {
    throw ValidationError("benchmark data has " + std::to_string(points.size()) +
                          " points; need more than benchmark.train_size");
  }
  prepare_out_dir(cfg);
  const auto report = studies::run_benchmark(points, bc);
  std::vector<std::string> written;
  CsvOut table(cfg, "benchmark.csv", "method,train_size,test_size,mse,divergences", written);
  std::vector<std::pair<std::string, double>> runs;
  for (const auto& r : report.results) {
    table.row(r.method.label(), report.train_size, report.test_size, num(r.mse), r.divergences);
    runs.emplace_back(r.method.label(), r.runtime_seconds);
    log << r.method.label() << ": test mse " << num(r.mse) << "\n";
  }
  write_timing(cfg, "benchmark_timing.csv", runs, "", {}, written);
  return written;
}

std::vector<std::string> cmd_fit(const config::RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  auto states = build_states(cfg, false, log);
  prepare_out_dir(cfg);
  std::vector<std::string> written;
  for (auto& in : states) {
    const auto& model = *in.model;
    log << "fitting " << in.state << ": " << model.grid().band_count() << " bands, "
        << model.grid().weeks() << " weeks, " << model.dimension() << " parameters\n";
    const auto draws = hmc::sample(model, sampler(cfg, true));
    const Eigen::MatrixXd raw = draws.stacked_raw();
    const auto rows = thin_rows(raw.rows(), cfg.mcmc.chains, cfg.draws_per_chain);
    const int A = model.grid().ages(), W = model.grid().weeks();

    // mu*_{a,w}: calibration total (or lambda_w) spread by the age composition.
    std::vector<std::vector<double>> mu(static_cast<std::size_t>(A * W));
    for (auto r : rows) {
      const auto st = model.transform(row_of(raw, r));
      for (int w = 0; w < W; ++w) {
        const double total = in.calibration ? static_cast<double>((*in.calibration)[static_cast<std::size_t>(w)])
                                            : st.lambda[static_cast<std::size_t>(w)];
        for (int a = 0; a < A; ++a) mu[static_cast<std::size_t>(a + A * w)].push_back(total * st.pi(a, w));
      }
    }
    CsvOut fit(cfg, "fit_" + in.state + ".csv", "age,week,q2.5,q50,q97.5", written);
    CsvOut mean(cfg, "mustar_" + in.state + ".csv", "age,week,date,mean", written);
    for (int w = 0; w < W; ++w) {
      for (int a = 0; a < A; ++a) {
        const auto& v = mu[static_cast<std::size_t>(a + A * w)];
        const auto q = quantiles(v);
        fit.row(a, w + 1, num(q.lo), num(q.mid), num(q.hi));
        double m = 0.0;
        for (double x : v) m += x;
        mean.row(a, w + 1, data::format_date(in.model_weeks[static_cast<std::size_t>(w)]),
                 num(m / static_cast<double>(v.size())));
      }
    }
    CsvOut diag(cfg, "diagnostics_" + in.state + ".csv", "name,mean,sd,q2.5,q50,q97.5,ess_bulk,rhat", written);
    write_summary(diag, draws);
    CsvOut chains(cfg, "sampler_" + in.state + ".csv", "chain,step_size,mean_accept,divergences", written);
    for (std::size_t c = 0; c < draws.chains.size(); ++c) {
      const auto& ch = draws.chains[c];
      chains.row(c + 1, num(ch.step_size), num(ch.mean_accept), ch.divergences);
    }
    std::string header = "chain,iteration";
    for (std::size_t p = 0; p < model.dimension(); ++p) header += ",raw" + std::to_string(p);
    CsvOut dr(cfg, draws_name(in.state), header, written);
    std::ostringstream line;
    for (std::size_t c = 0; c < draws.chains.size(); ++c) {
      const auto& m = draws.chains[c].raw;
      for (Eigen::Index it = 0; it < m.rows(); ++it) {
        line.str("");
        line << c + 1 << "," << it + 1;
        for (Eigen::Index p = 0; p < m.cols(); ++p) line << "," << exact(m(it, p));
        dr.row(line.str());
      }
    }
    log << "  divergences " << draws.total_divergences() << "\n";
  }
  return written;
}

std::vector<std::string> cmd_predict(const config::RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  auto states = build_states(cfg, true, log);
  for (const auto& in : states) {
    const auto path = (fs::path(cfg.out_dir) / draws_name(in.state)).string();
    if (!fs::is_regular_file(path)) {
      throw ValidationError("missing upstream fit for state " + in.state + ": " + path);
    }
  }
  std::vector<std::string> written;
  for (auto& in : states) {
    const auto& model = *in.model;
    std::string header = "chain,iteration";
    for (std::size_t p = 0; p < model.dimension(); ++p) header += ",raw" + std::to_string(p);
    const auto path = (fs::path(cfg.out_dir) / draws_name(in.state)).string();
    const auto rows = read_own_csv(cfg, path, header);
    if (rows.empty()) throw DataError(path + ": no draws");
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(model.dimension()));
    int chains = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != model.dimension() + 2) throw DataError(path + ": ragged row");
      chains = std::max(chains, static_cast<int>(to_double(rows[r][0], path)));
      for (std::size_t p = 0; p < model.dimension(); ++p) {
        raw(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) = to_double(rows[r][p + 2], path);
      }
    }
    std::vector<Eigen::MatrixXd> alphas;
    for (auto r : thin_rows(raw.rows(), std::max(chains, 1), cfg.draws_per_chain)) {
      alphas.push_back(model.age_concentrations(row_of(raw, r)));
    }
    const auto d_star = mortality::predictive_rescale(alphas, *in.calibration, cfg.seed, cfg.mcmc.threads);
    const int A = model.grid().ages(), W = model.grid().weeks();
    std::vector<double> v(d_star.size());
    CsvOut pred(cfg, "predict_" + in.state + ".csv", "age,week,q2.5,q50,q97.5", written);
    for (int w = 0; w < W; ++w) {
      for (int a = 0; a < A; ++a) {
        for (std::size_t d = 0; d < d_star.size(); ++d) v[d] = d_star[d](a, w);
        const auto q = quantiles(v);
        pred.row(a, w + 1, num(q.lo), num(q.mid), num(q.hi));
      }
    }
    CsvOut ppc(cfg, "ppc_" + in.state + ".csv", "band,week,observed,q2.5,q50,q97.5", written);
    int covered = 0, observed = 0;
    const auto& bands = model.grid().bands();
    for (std::size_t b = 0; b < bands.size(); ++b) {
      std::map<int, std::int64_t> obs(in.series[b].retrievable.begin(), in.series[b].retrievable.end());
      for (int w = 1; w <= W; ++w) {
        for (std::size_t d = 0; d < d_star.size(); ++d) {
          v[d] = d_star[d].block(bands[b].first, w - 1, bands[b].last - bands[b].first + 1, 1).sum();
        }
        const auto q = quantiles(v);
        const auto it = obs.find(w);
        if (it != obs.end()) {
          ++observed;
          if (static_cast<double>(it->second) >= q.lo && static_cast<double>(it->second) <= q.hi) ++covered;
        }
        ppc.row(bands[b].label, w, it == obs.end() ? std::string() : std::to_string(it->second), num(q.lo),
                num(q.mid), num(q.hi));
      }
    }
    log << in.state << ": band-level 95% predictive intervals cover " << covered << "/" << observed
        << " retrievable observations\n";
  }
  return written;
}

std::vector<std::string> cmd_meta(const config::RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_file(cfg.vaccination_path, "vaccination file");
  const std::string fits = cfg.fits_dir.empty() ? cfg.out_dir : cfg.fits_dir;
  const data::Date anchor = data::parse_date(cfg.resurgence_from);
  const auto vaccination = data::load_vaccination_csv(cfg.vaccination_path);
  std::vector<std::string> states = cfg.states;
  if (states.empty()) {
    std::set<std::string> all;
    for (const auto& v : vaccination) all.insert(v.state);
    states.assign(all.begin(), all.end());
  }
  for (const auto& s : states) {
    const auto path = (fs::path(fits) / ("mustar_" + s + ".csv")).string();
    if (!fs::is_regular_file(path)) throw ValidationError("missing upstream fit for state " + s + ": " + path);
  }
  auto rate_for = [&](const std::string& state, data::AgeClass c, data::Date day) {
    for (const auto& v : vaccination) {
      if (v.state == state && v.age_class == c) return v.rate_on_or_before(day);
    }
    throw DataError("no " + data::age_class_name(c) + " vaccination series for state " + state);
  };

  // The upstream fit shares every setting except the command, so its hash matches ours.
  std::vector<meta::StateData> data_by_state;
  std::vector<std::vector<data::Date>> dates_by_state;
  for (const auto& s : states) {
    const auto path = (fs::path(fits) / ("mustar_" + s + ".csv")).string();
    const auto rows = read_own_csv(cfg, path, "age,week,date,mean");
    int ages = 0, weeks = 0;
    for (const auto& r : rows) {
      if (r.size() != 4) throw DataError(path + ": ragged row");
      ages = std::max(ages, static_cast<int>(to_double(r[0], path)) + 1);
      weeks = std::max(weeks, static_cast<int>(to_double(r[1], path)));
    }
    if (static_cast<std::size_t>(ages) * static_cast<std::size_t>(weeks) != rows.size()) {
      throw DataError(path + ": expected a full age by week grid");
    }
    Eigen::MatrixXd by_age(ages, weeks);
    std::vector<data::Date> dates(static_cast<std::size_t>(weeks));
    for (const auto& r : rows) {
      const int a = static_cast<int>(to_double(r[0], path));
      const int w = static_cast<int>(to_double(r[1], path));
      by_age(a, w - 1) = to_double(r[3], path);
      dates[static_cast<std::size_t>(w - 1)] = data::parse_date(r[2]);
    }
    const auto by_class = meta::aggregate_to_classes(by_age);
    const Eigen::VectorXd all_ages = by_age.colwise().sum().transpose();
    int search_from = 0;
    for (int w = 0; w < weeks; ++w) {
      if (dates[static_cast<std::size_t>(w)] >= anchor) {
        search_from = w + 1;
        break;
      }
    }
    if (search_from == 0) throw DataError("state " + s + ": no fitted weeks on or after " + cfg.resurgence_from);
    const auto start = data::resurgence_start(std::span<const double>(all_ages.data(), all_ages.size()), search_from);
    if (!start) throw DataError("state " + s + ": no resurgence detected after " + cfg.resurgence_from);
    meta::StateData sd;
    sd.deaths = meta::relative_deaths(s, by_class, *start);
    const data::Date vacc_day = dates[static_cast<std::size_t>(*start - 1)] - std::chrono::days{cfg.vaccination_lag_days};
    sd.vacc_pre = {rate_for(s, data::AgeClass::Adults18to64, vacc_day),
                   rate_for(s, data::AgeClass::Seniors65plus, vacc_day)};
    log << s << ": resurgence from week " << *start << " ("
        << data::format_date(dates[static_cast<std::size_t>(*start - 1)]) << "), 18-64 coverage "
        << num(sd.vacc_pre[0]) << "\n";
    data_by_state.push_back(std::move(sd));
    dates_by_state.push_back(std::move(dates));
  }
  prepare_out_dir(cfg);

  const meta::MetaModel model(data_by_state, cfg.gamma_convention);
  const auto draws = hmc::sample(model, sampler(cfg, true));
  const Eigen::MatrixXd raw = draws.stacked_raw();
  std::vector<std::string> written;
  CsvOut effects(cfg, "effects.csv", "name,mean,sd,q2.5,q50,q97.5,ess_bulk,rhat", written);
  write_summary(effects, draws);

  CsvOut ppc(cfg, "meta_ppc.csv", "state,age_class,week,date,observed,q2.5,q50,q97.5", written);
  std::seed_seq seq{cfg.seed, std::uint64_t{0x77}};
  std::mt19937_64 rng(seq);
  const auto rows = thin_rows(raw.rows(), cfg.mcmc.chains, cfg.draws_per_chain);
  std::vector<meta::MetaParams> params;
  for (auto r : rows) params.push_back(model.unpack(row_of(raw, r)));
  std::vector<double> v(params.size());
  for (std::size_t m = 0; m < data_by_state.size(); ++m) {
    const auto& sd = data_by_state[m];
    for (int c = 0; c < meta::kClasses; ++c) {
      const auto& r = sd.deaths.r[static_cast<std::size_t>(c)];
      for (std::size_t k = 0; k < r.size(); ++k) {
        for (std::size_t d = 0; d < params.size(); ++d) {
          const double xi = std::exp(model.log_shape(params[d], m, c, static_cast<int>(k), sd.vacc_pre));
          const double scale = model.expected_relative(xi, params[d].kappa[m]) / xi;
          v[d] = std::gamma_distribution<double>(xi, scale)(rng);
        }
        const auto q = quantiles(v);
        const int week = sd.deaths.start_week + static_cast<int>(k);
        ppc.row(sd.deaths.state, data::age_class_name(static_cast<data::AgeClass>(c)), week,
                data::format_date(dates_by_state[m][static_cast<std::size_t>(week - 1)]), num(r[k]), num(q.lo),
                num(q.mid), num(q.hi));
      }
    }
  }

  double scenario = cfg.scenario_rate;
  if (scenario == 0.0) {
    for (const auto& sd : data_by_state) scenario = std::max(scenario, sd.vacc_pre[0]);
  }
  log << "counterfactual 18-64 coverage " << num(scenario) << "\n";
  CsvOut cf(cfg, "counterfactual.csv",
            "state,age_class,avoided_median,avoided_lo95,avoided_hi95,pct_median,pct_lo95,pct_hi95", written);
  for (const auto& s : meta::counterfactual_project(model, raw, scenario)) {
    cf.row(s.state, data::age_class_name(static_cast<data::AgeClass>(s.age_class)), num(s.avoided_median),
           num(s.avoided_lo95), num(s.avoided_hi95), num(s.pct_median), num(s.pct_lo95), num(s.pct_hi95));
  }
  log << "divergences " << draws.total_divergences() << "\n";
  return written;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian 2D surface estimation with B-spline projected Gaussian process priors", "splinegp"};
  std::string command, config_path, out_dir, state, prior;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> knots_age, knots_week;
  std::optional<int> threads;
  app.add_option("command", command, "simulate, fit, benchmark, predict or meta")
      ->required()
      ->check(CLI::IsMember({"simulate", "fit", "benchmark", "predict", "meta"}));
  app.add_option("--config", config_path, "TOML configuration file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--state", state, "restrict fit, predict or meta to one state");
  app.add_option("--prior", prior, "projected-gp, gp2d, bsplines or psplines");
  app.add_option("--knots-age", knots_age, "knots along the age axis");
  app.add_option("--knots-week", knots_week, "knots along the week axis");
  app.add_option("--threads", threads, "worker threads for chains (0: one per chain)");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    config::RunConfig cfg = config_path.empty() ? config::RunConfig{} : config::load_config(config_path);
    cfg.command = command;
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!state.empty()) cfg.states = {state};
    if (!prior.empty()) cfg.prior_kind = priors::parse_prior_kind(prior);
    if (knots_age) cfg.knots_age = *knots_age;
    if (knots_week) cfg.knots_week = *knots_week;
    if (threads) cfg.mcmc.threads = *threads;

    std::vector<std::string> written;
    if (command == "simulate") written = cmd_simulate(cfg, err);
    else if (command == "benchmark") written = cmd_benchmark(cfg, err);
    else if (command == "fit") written = cmd_fit(cfg, err);
    else if (command == "predict") written = cmd_predict(cfg, err);
    else written = cmd_meta(cfg, err);
    for (const auto& w : written) out << w << "\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace splinegp::cli
