#include "splinegp/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include <toml++/toml.hpp>

#include "splinegp/errors.hpp"

namespace splinegp::config {

namespace {

namespace fs = std::filesystem;

// Absolute, so the config hash does not depend on how the config file was named.
std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty()) return path;
  return fs::absolute(fs::path(base_dir) / path).lexically_normal().string();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

// Typed readers that name the offending key on mismatch.
struct Section {
  const toml::table& table;
  std::string name;

  std::string key(const std::string& k) const { return name + "." + k; }

  std::optional<std::int64_t> integer(const std::string& k) const {
    const auto* node = table.get(k);
    if (!node) return std::nullopt;
    if (const auto v = node->value<std::int64_t>(); v && node->is_integer()) return *v;
    throw ValidationError("config key " + key(k) + " must be an integer");
  }
  std::optional<double> real(const std::string& k) const {
    const auto* node = table.get(k);
    if (!node) return std::nullopt;
    if (node->is_floating_point() || node->is_integer()) return node->value<double>();
    throw ValidationError("config key " + key(k) + " must be a number");
  }
  std::optional<std::string> text(const std::string& k) const {
    const auto* node = table.get(k);
    if (!node) return std::nullopt;
    if (const auto v = node->value<std::string>(); v && node->is_string()) return *v;
    throw ValidationError("config key " + key(k) + " must be a string");
  }
  std::optional<std::vector<std::string>> strings(const std::string& k) const {
    const auto* node = table.get(k);
    if (!node) return std::nullopt;
    const auto* arr = node->as_array();
    if (!arr) throw ValidationError("config key " + key(k) + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& item : *arr) {
      const auto v = item.value<std::string>();
      if (!v || !item.is_string()) {
        throw ValidationError("config key " + key(k) + " must be an array of strings");
      }
      out.push_back(*v);
    }
    return out;
  }
};

std::size_t non_negative(std::int64_t v, const std::string& key) {
  if (v < 0) throw ValidationError("config key " + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

const std::map<std::string, std::vector<std::string>>& allowed_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"run", {"seed", "out", "threads"}},
      {"mcmc", {"chains", "iters", "warmup", "seed", "target_accept", "integration_time", "max_leapfrog"}},
      {"prior",
       {"kind", "knots_age", "knots_week", "lengthscale_shape", "lengthscale_scale", "magnitude_scale",
        "precision_scale", "sum_to_zero_sd", "level_sd"}},
      {"simulate", {"grid_size", "lengthscale", "overdispersion", "train_fraction", "replicates", "methods"}},
      {"benchmark", {"data", "train_size", "test_size", "methods"}},
      {"fit", {"cdc", "calibration", "states", "sd_factor", "draws_per_chain"}},
      {"meta",
       {"fits", "vaccination", "resurgence_from", "vaccination_lag_days", "gamma_convention",
        "scenario_rate"}},
  };
  return keys;
}

}  // namespace

hmc::SamplerConfig RunConfig::default_mcmc() {
  hmc::SamplerConfig c;
  c.chains = 4;
  c.iterations = 1000;
  c.warmup = 500;
  return c;
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv{
      {"run.seed", std::to_string(seed)},
      {"mcmc.chains", std::to_string(mcmc.chains)},
      {"mcmc.iters", std::to_string(mcmc.iterations)},
      {"mcmc.warmup", std::to_string(mcmc.warmup)},
      {"mcmc.target_accept", fmt(mcmc.target_accept)},
      {"mcmc.integration_time", fmt(mcmc.integration_time)},
      {"mcmc.max_leapfrog", std::to_string(mcmc.max_leapfrog)},
      {"prior.kind", std::string(priors::prior_kind_name(prior_kind))},
      {"prior.knots_age", std::to_string(knots_age)},
      {"prior.knots_week", std::to_string(knots_week)},
      {"prior.lengthscale_shape", fmt(hyper.lengthscale_shape)},
      {"prior.lengthscale_scale", fmt(hyper.lengthscale_scale)},
      {"prior.magnitude_scale", fmt(hyper.magnitude_scale)},
      {"prior.precision_scale", fmt(hyper.precision_scale)},
      {"prior.sum_to_zero_sd", fmt(hyper.sum_to_zero_sd)},
      {"prior.level_sd", fmt(hyper.level_sd)},
      {"simulate.grid_size", std::to_string(sim_grid)},
      {"simulate.lengthscale", fmt(sim_lengthscale)},
      {"simulate.overdispersion", fmt(sim_overdispersion)},
      {"simulate.train_fraction", fmt(sim_train_fraction)},
      {"simulate.replicates", std::to_string(sim_replicates)},
      {"simulate.methods", join(sim_methods)},
      {"benchmark.data", bench_data},
      {"benchmark.train_size", std::to_string(bench_train)},
      {"benchmark.test_size", std::to_string(bench_test)},
      {"benchmark.methods", join(bench_methods)},
      {"fit.cdc", cdc_path},
      {"fit.calibration", calibration_path},
      {"fit.states", join(states)},
      {"fit.sd_factor", fmt(sd_factor)},
      {"fit.draws_per_chain", std::to_string(draws_per_chain)},
      {"meta.fits", fits_dir},
      {"meta.vaccination", vaccination_path},
      {"meta.resurgence_from", resurgence_from},
      {"meta.vaccination_lag_days", std::to_string(vaccination_lag_days)},
      {"meta.gamma_convention", meta::gamma_convention_name(gamma_convention)},
      {"meta.scenario_rate", fmt(scenario_rate)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::hash() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical());
  return os.str();
}

void RunConfig::validate() const {
  mcmc.validate();
  if (prior_kind != priors::PriorKind::Standard2DGP && (knots_age < 2 || knots_week < 2)) {
    throw ValidationError("knots must be >= 2 per axis");
  }
  if (!(hyper.lengthscale_shape > 0.0) || !(hyper.lengthscale_scale > 0.0) ||
      !(hyper.magnitude_scale > 0.0) || !(hyper.precision_scale > 0.0) ||
      !(hyper.sum_to_zero_sd > 0.0) || !(hyper.level_sd > 0.0)) {
    throw ValidationError("hyperprior constants must be positive");
  }
  if (!(sim_train_fraction > 0.0 && sim_train_fraction < 1.0)) {
    throw ValidationError("train fraction must lie in (0, 1)");
  }
  if (sim_replicates < 1) throw ValidationError("simulate.replicates must be >= 1");
  if (!(sd_factor > 0.0)) throw ValidationError("fit.sd_factor must be positive");
  if (draws_per_chain == 0) throw ValidationError("fit.draws_per_chain must be positive");
  if (vaccination_lag_days < 0) throw ValidationError("meta.vaccination_lag_days must be >= 0");
  if (!(scenario_rate >= 0.0 && scenario_rate <= 1.0)) {
    throw ValidationError("meta.scenario_rate must lie in [0, 1]");
  }
}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error at line " << e.source().begin.line << ": " << e.description();
    throw ValidationError(os.str());
  }
  for (const auto& [name, node] : root) {
    const std::string section(name.str());
    const auto it = allowed_keys().find(section);
    if (it == allowed_keys().end() || !node.is_table()) {
      throw ValidationError("unknown config section [" + section + "]");
    }
    for (const auto& [key, value] : *node.as_table()) {
      const std::string k(key.str());
      if (std::find(it->second.begin(), it->second.end(), k) == it->second.end()) {
        throw ValidationError("unknown config key " + section + "." + k);
      }
    }
  }

  RunConfig c;
  static const toml::table empty;
  auto section = [&](const char* name) {
    const auto* t = root.get_as<toml::table>(name);
    return Section{t ? *t : empty, name};
  };

  const auto run = section("run");
  const auto mc = section("mcmc");
  // The seed drives data simulation as well as sampling, so either section may carry it.
  const auto run_seed = run.integer("seed");
  const auto mcmc_seed = mc.integer("seed");
  if (run_seed && mcmc_seed && *run_seed != *mcmc_seed) {
    throw ValidationError("run.seed and mcmc.seed disagree");
  }
  if (const auto v = run_seed ? run_seed : mcmc_seed) {
    if (*v < 0) throw ValidationError("config key seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = run.text("out")) c.out_dir = resolve(*v, base_dir);
  if (auto v = run.integer("threads")) c.mcmc.threads = static_cast<int>(*v);

  if (auto v = mc.integer("chains")) c.mcmc.chains = static_cast<int>(*v);
  if (auto v = mc.integer("iters")) c.mcmc.iterations = static_cast<int>(*v);
  if (auto v = mc.integer("warmup")) c.mcmc.warmup = static_cast<int>(*v);
  if (auto v = mc.real("target_accept")) c.mcmc.target_accept = *v;
  if (auto v = mc.real("integration_time")) c.mcmc.integration_time = *v;
  if (auto v = mc.integer("max_leapfrog")) c.mcmc.max_leapfrog = static_cast<int>(*v);

  const auto pr = section("prior");
  if (auto v = pr.text("kind")) c.prior_kind = priors::parse_prior_kind(*v);
  if (auto v = pr.integer("knots_age")) c.knots_age = non_negative(*v, "prior.knots_age");
  if (auto v = pr.integer("knots_week")) c.knots_week = non_negative(*v, "prior.knots_week");
  if (auto v = pr.real("lengthscale_shape")) c.hyper.lengthscale_shape = *v;
  if (auto v = pr.real("lengthscale_scale")) c.hyper.lengthscale_scale = *v;
  if (auto v = pr.real("magnitude_scale")) c.hyper.magnitude_scale = *v;
  if (auto v = pr.real("precision_scale")) c.hyper.precision_scale = *v;
  if (auto v = pr.real("sum_to_zero_sd")) c.hyper.sum_to_zero_sd = *v;
  if (auto v = pr.real("level_sd")) c.hyper.level_sd = *v;

  const auto sim = section("simulate");
  if (auto v = sim.integer("grid_size")) c.sim_grid = non_negative(*v, "simulate.grid_size");
  if (auto v = sim.real("lengthscale")) c.sim_lengthscale = *v;
  if (auto v = sim.real("overdispersion")) c.sim_overdispersion = *v;
  if (auto v = sim.real("train_fraction")) c.sim_train_fraction = *v;
  if (auto v = sim.integer("replicates")) c.sim_replicates = static_cast<int>(*v);
  if (auto v = sim.strings("methods")) c.sim_methods = *v;

  const auto bench = section("benchmark");
  if (auto v = bench.text("data")) c.bench_data = resolve(*v, base_dir);
  if (auto v = bench.integer("train_size")) c.bench_train = non_negative(*v, "benchmark.train_size");
  if (auto v = bench.integer("test_size")) c.bench_test = non_negative(*v, "benchmark.test_size");
  if (auto v = bench.strings("methods")) c.bench_methods = *v;

  const auto fit = section("fit");
  if (auto v = fit.text("cdc")) c.cdc_path = resolve(*v, base_dir);
  if (auto v = fit.text("calibration")) c.calibration_path = resolve(*v, base_dir);
  if (auto v = fit.strings("states")) c.states = *v;
  if (auto v = fit.real("sd_factor")) c.sd_factor = *v;
  if (auto v = fit.integer("draws_per_chain")) c.draws_per_chain = non_negative(*v, "fit.draws_per_chain");

  const auto mt = section("meta");
  if (auto v = mt.text("fits")) c.fits_dir = resolve(*v, base_dir);
  if (auto v = mt.text("vaccination")) c.vaccination_path = resolve(*v, base_dir);
  if (auto v = mt.text("resurgence_from")) c.resurgence_from = *v;
  if (auto v = mt.integer("vaccination_lag_days")) c.vaccination_lag_days = static_cast<int>(*v);
  if (auto v = mt.text("gamma_convention")) c.gamma_convention = meta::parse_gamma_convention(*v);
  if (auto v = mt.real("scenario_rate")) c.scenario_rate = *v;
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto dir = fs::path(path).parent_path();
  return parse_config(buf.str(), dir.empty() ? "." : dir.string());
}

}  // namespace splinegp::config
