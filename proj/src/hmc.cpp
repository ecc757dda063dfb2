#include "splinegp/hmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <boost/math/special_functions/erf.hpp>

#include "splinegp/errors.hpp"

namespace splinegp::hmc {

namespace {

constexpr double kDivergenceThreshold = 1000.0;

double evaluate(const TargetDensity& target, const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
  grad.setZero();
  try {
    const double lp = target.log_density_gradient(std::span<const double>(q.data(), q.size()),
                                                  std::span<double>(grad.data(), grad.size()));
    if (!std::isfinite(lp) || !grad.allFinite()) return -std::numeric_limits<double>::infinity();
    return lp;
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

double hamiltonian(const PhasePoint& z, const Eigen::VectorXd& inv_metric) {
  return -z.log_density + 0.5 * (z.p.array().square() * inv_metric.array()).sum();
}

struct DualAveraging {
  double mu = 0.0;
  double s_bar = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  int t = 0;
  double delta = 0.8;
  static constexpr double gamma = 0.05;
  static constexpr double t0 = 10.0;
  static constexpr double kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    s_bar = 0.0;
    log_eps = std::log(eps);
    log_eps_bar = 0.0;
    t = 0;
  }

  double update(double accept) {
    ++t;
    const double eta = 1.0 / (t + t0);
    s_bar = (1.0 - eta) * s_bar + eta * (delta - accept);
    log_eps = mu - std::sqrt(static_cast<double>(t)) / gamma * s_bar;
    const double w = std::pow(static_cast<double>(t), -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    return std::exp(log_eps);
  }
};

void draw_momentum(std::mt19937_64& rng, const Eigen::VectorXd& inv_metric, Eigen::VectorXd& p) {
  std::normal_distribution<double> n01;
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = n01(rng) / std::sqrt(inv_metric[i]);
}

// Doubles or halves eps until one leapfrog step crosses acceptance 0.8.
double reasonable_step_size(const TargetDensity& target, const PhasePoint& start,
                            const Eigen::VectorXd& inv_metric, double eps, std::mt19937_64& rng) {
  PhasePoint z = start;
  draw_momentum(rng, inv_metric, z.p);
  const double h0 = hamiltonian(z, inv_metric);
  auto delta_h = [&](double e) {
    PhasePoint y = z;
    if (!leapfrog(target, y, inv_metric, e, 1)) return -std::numeric_limits<double>::infinity();
    const double d = h0 - hamiltonian(y, inv_metric);
    return std::isfinite(d) ? d : -std::numeric_limits<double>::infinity();
  };
  const double log_target = std::log(0.8);
  const int direction = delta_h(eps) > log_target ? 1 : -1;
  for (int i = 0; i < 60; ++i) {
    const double next = direction > 0 ? eps * 2.0 : eps * 0.5;
    if (next < 1e-12 || next > 1e3) break;
    const double d = delta_h(next);
    if (direction > 0 && !(d > log_target)) break;
    eps = next;
    if (direction < 0 && d > log_target) break;
  }
  return eps;
}

struct Transition {
  double accept_prob = 0.0;
  bool divergent = false;
};

Transition hmc_transition(const TargetDensity& target, PhasePoint& current,
                          const Eigen::VectorXd& inv_metric, double eps, const SamplerConfig& cfg,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PhasePoint z = current;
  draw_momentum(rng, inv_metric, z.p);
  const double h0 = hamiltonian(z, inv_metric);
  const double time = cfg.integration_time * (0.8 + 0.4 * unif(rng));
  const int steps = std::clamp(static_cast<int>(std::ceil(time / eps)), 1, cfg.max_leapfrog);
  Transition out;
  const bool ok = leapfrog(target, z, inv_metric, eps, steps);
  const double h1 = ok ? hamiltonian(z, inv_metric) : std::numeric_limits<double>::infinity();
  if (!std::isfinite(h1) || h1 - h0 > kDivergenceThreshold) {
    out.divergent = true;
    (void)unif(rng);  // keep the stream aligned with accepted transitions
    return out;
  }
  out.accept_prob = std::min(1.0, std::exp(h0 - h1));
  if (unif(rng) < out.accept_prob) current = std::move(z);
  return out;
}

// Stan-style regularised variance estimate.
Eigen::VectorXd regularized_variance(const std::vector<Eigen::VectorXd>& window) {
  const auto n = static_cast<double>(window.size());
  const Eigen::Index d = window.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& q : window) mean += q;
  mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto& q : window) var.array() += (q - mean).array().square();
  var /= (n - 1.0);
  return (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
}

ChainResult run_chain(const TargetDensity& target, const SamplerConfig& cfg, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(cfg.seed >> 32), static_cast<std::uint32_t>(chain)};
  std::mt19937_64 rng(seq);
  const auto dim = static_cast<Eigen::Index>(target.dimension());
  const auto n_out = target.output_names().size();

  PhasePoint z;
  z.q = initial_point(target, rng, cfg.init_radius, cfg.max_init_attempts);
  z.p = Eigen::VectorXd::Zero(dim);
  z.grad = Eigen::VectorXd::Zero(dim);
  z.log_density = evaluate(target, z.q, z.grad);

  Eigen::VectorXd inv_metric = Eigen::VectorXd::Ones(dim);
  double eps = reasonable_step_size(target, z, inv_metric, 0.1, rng);
  DualAveraging da;
  da.delta = cfg.target_accept;
  da.restart(eps);

  // Warmup windows: step size only, two metric windows (the second one's
  // estimate is kept), then a terminal step-size-only buffer.
  const int w = cfg.warmup;
  const bool adapt_metric = w >= 20;
  const int init_end = static_cast<int>(0.15 * w);
  const int mid_end = static_cast<int>(0.50 * w);
  const int slow_end = static_cast<int>(0.90 * w);
  std::vector<Eigen::VectorXd> window;

  const int kept = cfg.iterations - cfg.warmup;
  ChainResult out;
  out.draws.resize(kept, static_cast<Eigen::Index>(n_out));
  if (cfg.store_raw) out.raw.resize(kept, dim);
  std::vector<double> buf(n_out);
  double accept_sum = 0.0;

  for (int it = 0; it < cfg.iterations; ++it) {
    const auto tr = hmc_transition(target, z, inv_metric, eps, cfg, rng);
    if (it < w) {
      eps = da.update(tr.accept_prob);
      if (adapt_metric && it >= init_end && it < slow_end) {
        window.push_back(z.q);
        if (it + 1 == mid_end || it + 1 == slow_end) {
          if (window.size() >= 3) inv_metric = regularized_variance(window);
          window.clear();
          eps = reasonable_step_size(target, z, inv_metric, eps, rng);
          da.restart(eps);
        }
      }
      if (it + 1 == w) eps = std::exp(da.log_eps_bar);
      continue;
    }
    const int row = it - w;
    accept_sum += tr.accept_prob;
    out.divergences += tr.divergent;
    target.outputs(std::span<const double>(z.q.data(), z.q.size()), buf);
    for (std::size_t j = 0; j < n_out; ++j) out.draws(row, static_cast<Eigen::Index>(j)) = buf[j];
    if (cfg.store_raw) out.raw.row(row) = z.q.transpose();
  }
  out.step_size = eps;
  out.mean_accept = kept > 0 ? accept_sum / kept : 0.0;
  out.inv_metric = inv_metric;
  return out;
}

// Blom-style rank normal scores over the pooled draws, average ranks for ties.
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i) pooled.emplace_back(chains[c][i], pooled.size());
  }
  std::sort(pooled.begin(), pooled.end());
  const double s = static_cast<double>(pooled.size());
  std::vector<double> z(pooled.size());
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j + 1 < pooled.size() && pooled[j + 1].first == pooled[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double p = (rank - 0.375) / (s + 0.25);
    const double score = std::sqrt(2.0) * boost::math::erf_inv(2.0 * p - 1.0);
    for (std::size_t k = i; k <= j; ++k) z[pooled[k].second] = score;
    i = j + 1;
  }
  std::vector<std::vector<double>> out(chains.size());
  std::size_t k = 0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    out[c].assign(z.begin() + static_cast<std::ptrdiff_t>(k),
                  z.begin() + static_cast<std::ptrdiff_t>(k + chains[c].size()));
    k += chains[c].size();
  }
  return out;
}

std::vector<std::vector<double>> split_chains(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double basic_rhat(const std::vector<std::vector<double>>& chains) {
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    vars.push_back(var_of(c));
  }
  const double W = mean_of(vars);
  const double B = n * var_of(means);
  if (!(W > 0.0)) return B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return std::sqrt(((n - 1.0) / n * W + B / n) / W);
}

void check_chains(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ValidationError("diagnostics need at least two chains");
  const auto n = chains.front().size();
  if (n < 4) throw ValidationError("diagnostics need at least four draws per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw ValidationError("chains must have equal length");
  }
}

}  // namespace

std::vector<std::string> TargetDensity::output_names() const {
  std::vector<std::string> names(dimension());
  for (std::size_t i = 0; i < names.size(); ++i) names[i] = "x[" + std::to_string(i + 1) + "]";
  return names;
}

void TargetDensity::outputs(std::span<const double> x, std::span<double> out) const {
  std::copy(x.begin(), x.end(), out.begin());
}

void SamplerConfig::validate() const {
  std::ostringstream msg;
  if (chains < 1) msg << "chains must be >= 1; ";
  if (warmup < 0 || iterations <= warmup) msg << "need 0 <= warmup < iterations; ";
  if (!(target_accept > 0.0 && target_accept < 1.0)) msg << "target_accept must lie in (0, 1); ";
  if (!(integration_time > 0.0)) msg << "integration_time must be positive; ";
  if (max_leapfrog < 1) msg << "max_leapfrog must be >= 1; ";
  if (!(init_radius > 0.0)) msg << "init_radius must be positive; ";
  if (max_init_attempts < 1) msg << "max_init_attempts must be >= 1; ";
  if (threads < 0) msg << "threads must be >= 0; ";
  if (!msg.str().empty()) throw ValidationError("sampler config: " + msg.str());
}

bool leapfrog(const TargetDensity& target, PhasePoint& z, const Eigen::VectorXd& inv_metric,
              double step_size, int steps) {
  z.p += 0.5 * step_size * z.grad;
  for (int s = 0; s < steps; ++s) {
    z.q.array() += step_size * inv_metric.array() * z.p.array();
    z.log_density = evaluate(target, z.q, z.grad);
    if (!std::isfinite(z.log_density)) return false;
    z.p += (s + 1 == steps ? 0.5 : 1.0) * step_size * z.grad;
  }
  return true;
}

Eigen::VectorXd initial_point(const TargetDensity& target, std::mt19937_64& rng, double radius,
                              int max_attempts) {
  const auto dim = static_cast<Eigen::Index>(target.dimension());
  std::uniform_real_distribution<double> u(-radius, radius);
  Eigen::VectorXd q(dim), grad(dim);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    for (Eigen::Index i = 0; i < dim; ++i) q[i] = u(rng);
    if (std::isfinite(evaluate(target, q, grad))) return q;
  }
  std::ostringstream msg;
  msg << "no finite log density after " << max_attempts << " initialisation attempts in [-"
      << radius << ", " << radius << "]^" << dim;
  throw InitializationError(msg.str());
}

PosteriorDraws sample(const TargetDensity& target, const SamplerConfig& config) {
  config.validate();
  if (target.dimension() == 0) throw ValidationError("target has zero dimension");
  PosteriorDraws out;
  out.names = target.output_names();
  out.config = config;
  out.chains.resize(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> errors(out.chains.size());

  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(
      static_cast<unsigned>(config.chains), config.threads > 0 ? static_cast<unsigned>(config.threads) : hw);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (int c = next++; c < config.chains; c = next++) {
      try {
        out.chains[static_cast<std::size_t>(c)] = run_chain(target, config, c);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::size_t PosteriorDraws::draws_per_chain() const {
  return chains.empty() ? 0 : static_cast<std::size_t>(chains.front().draws.rows());
}

std::size_t PosteriorDraws::total_draws() const { return draws_per_chain() * chains.size(); }

int PosteriorDraws::total_divergences() const {
  int d = 0;
  for (const auto& c : chains) d += c.divergences;
  return d;
}

std::size_t PosteriorDraws::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError("no output named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<std::vector<double>> PosteriorDraws::by_chain(std::size_t column) const {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const auto col = c.draws.col(static_cast<Eigen::Index>(column));
    out.emplace_back(col.data(), col.data() + col.size());
  }
  return out;
}

std::vector<double> PosteriorDraws::pooled(std::size_t column) const {
  std::vector<double> out;
  for (const auto& c : chains) {
    const auto col = c.draws.col(static_cast<Eigen::Index>(column));
    out.insert(out.end(), col.data(), col.data() + col.size());
  }
  return out;
}

Eigen::MatrixXd PosteriorDraws::stacked() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(total_draws()), static_cast<Eigen::Index>(names.size()));
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.draws.rows()) = c.draws;
    r += c.draws.rows();
  }
  return out;
}

Eigen::MatrixXd PosteriorDraws::stacked_raw() const {
  if (chains.empty() || chains.front().raw.size() == 0) {
    throw ValidationError("raw draws were not stored; set store_raw");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(total_draws()), chains.front().raw.cols());
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.raw.rows()) = c.raw;
    r += c.raw.rows();
  }
  return out;
}

std::vector<ParamSummary> PosteriorDraws::summarize() const {
  std::vector<ParamSummary> out;
  const bool diag = chains.size() >= 2 && draws_per_chain() >= 4;
  for (std::size_t j = 0; j < names.size(); ++j) {
    ParamSummary s;
    s.name = names[j];
    auto all = pooled(j);
    s.mean = mean_of(all);
    s.sd = all.size() > 1 ? std::sqrt(var_of(all)) : 0.0;
    s.q025 = quantile(all, 0.025);
    s.q50 = quantile(all, 0.5);
    s.q975 = quantile(all, 0.975);
    if (diag) {
      auto bc = by_chain(j);
      s.ess_bulk = ess_bulk(bc);
      s.rhat = split_rhat(bc);
    } else {
      s.ess_bulk = std::numeric_limits<double>::quiet_NaN();
      s.rhat = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(s));
  }
  return out;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  check_chains(chains);
  const auto split = split_chains(chains);
  const double bulk = basic_rhat(rank_normalize(split));
  std::vector<double> all;
  for (const auto& c : split) all.insert(all.end(), c.begin(), c.end());
  const double med = quantile(all, 0.5);
  auto folded = split;
  for (auto& c : folded)
    for (auto& x : c) x = std::abs(x - med);
  const double tail = basic_rhat(rank_normalize(folded));
  return std::max(bulk, tail);
}

double ess_bulk(const std::vector<std::vector<double>>& chains) {
  check_chains(chains);
  const auto z = rank_normalize(split_chains(chains));
  const std::size_t m = z.size();
  const std::size_t n = z.front().size();
  const double nd = static_cast<double>(n);
  std::vector<double> means(m), acov0(m);
  std::vector<std::vector<double>> centred(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(z[c]);
    centred[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) centred[c][i] = z[c][i] - means[c];
  }
  auto mean_acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double a = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) a += centred[c][i] * centred[c][i + lag];
      s += a / nd;
    }
    return s / static_cast<double>(m);
  };
  const double w = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = w * (nd - 1.0) / nd;
  if (m > 1) var_plus += var_of(means);
  if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  auto rho = [&](std::size_t lag) { return 1.0 - (w - mean_acov(lag)) / var_plus; };

  // Geyer: sum positive pair sums, enforcing monotone decrease.
  double tau = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    double pair = (lag == 0 ? 1.0 : rho(lag)) + rho(lag + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += pair;
  }
  tau = -1.0 + 2.0 * tau;
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n)));
  return static_cast<double>(m * n) / tau;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw ValidationError("quantile probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace splinegp::hmc
