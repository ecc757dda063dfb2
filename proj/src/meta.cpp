#include "splinegp/meta.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "splinegp/errors.hpp"

namespace splinegp::meta {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;
constexpr double kFixedSd = 0.5;
constexpr std::size_t kFixedCount = 10;  // chi_base, psi_base, vacc, cross terms
const char* const kClassLabel[kClasses] = {"18-64", "65+"};

double normal_fixed(double x) {
  return -0.5 * x * x / (kFixedSd * kFixedSd) - std::log(kFixedSd) - kHalfLogTwoPi;
}

struct HalfCauchyLog {
  double value;
  double d_log;
};

HalfCauchyLog half_cauchy_on_log(double x) {
  return {std::log(2.0 / std::numbers::pi) - std::log1p(x * x) + std::log(x),
          1.0 - 2.0 * x * x / (1.0 + x * x)};
}

int other(int c) { return 1 - c; }

}  // namespace

GammaConvention parse_gamma_convention(const std::string& text) {
  if (text == "shape-rate") return GammaConvention::ShapeRate;
  if (text == "shape-scale") return GammaConvention::ShapeScale;
  throw ValidationError("unknown gamma convention '" + text + "'; expected shape-rate or shape-scale");
}

std::string gamma_convention_name(GammaConvention c) {
  return c == GammaConvention::ShapeRate ? "shape-rate" : "shape-scale";
}

Eigen::MatrixXd aggregate_to_classes(const Eigen::MatrixXd& by_age) {
  if (by_age.rows() < 66) throw ValidationError("age classes need ages up to at least 65");
  Eigen::MatrixXd out(kClasses, by_age.cols());
  out.row(0) = by_age.middleRows(18, 47).colwise().sum();
  out.row(1) = by_age.bottomRows(by_age.rows() - 65).colwise().sum();
  return out;
}

RelativeDeaths relative_deaths(const std::string& state, const Eigen::MatrixXd& mean_by_class,
                               int start_week) {
  if (mean_by_class.rows() != kClasses) throw ValidationError("relative deaths need one row per age class");
  const auto weeks = static_cast<int>(mean_by_class.cols());
  if (start_week < 2 || start_week > weeks) {
    throw ValidationError("resurgence start must leave at least one earlier week and lie inside the series");
  }
  RelativeDeaths out;
  out.state = state;
  out.start_week = start_week;
  for (int c = 0; c < kClasses; ++c) {
    const double mx = mean_by_class.row(c).head(start_week - 1).maxCoeff();
    if (!(mx > 0.0)) {
      throw ValidationError("state " + state + ", class " + kClassLabel[c] +
                            ": pre-resurgence maximum is zero");
    }
    out.max_pre[static_cast<std::size_t>(c)] = mx;
    for (int w = start_week; w <= weeks; ++w) out.r[static_cast<std::size_t>(c)].push_back(mean_by_class(c, w - 1) / mx);
  }
  return out;
}

MetaModel::MetaModel(std::vector<StateData> states, GammaConvention convention)
    : states_(std::move(states)), convention_(convention) {
  if (states_.empty()) throw ValidationError("meta-regression needs at least one state");
  for (const auto& s : states_) {
    for (int c = 0; c < kClasses; ++c) {
      const double v = s.vacc_pre[static_cast<std::size_t>(c)];
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("state " + s.deaths.state + ": vaccination rate outside [0, 1]");
      if (s.deaths.r[static_cast<std::size_t>(c)].empty()) {
        throw ValidationError("state " + s.deaths.state + ": no resurgence weeks");
      }
      for (double r : s.deaths.r[static_cast<std::size_t>(c)]) {
        if (!(r > 0.0) || !std::isfinite(r)) {
          throw ValidationError("state " + s.deaths.state + ": relative deaths must be positive");
        }
      }
    }
  }
}

std::size_t MetaModel::dimension() const { return kFixedCount + kClasses + 3 * states_.size(); }

MetaParams MetaModel::unpack(std::span<const double> raw) const {
  if (raw.size() != dimension()) throw ValidationError("meta-regression parameter count mismatch");
  MetaParams p;
  p.chi_base = {raw[0], raw[1]};
  p.psi_base = {raw[2], raw[3]};
  p.chi_vacc = raw[4];
  p.psi_vacc = raw[5];
  p.chi_cross = {raw[6], raw[7]};
  p.psi_cross = {raw[8], raw[9]};
  p.sigma_chi = {std::exp(raw[10]), std::exp(raw[11])};
  const std::size_t m = states_.size();
  p.chi_state.resize(m);
  p.kappa.resize(m);
  for (std::size_t s = 0; s < m; ++s) {
    for (int c = 0; c < kClasses; ++c) {
      p.chi_state[s][static_cast<std::size_t>(c)] = p.sigma_chi[static_cast<std::size_t>(c)] * raw[12 + 2 * s + static_cast<std::size_t>(c)];
    }
    p.kappa[s] = std::exp(raw[12 + 2 * m + s]);
  }
  return p;
}

std::vector<double> MetaModel::pack(const MetaParams& p) const {
  const std::size_t m = states_.size();
  if (p.chi_state.size() != m || p.kappa.size() != m) throw ValidationError("meta parameters do not match the state count");
  std::vector<double> raw{p.chi_base[0], p.chi_base[1], p.psi_base[0], p.psi_base[1], p.chi_vacc,
                          p.psi_vacc, p.chi_cross[0], p.chi_cross[1], p.psi_cross[0], p.psi_cross[1],
                          std::log(p.sigma_chi[0]), std::log(p.sigma_chi[1])};
  for (std::size_t s = 0; s < m; ++s) {
    for (int c = 0; c < kClasses; ++c) raw.push_back(p.chi_state[s][static_cast<std::size_t>(c)] / p.sigma_chi[static_cast<std::size_t>(c)]);
  }
  for (std::size_t s = 0; s < m; ++s) raw.push_back(std::log(p.kappa[s]));
  return raw;
}

double MetaModel::log_shape(const MetaParams& p, std::size_t m, int c, int k,
                            const std::array<double, kClasses>& vacc) const {
  const auto cu = static_cast<std::size_t>(c);
  const auto ou = static_cast<std::size_t>(other(c));
  const double chi = p.chi_base[cu] + p.chi_state[m][cu] + p.chi_vacc * vacc[cu] + p.chi_cross[cu] * vacc[ou];
  const double psi = p.psi_base[cu] + p.psi_vacc * vacc[cu] + p.psi_cross[cu] * vacc[ou];
  return chi + psi * k;
}

double MetaModel::expected_relative(double xi, double kappa) const {
  return convention_ == GammaConvention::ShapeRate ? xi / (kappa * kappa) : xi * kappa * kappa;
}

double MetaModel::log_likelihood(const MetaParams& p) const {
  double ll = 0.0;
  for (std::size_t m = 0; m < states_.size(); ++m) {
    const double k2 = p.kappa[m] * p.kappa[m];
    const double rate = convention_ == GammaConvention::ShapeRate ? k2 : 1.0 / k2;
    for (int c = 0; c < kClasses; ++c) {
      const auto& r = states_[m].deaths.r[static_cast<std::size_t>(c)];
      for (std::size_t k = 0; k < r.size(); ++k) {
        const double xi = std::exp(log_shape(p, m, c, static_cast<int>(k), states_[m].vacc_pre));
        ll += xi * std::log(rate) - std::lgamma(xi) + (xi - 1.0) * std::log(r[k]) - rate * r[k];
      }
    }
  }
  return ll;
}

double MetaModel::log_density_gradient(std::span<const double> x, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const MetaParams p = unpack(x);
  const std::size_t M = states_.size();
  double lp = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    const double k2 = p.kappa[m] * p.kappa[m];
    const double rate = convention_ == GammaConvention::ShapeRate ? k2 : 1.0 / k2;
    const double log_rate = std::log(rate);
    const double d_rate_d_logkappa = convention_ == GammaConvention::ShapeRate ? 2.0 * rate : -2.0 * rate;
    const auto& v = states_[m].vacc_pre;
    double g_rate = 0.0;
    for (int c = 0; c < kClasses; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      const auto ou = static_cast<std::size_t>(other(c));
      const auto& r = states_[m].deaths.r[cu];
      double g_chi = 0.0, g_psi = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) {
        const double xi = std::exp(log_shape(p, m, c, static_cast<int>(k), v));
        // Subnormal shapes overflow the digamma.
        if (!std::isfinite(xi) || xi < std::numeric_limits<double>::min()) {
          throw NumericalError("Gamma shape left (0, inf)");
        }
        const double log_r = std::log(r[k]);
        lp += xi * log_rate - std::lgamma(xi) + (xi - 1.0) * log_r - rate * r[k];
        const double g_eta = xi * (log_rate - boost::math::digamma(xi) + log_r);
        g_chi += g_eta;
        g_psi += g_eta * static_cast<double>(k);
        g_rate += xi / rate - r[k];
      }
      const double z = x[12 + 2 * m + cu];
      grad[cu] += g_chi;
      grad[4] += g_chi * v[cu];
      grad[6 + cu] += g_chi * v[ou];
      grad[10 + cu] += g_chi * z * p.sigma_chi[cu];
      grad[12 + 2 * m + cu] += g_chi * p.sigma_chi[cu] - z;
      lp += -0.5 * z * z - kHalfLogTwoPi;
      grad[2 + cu] += g_psi;
      grad[5] += g_psi * v[cu];
      grad[8 + cu] += g_psi * v[ou];
    }
    const auto hk = half_cauchy_on_log(p.kappa[m]);
    lp += hk.value;
    grad[12 + 2 * M + m] += g_rate * d_rate_d_logkappa + hk.d_log;
  }
  for (std::size_t i = 0; i < kFixedCount; ++i) {
    lp += normal_fixed(x[i]);
    grad[i] += -x[i] / (kFixedSd * kFixedSd);
  }
  for (int c = 0; c < kClasses; ++c) {
    const auto hs = half_cauchy_on_log(p.sigma_chi[static_cast<std::size_t>(c)]);
    lp += hs.value;
    grad[10 + static_cast<std::size_t>(c)] += hs.d_log;
  }
  return lp;
}

std::vector<std::string> MetaModel::output_names() const {
  std::vector<std::string> n;
  for (const char* stem : {"chi_base", "psi_base"}) {
    for (auto* c : kClassLabel) n.push_back(std::string(stem) + "[" + c + "]");
  }
  n.push_back("chi_vacc");
  n.push_back("psi_vacc");
  for (const char* stem : {"chi_vacc_cross", "psi_vacc_cross", "sigma_chi"}) {
    for (auto* c : kClassLabel) n.push_back(std::string(stem) + "[" + c + "]");
  }
  for (const auto& s : states_) {
    for (auto* c : kClassLabel) n.push_back("chi_state[" + s.deaths.state + "," + c + "]");
  }
  for (const auto& s : states_) n.push_back("kappa[" + s.deaths.state + "]");
  return n;
}

void MetaModel::outputs(std::span<const double> x, std::span<double> out) const {
  const MetaParams p = unpack(x);
  std::size_t i = 0;
  for (double v : {p.chi_base[0], p.chi_base[1], p.psi_base[0], p.psi_base[1], p.chi_vacc, p.psi_vacc,
                   p.chi_cross[0], p.chi_cross[1], p.psi_cross[0], p.psi_cross[1], p.sigma_chi[0],
                   p.sigma_chi[1]}) {
    out[i++] = v;
  }
  for (const auto& cs : p.chi_state) {
    out[i++] = cs[0];
    out[i++] = cs[1];
  }
  for (double k : p.kappa) out[i++] = k;
}

double meta_loglik(const MetaModel& model, std::span<const double> raw, std::span<double> grad) {
  return model.log_density_gradient(raw, grad);
}

std::vector<CounterfactualSummary> counterfactual_project(const MetaModel& model,
                                                          const Eigen::MatrixXd& raw_draws,
                                                          double scenario_rate) {
  if (!(scenario_rate >= 0.0 && scenario_rate <= 1.0)) {
    throw ValidationError("scenario vaccination rate must lie in [0, 1]");
  }
  if (raw_draws.rows() == 0 || raw_draws.cols() != static_cast<Eigen::Index>(model.dimension())) {
    throw ValidationError("counterfactual needs raw meta-regression draws");
  }
  const auto& states = model.states();
  const std::size_t M = states.size();
  const auto D = static_cast<std::size_t>(raw_draws.rows());
  std::vector<std::vector<double>> avoided(M * kClasses, std::vector<double>(D));
  std::vector<std::vector<double>> pct(M * kClasses, std::vector<double>(D));
  for (std::size_t d = 0; d < D; ++d) {
    const Eigen::VectorXd x = raw_draws.row(static_cast<Eigen::Index>(d)).transpose();
    const MetaParams p = model.unpack(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    for (std::size_t m = 0; m < M; ++m) {
      auto scenario = states[m].vacc_pre;
      scenario[0] = scenario_rate;
      for (int c = 0; c < kClasses; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        double observed = 0.0, counterfactual = 0.0;
        for (std::size_t k = 0; k < states[m].deaths.r[cu].size(); ++k) {
          const int ki = static_cast<int>(k);
          observed += model.expected_relative(std::exp(model.log_shape(p, m, c, ki, states[m].vacc_pre)), p.kappa[m]);
          counterfactual += model.expected_relative(std::exp(model.log_shape(p, m, c, ki, scenario)), p.kappa[m]);
        }
        observed *= states[m].deaths.max_pre[cu];
        counterfactual *= states[m].deaths.max_pre[cu];
        avoided[m * kClasses + cu][d] = observed - counterfactual;
        pct[m * kClasses + cu][d] = 100.0 * (observed - counterfactual) / observed;
      }
    }
  }
  std::vector<CounterfactualSummary> out;
  for (std::size_t m = 0; m < M; ++m) {
    for (int c = 0; c < kClasses; ++c) {
      const auto& a = avoided[m * kClasses + static_cast<std::size_t>(c)];
      const auto& q = pct[m * kClasses + static_cast<std::size_t>(c)];
      CounterfactualSummary s;
      s.state = states[m].deaths.state;
      s.age_class = c;
      s.avoided_median = hmc::quantile(a, 0.5);
      s.avoided_lo95 = hmc::quantile(a, 0.025);
      s.avoided_hi95 = hmc::quantile(a, 0.975);
      s.pct_median = hmc::quantile(q, 0.5);
      s.pct_lo95 = hmc::quantile(q, 0.025);
      s.pct_hi95 = hmc::quantile(q, 0.975);
      out.push_back(s);
    }
  }
  return out;
}

std::vector<StateData> simulate_meta_data(const MetaSimulation& sim, GammaConvention convention) {
  if (sim.states < 1 || sim.weeks < 1 || !(sim.kappa > 0.0) || !(sim.sigma_chi >= 0.0)) {
    throw ValidationError("invalid meta simulation settings");
  }
  std::mt19937_64 rng(sim.seed);
  std::uniform_real_distribution<double> vacc(0.2, 0.8);
  std::normal_distribution<double> z;
  std::vector<StateData> out;
  for (int m = 0; m < sim.states; ++m) {
    StateData s;
    std::ostringstream name;
    name << "S" << (m + 1 < 10 ? "0" : "") << m + 1;
    s.deaths.state = name.str();
    s.deaths.start_week = 2;
    s.deaths.max_pre = {50.0, 20.0};
    s.vacc_pre = {vacc(rng), vacc(rng)};
    const double k2 = sim.kappa * sim.kappa;
    const double scale = convention == GammaConvention::ShapeRate ? 1.0 / k2 : k2;
    for (int c = 0; c < kClasses; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      const auto ou = static_cast<std::size_t>(other(c));
      const double chi = sim.chi_base + sim.sigma_chi * z(rng) + sim.chi_vacc * s.vacc_pre[cu] +
                         sim.chi_cross * s.vacc_pre[ou];
      const double psi = sim.psi_base + sim.psi_vacc * s.vacc_pre[cu] + sim.psi_cross * s.vacc_pre[ou];
      for (int k = 0; k < sim.weeks; ++k) {
        std::gamma_distribution<double> g(std::exp(chi + psi * k), scale);
        s.deaths.r[cu].push_back(std::max(g(rng), 1e-300));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace splinegp::meta
