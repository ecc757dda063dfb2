#include "splinegp/mortality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "splinegp/errors.hpp"
#include "splinegp/likelihoods.hpp"

namespace splinegp::mortality {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

// Softmax underflow or overflow along a trajectory surfaces here, not as bad input.
void check_shape(double alpha) {
  if (!(alpha >= std::numeric_limits<double>::min()) || !std::isfinite(alpha)) throw NumericalError("band shape left (0, inf)");
}

std::vector<double> unit_axis(int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
  return out;
}

void validate_partition(const data::CensoredSeries& s, int weeks) {
  if (s.weeks != weeks) {
    std::ostringstream msg;
    msg << "band '" << s.band << "' spans " << s.weeks << " weeks, model has " << weeks;
    throw ValidationError(msg.str());
  }
  std::vector<int> seen(static_cast<std::size_t>(weeks) + 1, 0);
  auto mark = [&](int w) {
    if (w < 1 || w > weeks || seen[static_cast<std::size_t>(w)]++) {
      throw ValidationError("band '" + s.band + "': week " + std::to_string(w) +
                            " is outside 1..W or belongs to two week sets");
    }
  };
  for (auto [w, d] : s.retrievable) {
    mark(w);
    if (d < 0) throw ValidationError("band '" + s.band + "': negative weekly deaths");
  }
  if (s.block) {
    if (s.block->weeks.empty()) throw ValidationError("band '" + s.band + "': empty censored block");
    s.block->bound.validate();
    for (int w : s.block->weeks) mark(w);
  }
  for (int w : s.missing_weeks) mark(w);
  for (int w = 1; w <= weeks; ++w) {
    if (!seen[static_cast<std::size_t>(w)]) {
      throw ValidationError("band '" + s.band + "': week " + std::to_string(w) + " is unaccounted for");
    }
  }
}

}  // namespace

AgeBand parse_band(const std::string& label, int max_age) {
  AgeBand b;
  b.label = label;
  try {
    std::size_t pos = 0;
    if (!label.empty() && label.back() == '+') {
      b.first = std::stoi(label.substr(0, label.size() - 1), &pos);
      if (pos != label.size() - 1) throw std::invalid_argument(label);
      b.last = max_age;
    } else if (auto dash = label.find('-'); dash != std::string::npos) {
      b.first = std::stoi(label.substr(0, dash), &pos);
      if (pos != dash) throw std::invalid_argument(label);
      b.last = std::stoi(label.substr(dash + 1), &pos);
      if (pos != label.size() - dash - 1) throw std::invalid_argument(label);
    } else {
      b.first = b.last = std::stoi(label, &pos);
      if (pos != label.size()) throw std::invalid_argument(label);
    }
  } catch (const std::logic_error&) {
    throw DataError("unrecognised age band '" + label + "'");
  }
  if (b.first < 0 || b.last < b.first || b.last > max_age) {
    throw DataError("age band '" + label + "' falls outside 0.." + std::to_string(max_age));
  }
  return b;
}

AgeGrid::AgeGrid(std::vector<AgeBand> bands, int weeks, int max_age)
    : bands_(std::move(bands)), band_of_(static_cast<std::size_t>(max_age) + 1, -1), weeks_(weeks),
      max_age_(max_age) {
  if (weeks < 1) throw ValidationError("age grid needs at least one week");
  if (max_age < 0) throw ValidationError("max age must be non-negative");
  int next = 0;
  for (std::size_t b = 0; b < bands_.size(); ++b) {
    if (bands_[b].first != next || bands_[b].last < bands_[b].first) {
      throw ValidationError("age bands must partition 0.." + std::to_string(max_age) +
                            " in order; band '" + bands_[b].label + "' breaks this");
    }
    for (int a = bands_[b].first; a <= bands_[b].last; ++a) band_of_[static_cast<std::size_t>(a)] = static_cast<int>(b);
    next = bands_[b].last + 1;
  }
  if (next != max_age + 1) throw ValidationError("age bands do not reach the maximum age");
}

AgeGrid AgeGrid::standard(int weeks) {
  return from_labels({"0", "1-4", "5-14", "15-24", "25-34", "35-44", "45-54", "55-64", "65-74",
                      "75-84", "85+"},
                     weeks);
}

AgeGrid AgeGrid::from_labels(const std::vector<std::string>& labels, int weeks, int max_age) {
  std::vector<AgeBand> bands;
  for (const auto& l : labels) bands.push_back(parse_band(l, max_age));
  std::sort(bands.begin(), bands.end(), [](const AgeBand& a, const AgeBand& b) { return a.first < b.first; });
  return AgeGrid(std::move(bands), weeks, max_age);
}

Eigen::MatrixXd composition_from_surface(const Eigen::MatrixXd& f) {
  if (!f.allFinite()) throw NumericalError("surface has non-finite entries");
  Eigen::MatrixXd pi(f.rows(), f.cols());
  for (Eigen::Index w = 0; w < f.cols(); ++w) {
    const double m = f.col(w).maxCoeff();
    pi.col(w) = (f.col(w).array() - m).exp();
    pi.col(w) /= pi.col(w).sum();
  }
  return pi;
}

Eigen::MatrixXd expected_band_deaths(std::span<const double> lambda, const Eigen::MatrixXd& pi,
                                     const AgeGrid& grid) {
  if (pi.rows() != grid.ages() || pi.cols() != grid.weeks() ||
      static_cast<int>(lambda.size()) != grid.weeks()) {
    throw ValidationError("expected deaths: lambda, composition and grid shapes disagree");
  }
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(grid.band_count(), grid.weeks());
  for (int w = 0; w < grid.weeks(); ++w) {
    if (!(lambda[static_cast<std::size_t>(w)] >= 0.0)) throw ValidationError("weekly totals must be non-negative");
    for (int a = 0; a < grid.ages(); ++a) mu(grid.band_of(a), w) += pi(a, w);
    mu.col(w) *= lambda[static_cast<std::size_t>(w)];
  }
  return mu;
}

priors::SurfacePrior make_surface_prior(priors::PriorKind kind, const AgeGrid& grid,
                                        std::size_t knots_age, std::size_t knots_week,
                                        priors::HyperPriors hyper) {
  if (knots_age < 2 || knots_week < 2) throw ValidationError("need at least two knots per axis");
  const auto ages = unit_axis(grid.ages());
  const auto weeks = unit_axis(grid.weeks());
  return priors::SurfacePrior::make(kind, ages, weeks, knots_age, knots_week, hyper);
}

TotalsPrior TotalsPrior::from_series(std::span<const data::CensoredSeries> series, int weeks,
                                     double sd_factor, double floor) {
  if (!(sd_factor > 0.0) || !(floor > 0.0)) throw ValidationError("totals prior constants must be positive");
  TotalsPrior p;
  const auto totals = data::retrievable_totals(series, weeks);
  p.eta = data::estimate_eta(totals);
  if (!(p.eta > 0.0)) throw ValidationError("eta must be positive");
  p.sd_factor = sd_factor;
  p.floor = floor;
  p.mean.resize(totals.size());
  for (std::size_t w = 0; w < totals.size(); ++w) p.mean[w] = std::max(totals[w], floor);
  return p;
}

MortalityModel::MortalityModel(AgeGrid grid, std::vector<data::CensoredSeries> series,
                               priors::SurfacePrior prior, TotalsPrior totals)
    : grid_(std::move(grid)), series_(std::move(series)), prior_(std::move(prior)),
      totals_(std::move(totals)) {
  if (static_cast<int>(series_.size()) != grid_.band_count()) {
    throw ValidationError("one censored series per age band is required");
  }
  for (std::size_t b = 0; b < series_.size(); ++b) {
    if (!series_[b].band.empty() && series_[b].band != grid_.bands()[b].label) {
      throw ValidationError("series '" + series_[b].band + "' does not match band '" +
                            grid_.bands()[b].label + "'");
    }
    validate_partition(series_[b], grid_.weeks());
  }
  if (prior_.on_points() || prior_.surface_rows() != grid_.ages() || prior_.surface_cols() != grid_.weeks()) {
    throw ValidationError("surface prior must produce an ages x weeks grid");
  }
  if (static_cast<int>(totals_.mean.size()) != grid_.weeks() || !(totals_.eta > 0.0)) {
    throw ValidationError("totals prior does not match the week count");
  }
  for (double t : totals_.mean) {
    if (!(t > 0.0)) throw ValidationError("totals prior means must be positive");
  }
}

std::size_t MortalityModel::dimension() const { return surface_offset() + prior_.raw_dimension(); }

MortalityModel::State MortalityModel::transform(std::span<const double> raw) const {
  if (raw.size() != dimension()) throw ValidationError("mortality model parameter count mismatch");
  State s;
  const int W = grid_.weeks();
  s.lambda.resize(static_cast<std::size_t>(W));
  for (int w = 0; w < W; ++w) {
    s.lambda[static_cast<std::size_t>(w)] = totals_.mean[static_cast<std::size_t>(w)] * std::exp(raw[static_cast<std::size_t>(w)]);
  }
  s.nu = std::exp(-2.0 * raw[static_cast<std::size_t>(W)]);
  if (!(s.nu > 0.0) || !(s.nu / (1.0 + s.nu) < 1.0)) throw NumericalError("overdispersion left (0, inf)");
  s.surface = prior_.evaluate(raw.subspan(surface_offset()));
  s.pi = composition_from_surface(s.surface.surface);
  s.mu_band = expected_band_deaths(s.lambda, s.pi, grid_);
  return s;
}

double MortalityModel::log_likelihood(const State& s) const {
  const double theta = s.nu / (1.0 + s.nu);
  double ll = 0.0;
  for (std::size_t b = 0; b < series_.size(); ++b) {
    const auto& sr = series_[b];
    for (auto [w, d] : sr.retrievable) {
      ll += likelihoods::negbin_logpmf(d, s.mu_band(static_cast<Eigen::Index>(b), w - 1) / s.nu, theta);
    }
    if (sr.block) {
      double shape = 0.0;
      for (int w : sr.block->weeks) shape += s.mu_band(static_cast<Eigen::Index>(b), w - 1) / s.nu;
      ll += likelihoods::censored_block_loglik(sr.block->bound, shape, theta);
    }
  }
  return ll;
}

double MortalityModel::log_density_gradient(std::span<const double> x, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const State s = transform(x);
  const int W = grid_.weeks();
  const int B = grid_.band_count();
  const double nu = s.nu;
  const double theta = nu / (1.0 + nu);
  const double dtheta_dnu = 1.0 / ((1.0 + nu) * (1.0 + nu));

  // Observation terms: accumulate dL/dmu_{b,w} and dL/dnu.
  Eigen::MatrixXd g_mu = Eigen::MatrixXd::Zero(B, W);
  double g_nu = 0.0;
  double lp = 0.0;
  for (int b = 0; b < B; ++b) {
    const auto& sr = series_[static_cast<std::size_t>(b)];
    for (auto [w, d] : sr.retrievable) {
      const double alpha = s.mu_band(b, w - 1) / nu;
      check_shape(alpha);
      const auto t = likelihoods::negbin_logpmf_grad(d, alpha, theta);
      lp += t.value;
      g_mu(b, w - 1) += t.d_first / nu;
      g_nu += -t.d_first * alpha / nu + t.d_second * dtheta_dnu;
    }
    if (sr.block) {
      double alpha = 0.0;
      for (int w : sr.block->weeks) alpha += s.mu_band(b, w - 1) / nu;
      check_shape(alpha);
      const auto t = likelihoods::censored_block_loglik_grad(sr.block->bound, alpha, theta);
      lp += t.value;
      for (int w : sr.block->weeks) g_mu(b, w - 1) += t.d_first / nu;
      g_nu += -t.d_first * alpha / nu + t.d_second * dtheta_dnu;
    }
  }

  // Back through mu_{b,w} = lambda_w * Pi_{b,w} and the column softmax.
  Eigen::MatrixXd g_f(grid_.ages(), W);
  for (int w = 0; w < W; ++w) {
    const double lambda = s.lambda[static_cast<std::size_t>(w)];
    double g_lambda = 0.0;
    for (int b = 0; b < B; ++b) {
      if (lambda > 0.0) g_lambda += g_mu(b, w) * s.mu_band(b, w) / lambda;
    }
    const double centre = lambda * g_lambda;  // sum_a pi_a * lambda * g_mu(band(a))
    for (int a = 0; a < grid_.ages(); ++a) {
      g_f(a, w) = s.pi(a, w) * (lambda * g_mu(grid_.band_of(a), w) - centre);
    }
    // Gamma prior on lambda with mean T and sd k T / eta, sampled as log(lambda / T).
    const double T = totals_.mean[static_cast<std::size_t>(w)];
    const double sd = totals_.sd_factor * T / totals_.eta;
    const double shape = T * T / (sd * sd);
    const double rate = T / (sd * sd);
    lp += shape * std::log(rate) - std::lgamma(shape) + shape * std::log(lambda) - rate * lambda;
    grad[static_cast<std::size_t>(w)] = lambda * g_lambda + shape - rate * lambda;
  }

  // Half-normal on nu^{-1/2}, sampled on the log scale.
  const double v = x[static_cast<std::size_t>(W)];
  const double sd_inv = std::exp(v);
  lp += std::log(2.0) - kHalfLogTwoPi - 0.5 * sd_inv * sd_inv + v;
  grad[static_cast<std::size_t>(W)] = g_nu * (-2.0 * nu) + 1.0 - sd_inv * sd_inv;

  lp += s.surface.log_prior;
  prior_.backprop(s.surface, g_f, grad.subspan(surface_offset()));
  return lp;
}

std::vector<std::string> MortalityModel::output_names() const {
  std::vector<std::string> names;
  for (int w = 1; w <= grid_.weeks(); ++w) names.push_back("lambda[" + std::to_string(w) + "]");
  names.push_back("nu");
  for (const auto& h : prior_.hyper_spec()) names.push_back(h.name);
  return names;
}

void MortalityModel::outputs(std::span<const double> x, std::span<double> out) const {
  const int W = grid_.weeks();
  for (int w = 0; w < W; ++w) {
    out[static_cast<std::size_t>(w)] = totals_.mean[static_cast<std::size_t>(w)] * std::exp(x[static_cast<std::size_t>(w)]);
  }
  out[static_cast<std::size_t>(W)] = std::exp(-2.0 * x[static_cast<std::size_t>(W)]);
  const auto e = prior_.evaluate(x.subspan(surface_offset()));
  for (std::size_t h = 0; h < e.hypers.size(); ++h) out[static_cast<std::size_t>(W) + 1 + h] = e.hypers[h];
}

Eigen::MatrixXd MortalityModel::age_concentrations(std::span<const double> raw) const {
  const State s = transform(raw);
  Eigen::MatrixXd alpha = s.pi;
  for (int w = 0; w < grid_.weeks(); ++w) alpha.col(w) *= s.lambda[static_cast<std::size_t>(w)] / s.nu;
  return alpha;
}

std::vector<double> MortalityModel::to_raw(std::span<const double> lambda, double nu,
                                           std::span<const double> surface_raw) const {
  if (static_cast<int>(lambda.size()) != grid_.weeks() || surface_raw.size() != prior_.raw_dimension() ||
      !(nu > 0.0)) {
    throw ValidationError("to_raw: inconsistent constrained values");
  }
  std::vector<double> raw;
  for (std::size_t w = 0; w < lambda.size(); ++w) {
    if (!(lambda[w] > 0.0)) throw ValidationError("to_raw: weekly totals must be positive");
    raw.push_back(std::log(lambda[w] / totals_.mean[w]));
  }
  raw.push_back(-0.5 * std::log(nu));
  raw.insert(raw.end(), surface_raw.begin(), surface_raw.end());
  return raw;
}

std::vector<std::int64_t> sample_dirichlet_multinomial(std::int64_t total, std::span<const double> alpha,
                                                       std::mt19937_64& rng) {
  if (total < 0) throw ValidationError("Dirichlet-Multinomial total must be non-negative");
  if (alpha.empty()) throw ValidationError("Dirichlet-Multinomial needs at least one category");
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("concentrations must be positive and finite");
  }
  const std::size_t k = alpha.size();
  std::vector<std::int64_t> out(k, 0);
  if (k == 1) {
    out[0] = total;
    return out;
  }
  if (total == 0) return out;
  // log Gamma(a) variates as log Gamma(a + 1) + log(U) / a, safe for tiny a.
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> logg(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::gamma_distribution<double> g(alpha[i] + 1.0, 1.0);
    double u = unif(rng);
    while (u == 0.0) u = unif(rng);
    logg[i] = std::log(g(rng)) + std::log(u) / alpha[i];
  }
  const double m = *std::max_element(logg.begin(), logg.end());
  std::vector<double> p(k);
  for (std::size_t i = 0; i < k; ++i) p[i] = std::exp(logg[i] - m);
  std::vector<double> tail(k + 1, 0.0);
  for (std::size_t i = k; i-- > 0;) tail[i] = tail[i + 1] + p[i];
  std::int64_t remaining = total;
  for (std::size_t i = 0; i + 1 < k && remaining > 0; ++i) {
    const double q = std::clamp(p[i] / tail[i], 0.0, 1.0);
    std::binomial_distribution<std::int64_t> bin(remaining, q);
    out[i] = bin(rng);
    remaining -= out[i];
  }
  out[k - 1] += remaining;
  return out;
}

double dirichlet_multinomial_logpmf(std::span<const std::int64_t> counts, std::span<const double> alpha) {
  if (counts.size() != alpha.size() || counts.empty()) throw ValidationError("counts and concentrations differ in length");
  double n = 0.0, a_sum = 0.0, out = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0 || !(alpha[i] > 0.0)) throw ValidationError("invalid Dirichlet-Multinomial arguments");
    const double x = static_cast<double>(counts[i]);
    out += std::lgamma(x + alpha[i]) - std::lgamma(alpha[i]) - std::lgamma(x + 1.0);
    n += x;
    a_sum += alpha[i];
  }
  return out + std::lgamma(a_sum) + std::lgamma(n + 1.0) - std::lgamma(n + a_sum);
}

std::vector<Eigen::MatrixXi> predictive_rescale(const std::vector<Eigen::MatrixXd>& alpha_draws,
                                                std::span<const std::int64_t> calibration,
                                                std::uint64_t seed, int threads) {
  for (auto t : calibration) {
    if (t < 0) throw ValidationError("calibration totals must be non-negative");
  }
  for (const auto& a : alpha_draws) {
    if (a.cols() != static_cast<Eigen::Index>(calibration.size())) {
      throw ValidationError("concentration draws and calibration series differ in week count");
    }
  }
  std::vector<Eigen::MatrixXi> out(alpha_draws.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t d = begin; d < end; ++d) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(d)};
      std::mt19937_64 rng(seq);
      const auto& a = alpha_draws[d];
      Eigen::MatrixXi m(a.rows(), a.cols());
      for (Eigen::Index w = 0; w < a.cols(); ++w) {
        auto x = sample_dirichlet_multinomial(calibration[static_cast<std::size_t>(w)],
                                              std::span<const double>(a.col(w).data(), static_cast<std::size_t>(a.rows())),
                                              rng);
        for (Eigen::Index i = 0; i < a.rows(); ++i) m(i, w) = static_cast<int>(x[static_cast<std::size_t>(i)]);
      }
      out[d] = std::move(m);
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(threads > 0 ? static_cast<std::size_t>(threads) : hw,
                                                    std::max<std::size_t>(1, alpha_draws.size()));
  std::vector<std::thread> pool;
  const std::size_t chunk = (alpha_draws.size() + workers - 1) / workers;
  for (std::size_t t = 1; t < workers; ++t) {
    pool.emplace_back(run, std::min(t * chunk, alpha_draws.size()), std::min((t + 1) * chunk, alpha_draws.size()));
  }
  run(0, std::min(chunk, alpha_draws.size()));
  for (auto& t : pool) t.join();
  return out;
}

std::vector<Eigen::MatrixXd> concentration_draws(const MortalityModel& model,
                                                 const hmc::PosteriorDraws& draws, std::size_t count) {
  const Eigen::MatrixXd raw = draws.stacked_raw();
  const auto total = static_cast<std::size_t>(raw.rows());
  if (total == 0) throw ValidationError("no posterior draws");
  count = std::min(count, total);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto row = static_cast<Eigen::Index>(k * total / count);
    const Eigen::VectorXd x = raw.row(row).transpose();
    out.push_back(model.age_concentrations(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))));
  }
  return out;
}

Eigen::MatrixXd predictive_mean(const std::vector<Eigen::MatrixXi>& d_star) {
  if (d_star.empty()) throw ValidationError("no predictive draws");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d_star.front().rows(), d_star.front().cols());
  for (const auto& d : d_star) m += d.cast<double>();
  return m / static_cast<double>(d_star.size());
}

std::vector<double> mortality_rate(const std::vector<Eigen::MatrixXi>& d_star, std::span<const int> ages,
                                   std::span<const double> population) {
  if (ages.empty()) throw ValidationError("mortality rate needs a non-empty age set");
  std::set<int> unique(ages.begin(), ages.end());
  double pop = 0.0;
  for (int a : unique) {
    if (a < 0 || static_cast<std::size_t>(a) >= population.size()) throw ValidationError("age outside the population table");
    if (!(population[static_cast<std::size_t>(a)] > 0.0)) throw ValidationError("population counts must be positive");
    pop += population[static_cast<std::size_t>(a)];
  }
  std::vector<double> out;
  out.reserve(d_star.size());
  for (const auto& d : d_star) {
    double deaths = 0.0;
    for (int a : unique) {
      if (a >= d.rows()) throw ValidationError("age outside the predictive draws");
      deaths += d.row(a).cast<double>().sum();
    }
    out.push_back(deaths / pop);
  }
  return out;
}

}  // namespace splinegp::mortality
