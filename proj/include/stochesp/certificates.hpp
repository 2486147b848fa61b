#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochesp/inputs.hpp"
#include "stochesp/models.hpp"
#include "stochesp/rng.hpp"
#include "stochesp/seqspace.hpp"
#include "stochesp/util.hpp"

namespace stochesp {

enum class CertKind {
  contractivity,
  boundedness,
  theorem_condition,
  esn_spectral,
  counterexample
};

enum class CertMethod { analytic, monte_carlo };

inline const char* to_string(CertKind k) {
  switch (k) {
    case CertKind::contractivity: return "contractivity";
    case CertKind::boundedness: return "boundedness";
    case CertKind::theorem_condition: return "theorem_condition";
    case CertKind::esn_spectral: return "esn_spectral";
    case CertKind::counterexample: return "counterexample";
  }
  return "?";
}

inline const char* to_string(CertMethod m) {
  return m == CertMethod::analytic ? "analytic" : "monte_carlo";
}

/// Outcome of one verifiable-condition check. Monte Carlo certificates carry
/// the sample count and a standard error; analytic ones are deterministic.
struct Certificate {
  CertKind kind = CertKind::contractivity;
  double estimate = 0.0;
  bool pass = false;
  CertMethod method = CertMethod::analytic;
  long n_samples = 0;
  double std_error = 0.0;
  std::string notes;
};

/// Operator 2-norm of D A D^{-1} by power iteration on its Gram matrix,
/// run to 1e-10 relative tolerance on the leading eigenvalue.
inline double esn_scaled_norm(const Eigen::MatrixXd& A,
                              const Eigen::VectorXd& D_diag) {
  const auto n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("esn_scaled_norm: A not square");
  if (D_diag.size() != n)
    throw std::invalid_argument("esn_scaled_norm: D size mismatch");
  for (Eigen::Index i = 0; i < n; ++i)
    if (D_diag[i] == 0.0)
      throw std::invalid_argument("esn_scaled_norm: singular D");
  const Eigen::MatrixXd B =
      D_diag.asDiagonal() * A * D_diag.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd M = B.transpose() * B;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = counter_uniforms(0x9e3779b97f4a7c15ull, 0,
                            static_cast<std::uint32_t>(i), 0)[0] +
           0.5;
  v.normalize();
  double lambda = v.dot(M * v);
  for (int it = 0; it < 200000; ++it) {
    Eigen::VectorXd y = M * v;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    v = y / norm;
    const double next = v.dot(M * v);
    if (std::abs(next - lambda) <= 1e-10 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

inline double esn_scaled_norm(const Eigen::MatrixXd& A) {
  return esn_scaled_norm(A, Eigen::VectorXd::Ones(A.rows()));
}

/// The 2x2 family A(c) whose deterministic echo state property fails for
/// every c > 0, together with the closed-form infimum over diagonal
/// similarity transforms of ||D A D^{-1}||_2, attained at the diagonal
/// ratio d = c.
struct CounterexampleMatrix {
  Eigen::Matrix2d A;
  double inf_norm = 0.0;
  double d_opt = 0.0;
};

inline CounterexampleMatrix esn_counterexample_norm(double c) {
  if (!(c > 0.0))
    throw std::domain_error("esn_counterexample_norm: c must be > 0");
  CounterexampleMatrix r;
  r.A << 0.0, 1.0 / std::sqrt(c), -std::pow(c, 1.5), c + 1.0;
  const double tr = 2.0 * c + (c + 1.0) * (c + 1.0);
  const double lambda_max = 0.5 * (tr + std::sqrt(tr * tr - 4.0 * c * c));
  r.inf_norm = std::sqrt(lambda_max);
  r.d_opt = c;
  return r;
}

/// Lipschitz constant of tanh outside the ball of radius r (the derivative
/// bound at the boundary; tanh' is even and decreasing in |.|).
inline double tanh_lipschitz_outside(double r) {
  if (!(r > 0.0)) throw std::domain_error("tanh_lipschitz_outside: r must be > 0");
  const double t = std::tanh(r);
  return 1.0 - t * t;
}

/// Combines the inside/outside tanh Lipschitz constants into the averaged
/// rate sqrt((L'^2 + 2) / 3) used by the ESN contractivity argument.
inline double esn_tail_lipschitz(double l_prime) {
  if (!(l_prime > 0.0) || !(l_prime < 1.0))
    throw std::domain_error("esn_tail_lipschitz: L' must be in (0,1)");
  return std::sqrt((l_prime * l_prime + 2.0) / 3.0);
}

/// Admissible excess over 1 for the scaled operator norm of an ESN whose
/// inputs put mass delta outside every ball:
/// eps = (1 - (1 - L_r^p) delta)^{-1/p} - 1.
inline double esn_epsilon_bound(double L_r, double delta, double p) {
  if (!(L_r > 0.0) || !(L_r < 1.0))
    throw std::domain_error("esn_epsilon_bound: L_r must be in (0,1)");
  if (!(delta >= 0.0) || !(delta <= 1.0))
    throw std::domain_error("esn_epsilon_bound: delta must be in [0,1]");
  if (!(p >= 1.0)) throw std::domain_error("esn_epsilon_bound: p must be >= 1");
  return std::pow(1.0 - (1.0 - std::pow(L_r, p)) * delta, -1.0 / p) - 1.0;
}

/// Contraction-moment constant for the GARCH state map: kappa = E[(alpha
/// eta^2 + beta)^p]. Analytic shortcut for p = 1 with unit-variance
/// innovations; Monte Carlo otherwise. Innovations without a finite 2p-th
/// moment come back flagged.
inline Certificate garch_kappa(double alpha, double beta, double p,
                               const HiddenSampler& innovation,
                               long n_samples = 100000) {
  if (alpha < 0.0 || beta < 0.0)
    throw std::domain_error("garch_kappa: alpha, beta must be >= 0");
  Certificate c;
  c.kind = CertKind::contractivity;
  if (!innovation.finite_moment(2.0 * p)) {
    c.method = CertMethod::monte_carlo;
    c.estimate = std::numeric_limits<double>::quiet_NaN();
    c.pass = false;
    c.notes = "innovation lacks a finite moment of order 2p";
    return c;
  }
  const bool unit_variance = (innovation.dist == Dist::std_normal ||
                              innovation.dist == Dist::rademacher) &&
                             innovation.scale == 1.0;
  if (p == 1.0 && unit_variance) {
    c.method = CertMethod::analytic;
    c.estimate = alpha + beta;
    c.pass = c.estimate < 1.0;
    c.notes = "kappa = alpha + beta for unit-variance innovations";
    return c;
  }
  c.method = CertMethod::monte_carlo;
  c.n_samples = n_samples;
  std::vector<double> vals(static_cast<std::size_t>(n_samples));
  for (long s = 0; s < n_samples; ++s) {
    const double eta = innovation.sample(static_cast<std::uint64_t>(s), 0, 0);
    vals[static_cast<std::size_t>(s)] =
        std::pow(alpha * eta * eta + beta, p);
  }
  const double mean = pairwise_mean(vals);
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n_samples - 1);
  c.estimate = mean;
  c.std_error = std::sqrt(var / static_cast<double>(n_samples));
  c.pass = c.estimate + 2.0 * c.std_error < 1.0;
  return c;
}

struct ContractivityOptions {
  int n_state_pairs = 64;
  long n_samples = 20000;
  std::vector<double> box_lo, box_hi;  // state box; defaults to [-1,1]^n
  std::uint64_t seed = 0xc0ffee;
};

/// Monte Carlo estimate of the state-contraction moment
/// sup_{x1,x2} E[d(f(x1,U), f(x2,U))^p] / d(x1,x2)^p for iid observed
/// inputs, maximized over a Latin-hypercube box of state pairs plus
/// near-anchor pairs. The sup over sampled pairs is a lower-confidence
/// certificate: it can only under-report the true constant. Non-identity
/// filters are rejected because the conditional moment is no longer an
/// unconditional one.
inline Certificate contractivity_estimate(const StateModel& model,
                                          const HiddenSampler& sampler,
                                          const CausalFilter& filter, double p,
                                          const ContractivityOptions& opt = {},
                                          const BaseMetric& metric = euclidean()) {
  if (!filter.is_identity())
    throw std::invalid_argument(
        "contractivity_estimate: only the identity filter is certified; "
        "conditional moments under a general causal filter are not "
        "estimable from unconditional samples");
  sampler.validate();
  const int n = model.state_dim();
  const int m = model.input_dim();
  if (sampler.dim != m)
    throw std::invalid_argument("contractivity_estimate: sampler dim mismatch");

  std::vector<double> lo = opt.box_lo, hi = opt.box_hi;
  if (lo.empty()) lo.assign(static_cast<std::size_t>(n), -1.0);
  if (hi.empty()) hi.assign(static_cast<std::size_t>(n), 1.0);

  // Latin hypercube over the 2n coordinates of a state pair.
  std::vector<std::vector<double>> pairs;
  const int np = opt.n_state_pairs;
  std::vector<std::vector<int>> perms(static_cast<std::size_t>(2 * n));
  for (int d = 0; d < 2 * n; ++d) {
    auto& perm = perms[static_cast<std::size_t>(d)];
    perm.resize(static_cast<std::size_t>(np));
    for (int j = 0; j < np; ++j) perm[static_cast<std::size_t>(j)] = j;
    for (int j = np - 1; j > 0; --j) {
      const auto u = counter_uniforms(opt.seed, 1, static_cast<std::uint32_t>(d),
                                      static_cast<std::uint32_t>(j));
      const int r = static_cast<int>(u[0] * (j + 1));
      std::swap(perm[static_cast<std::size_t>(j)],
                perm[static_cast<std::size_t>(std::min(r, j))]);
    }
  }
  for (int j = 0; j < np; ++j) {
    std::vector<double> pt(static_cast<std::size_t>(2 * n));
    for (int d = 0; d < 2 * n; ++d) {
      const auto u = counter_uniforms(opt.seed, 2, static_cast<std::uint32_t>(d),
                                      static_cast<std::uint32_t>(j));
      const double cell =
          (perms[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)] +
           u[0]) /
          np;
      const int sd = d % n;
      pt[static_cast<std::size_t>(d)] =
          lo[static_cast<std::size_t>(sd)] +
          cell * (hi[static_cast<std::size_t>(sd)] - lo[static_cast<std::size_t>(sd)]);
    }
    pairs.push_back(std::move(pt));
  }
  // Adversarial pairs straddling the anchor.
  for (int d = 0; d < n; ++d) {
    std::vector<double> pt(static_cast<std::size_t>(2 * n));
    for (int i = 0; i < n; ++i) {
      pt[static_cast<std::size_t>(i)] = model.anchor()[static_cast<std::size_t>(i)];
      pt[static_cast<std::size_t>(n + i)] =
          model.anchor()[static_cast<std::size_t>(i)] + (i == d ? 1e-3 : 0.0);
    }
    pairs.push_back(std::move(pt));
  }

  // Common input draws across pairs.
  std::vector<std::vector<double>> draws(
      static_cast<std::size_t>(opt.n_samples));
  for (long s = 0; s < opt.n_samples; ++s) {
    auto& u = draws[static_cast<std::size_t>(s)];
    u.resize(static_cast<std::size_t>(m));
    for (int cdim = 0; cdim < m; ++cdim)
      u[static_cast<std::size_t>(cdim)] =
          sampler.sample(static_cast<std::uint64_t>(s), 0,
                         static_cast<std::uint32_t>(cdim));
  }

  double best = -1.0, best_se = 0.0;
  std::vector<double> f1(static_cast<std::size_t>(n)),
      f2(static_cast<std::size_t>(n)), ratios;
  long used_pairs = 0;
  for (auto& pt : pairs) {
    std::span<double> x1(pt.data(), static_cast<std::size_t>(n));
    std::span<double> x2(pt.data() + n, static_cast<std::size_t>(n));
    model.clamp_to_domain(x1);
    model.clamp_to_domain(x2);
    const double dx = metric(x1, x2);
    if (dx == 0.0) continue;  // zero-distance pair carries no information
    ++used_pairs;
    const double denom = std::pow(dx, p);
    ratios.resize(static_cast<std::size_t>(opt.n_samples));
    for (long s = 0; s < opt.n_samples; ++s) {
      const auto& u = draws[static_cast<std::size_t>(s)];
      model.step(x1, std::span<const double>(u), std::span<double>(f1));
      model.step(x2, std::span<const double>(u), std::span<double>(f2));
      ratios[static_cast<std::size_t>(s)] =
          std::pow(metric(f1, f2), p) / denom;
    }
    const double mean = pairwise_mean(ratios);
    if (mean > best) {
      double var = 0.0;
      for (double r : ratios) var += (r - mean) * (r - mean);
      var /= static_cast<double>(opt.n_samples - 1);
      best = mean;
      best_se = std::sqrt(var / static_cast<double>(opt.n_samples));
    }
  }
  Certificate c;
  c.kind = CertKind::contractivity;
  c.method = CertMethod::monte_carlo;
  c.n_samples = opt.n_samples;
  c.estimate = best;
  c.std_error = best_se;
  c.pass = best >= 0.0 && best + 2.0 * best_se < 1.0;
  std::ostringstream os;
  os << "sup over " << used_pairs
     << " sampled state pairs; one-sided: the true constant can only be larger";
  c.notes = os.str();
  return c;
}

/// Weighted one-step displacement moment at the anchor,
/// C = sum_t w_t E[d(f(x_*, U_t), x_*)^p], estimated on an input ensemble.
inline Certificate bounded_input_C(const StateModel& model, const Ensemble& inputs,
                                   const WeightVector& w, double p,
                                   const BaseMetric& metric = euclidean()) {
  if (inputs.n_paths() < 1)
    throw std::invalid_argument("bounded_input_C: empty ensemble");
  if (inputs.horizon() != w.horizon)
    throw std::invalid_argument("bounded_input_C: horizon mismatch");
  const int n_paths = inputs.n_paths();
  std::vector<double> fx(static_cast<std::size_t>(model.state_dim()));
  std::vector<double> per_path(static_cast<std::size_t>(n_paths));
  double total = 0.0;
  for (int k = 0; k < w.horizon; ++k) {
    for (int i = 0; i < n_paths; ++i) {
      model.step(model.anchor(), inputs.inputs[static_cast<std::size_t>(i)].at(k),
                 std::span<double>(fx));
      per_path[static_cast<std::size_t>(i)] =
          std::pow(metric(fx, model.anchor()), p);
    }
    total += w.weights[static_cast<std::size_t>(k)] * pairwise_mean(per_path);
  }
  Certificate c;
  c.kind = CertKind::boundedness;
  c.method = CertMethod::monte_carlo;
  c.n_samples = n_paths;
  c.estimate = total;
  c.pass = std::isfinite(total);
  std::ostringstream os;
  os << "truncated at horizon " << w.horizon << "; discarded tail weight "
     << w.tail_mass;
  c.notes = os.str();
  return c;
}

/// Fixed-point existence gate: kappa < 2^{1-p} / gamma. Also reports the
/// weaker deterministic-style comparison kappa * gamma < 1.
inline Certificate check_theorem_condition(double kappa, double gamma, double p) {
  if (!(kappa > 0.0) || !(gamma > 0.0) || !(p >= 1.0))
    throw std::domain_error("check_theorem_condition: inputs must be positive, p >= 1");
  const double threshold = std::pow(2.0, 1.0 - p) / gamma;
  Certificate c;
  c.kind = CertKind::theorem_condition;
  c.method = CertMethod::analytic;
  c.estimate = kappa;
  c.pass = kappa < threshold;
  std::ostringstream os;
  os << "threshold 2^{1-p}/gamma = " << threshold << "; kappa*gamma = "
     << kappa * gamma << (kappa * gamma < 1.0 ? " (< 1)" : " (>= 1)");
  c.notes = os.str();
  return c;
}

/// Pointwise-contraction certification used to gate the deterministic
/// filter. rate is a Lipschitz constant of f in the state argument when
/// pointwise; for GARCH with alpha + beta < 1 the solution filter exists
/// only almost surely (the defining series converges a.s., not uniformly).
struct FilterCertificate {
  double rate = 0.0;
  bool pointwise = true;
  std::string notes;

  bool admits_filter(double gamma) const {
    return pointwise ? rate * gamma < 1.0 : rate < 1.0;
  }
};

inline std::optional<FilterCertificate> pointwise_contraction(
    const StateModel& model,
    const Eigen::VectorXd& esn_scale = Eigen::VectorXd()) {
  switch (model.kind()) {
    case ModelKind::linear_test: {
      const double a = std::abs(model.params<LinearTestParams>().a);
      return FilterCertificate{a, true, "rate |a|"};
    }
    case ModelKind::esn: {
      const auto& p = model.params<EsnParams>();
      const double rate = esn_scale.size() > 0
                              ? esn_scaled_norm(p.A, esn_scale)
                              : esn_scaled_norm(p.A);
      return FilterCertificate{rate, true, "rate ||DAD^{-1}||_2"};
    }
    case ModelKind::affine: {
      const auto& p = model.params<AffineParams>();
      if (!p.A1.empty() || !p.A2.empty()) return std::nullopt;
      return FilterCertificate{esn_scaled_norm(p.A0), true,
                               "rate ||A0||_2 (input-independent A)"};
    }
    case ModelKind::garch: {
      const auto& p = model.params<GarchParams>();
      if (p.alpha == 0.0)
        return FilterCertificate{p.beta, true, "rate beta (alpha = 0)"};
      if (p.alpha + p.beta < 1.0)
        return FilterCertificate{p.alpha + p.beta, false,
                                 "solution filter exists a.s. (series "
                                 "converges a.s.), not pointwise"};
      return std::nullopt;
    }
    case ModelKind::euler_sde:
      return std::nullopt;
  }
  return std::nullopt;
}

/// Report of the two-fixed-points construction that shows why the weighted
/// moment constraint cannot be dropped: for f(x,u) = alpha x with
/// gamma * alpha > 1 both the zero path and x_t = alpha^t are exact fixed
/// points, and the weighted p-th moment sum of the second one diverges.
struct IntegrabilityCounterexample {
  double alpha = 0.0, gamma = 0.0, p = 2.0;
  double resid_zero = 0.0;       // max interior residual of the zero path
  double resid_geometric = 0.0;  // max relative interior residual of alpha^t
  std::vector<double> partial_sums;  // S_T, T = 1..T_max
  bool monotone = false;
  bool diverges = false;   // S reached the threshold
  int t_at_threshold = -1;  // first T with S_T >= threshold
  double threshold = 1e6;
};

inline IntegrabilityCounterexample integrability_counterexample(
    double alpha, double gamma, double p, int horizon = 64, int t_max = 48,
    double threshold = 1e6) {
  std::ostringstream bad;
  if (!(alpha > 0.0 && alpha < 0.5))
    bad << "alpha must be in (0, 1/2); ";
  if (!(p > 1.0)) bad << "p must be > 1; ";
  if (!(gamma > 1.0)) bad << "gamma must be > 1; ";
  if (!(gamma * alpha > 1.0)) bad << "need gamma*alpha > 1; ";
  if (!(gamma * std::pow(alpha, p) < std::pow(2.0, 1.0 - p)))
    bad << "need gamma*alpha^p < 2^{1-p}; ";
  if (!bad.str().empty())
    throw std::domain_error("integrability_counterexample: " + bad.str());

  AffineParams ap;
  ap.A0 = Eigen::MatrixXd::Constant(1, 1, alpha);
  ap.b0 = Eigen::VectorXd::Zero(1);
  const StateModel model = StateModel::affine(std::move(ap));

  IntegrabilityCounterexample r;
  r.alpha = alpha;
  r.gamma = gamma;
  r.p = p;
  r.threshold = threshold;

  const PathWindow u(1, horizon);  // f ignores the input
  const std::vector<double> zero_pad{0.0};

  PathWindow zero(1, horizon);
  PathWindow fz = extend_F(model, zero, u, zero_pad);
  for (int k = 0; k + 1 < horizon; ++k)
    r.resid_zero = std::max(r.resid_zero, std::abs(fz.at(k)[0] - zero.at(k)[0]));

  // x_t = alpha^t built from the deep end by the same multiplication the
  // state map performs, so interior residuals are exact zeros in floating
  // point as well.
  PathWindow geo(1, horizon);
  geo.at(horizon - 1)[0] = std::pow(alpha, -static_cast<double>(horizon));
  for (int k = horizon - 2; k >= 0; --k)
    geo.at(k)[0] = alpha * geo.at(k + 1)[0];
  const std::vector<double> geo_pad{geo.at(horizon - 1)[0] / alpha};
  PathWindow fg = extend_F(model, geo, u, geo_pad);
  for (int k = 0; k + 1 < horizon; ++k) {
    const double rel = std::abs(fg.at(k)[0] - geo.at(k)[0]) /
                       std::max(1.0, std::abs(geo.at(k)[0]));
    r.resid_geometric = std::max(r.resid_geometric, rel);
  }

  // S_T = (gamma - 1) sum_{t=-T}^{-1} (gamma alpha^p)^t; the summand at
  // time -j is (1 / (gamma alpha^p))^j, which grows geometrically.
  const double ratio = 1.0 / (gamma * std::pow(alpha, p));
  double term = 1.0, sum = 0.0;
  r.monotone = true;
  for (int t = 1; t <= t_max; ++t) {
    term *= ratio;
    sum += term;
    const double s = (gamma - 1.0) * sum;
    if (!r.partial_sums.empty() && s <= r.partial_sums.back())
      r.monotone = false;
    r.partial_sums.push_back(s);
    if (r.t_at_threshold < 0 && s >= threshold) r.t_at_threshold = t;
  }
  r.diverges = r.t_at_threshold >= 0;
  return r;
}

}  // namespace stochesp
