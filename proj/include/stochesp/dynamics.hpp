#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stochesp/certificates.hpp"
#include "stochesp/inputs.hpp"
#include "stochesp/models.hpp"
#include "stochesp/seqspace.hpp"
#include "stochesp/util.hpp"
#include "stochesp/wasserstein.hpp"

namespace stochesp {

/// One iteration record: row n holds W_p(nu_{n+1}, nu_n) measured two ways,
/// plus the time -1 state marginal of nu_{n+1}.
struct TraceStep {
  int n = 0;
  double wp_step_coupled = 0.0;
  double wp_step_ot = 0.0;
  double mean_state_recent = 0.0;
  double var_state_recent = 0.0;
};

struct ConvergenceTrace {
  std::vector<TraceStep> steps;
  double fitted_q = 0.0;
  double fitted_Q = 0.0;
  bool converged = false;
  double tol = 1e-3;
  int n_final = 0;
};

struct FixedPointEstimate {
  Ensemble ensemble;
  ConvergenceTrace trace;
  EnsembleMeta input_meta;
};

struct ConvergeOptions {
  double p = 1.0;
  double tol = 1e-3;
  int max_steps = 0;        // 0: defaults to 4 * horizon
  int ot_subsample = 256;   // paths used for the full-OT sanity floor (<= 1024)
  OTMethod ot_method = OTMethod::assignment;
  SinkhornOptions sinkhorn;
  ProductMetricSpec metric;
  int n_threads = 1;
  std::vector<PathWindow> initial_states;  // empty: constant anchor windows
};

/// Applies Fc n_steps times to every path, starting from the constant
/// anchor window. Inputs are never touched; the result is a pure function
/// of (inputs, model, n_steps).
inline Ensemble iterate_fc(const StateModel& model, const Ensemble& inputs,
                           int n_steps, int n_threads = 1) {
  if (n_steps < 0) throw std::invalid_argument("iterate_fc: n_steps < 0");
  Ensemble out = inputs;
  const std::size_t n = out.inputs.size();
  out.states.resize(n);
  out.meta.model_id = model.id();
  parallel_for(n, n_threads, [&](std::size_t i) {
    PathWindow x = PathWindow::constant(
        model.state_dim(), out.inputs[i].horizon, model.anchor());
    for (int s = 0; s < n_steps; ++s)
      x = extend_F(model, x, out.inputs[i], model.anchor());
    out.states[i] = std::move(x);
  });
  return out;
}

/// Least-squares fit of log wp_step[n] = log Q + n log q over the tail half
/// of the trace (at least 5 positive step distances). An all-zero trace is
/// degenerate and reports q = 0.
inline std::pair<double, double> fit_decay_rate(const ConvergenceTrace& trace) {
  std::vector<std::pair<int, double>> pos;
  for (const auto& s : trace.steps)
    if (s.wp_step_coupled > 0.0) pos.emplace_back(s.n, s.wp_step_coupled);
  if (pos.empty()) return {0.0, 0.0};
  std::vector<std::pair<int, double>> fitpts(
      pos.begin() + static_cast<std::ptrdiff_t>(pos.size() / 2), pos.end());
  if (fitpts.size() < 5) fitpts = pos;
  if (fitpts.size() < 5)
    throw std::domain_error(
        "fit_decay_rate: need at least 5 positive step distances");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, s] : fitpts) {
    const double x = n, y = std::log(s);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(fitpts.size());
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;
  return {std::exp(slope), std::exp(intercept)};
}

namespace detail {

inline Ensemble subsample_pairs(const std::vector<PathWindow>& states,
                                const std::vector<PathWindow>& inputs,
                                std::size_t m) {
  Ensemble e;
  e.states.assign(states.begin(), states.begin() + static_cast<std::ptrdiff_t>(m));
  e.inputs.assign(inputs.begin(), inputs.begin() + static_cast<std::ptrdiff_t>(m));
  return e;
}

}  // namespace detail

/// Iterates the ensemble pushforward from delta_{x^0} x Xi, stopping when
/// the coupled step distance drops below tol. The stopping quantity is the
/// per-path coupling cost (a valid W_p upper bound and the quantity the
/// geometric convergence argument controls); full OT on a subsample is
/// recorded alongside as a sanity floor but never drives the stop.
inline FixedPointEstimate converge_fixed_point(const StateModel& model,
                                               const Ensemble& inputs,
                                               const WeightVector& w,
                                               const ConvergeOptions& opt = {}) {
  if (!(opt.tol > 0.0))
    throw std::domain_error("converge_fixed_point: tol must be > 0");
  if (inputs.horizon() != w.horizon)
    throw std::invalid_argument("converge_fixed_point: horizon mismatch");
  const std::size_t n = inputs.inputs.size();
  const int max_steps = opt.max_steps > 0 ? opt.max_steps : 4 * w.horizon;
  const std::size_t sub =
      std::min<std::size_t>(n, static_cast<std::size_t>(
                                   std::clamp(opt.ot_subsample, 0, 1024)));

  FixedPointEstimate fp;
  fp.input_meta = inputs.meta;
  fp.trace.tol = opt.tol;

  Ensemble cur = inputs;
  cur.meta.model_id = model.id();
  cur.states.resize(n);
  if (opt.initial_states.empty()) {
    for (std::size_t i = 0; i < n; ++i)
      cur.states[i] = PathWindow::constant(model.state_dim(), w.horizon,
                                           model.anchor());
  } else {
    if (opt.initial_states.size() != n)
      throw std::invalid_argument(
          "converge_fixed_point: initial_states count mismatch");
    cur.states = opt.initial_states;
  }

  std::vector<PathWindow> next(n);
  std::vector<double> step_costs(n);
  std::vector<double> recent(n), recent_sq(n);

  for (int step = 0; step < max_steps; ++step) {
    parallel_for(n, opt.n_threads, [&](std::size_t i) {
      next[i] = extend_F(model, cur.states[i], cur.inputs[i], model.anchor());
      const double d =
          state_seq_dist(next[i], cur.states[i], w, opt.metric.state);
      step_costs[i] = opt.p == 1.0 ? d : std::pow(d, opt.p);
      recent[i] = next[i].at(0)[0];
      recent_sq[i] = recent[i] * recent[i];
    });
    TraceStep ts;
    ts.n = step;
    ts.wp_step_coupled = std::pow(pairwise_mean(step_costs), 1.0 / opt.p);
    if (sub >= 2) {
      const Ensemble a = detail::subsample_pairs(cur.states, cur.inputs, sub);
      const Ensemble b = detail::subsample_pairs(next, cur.inputs, sub);
      ts.wp_step_ot = wp_auto(b, a, w, opt.p, opt.ot_method, opt.sinkhorn,
                              opt.metric, opt.n_threads)
                          .distance;
    }
    ts.mean_state_recent = pairwise_mean(recent);
    ts.var_state_recent =
        pairwise_mean(recent_sq) - ts.mean_state_recent * ts.mean_state_recent;
    fp.trace.steps.push_back(ts);
    cur.states.swap(next);
    fp.trace.n_final = step;
    if (ts.wp_step_coupled < opt.tol) {
      fp.trace.converged = true;
      break;
    }
  }

  if (!fp.trace.steps.empty()) {
    std::size_t positive = 0;
    for (const auto& s : fp.trace.steps)
      if (s.wp_step_coupled > 0.0) ++positive;
    if (positive >= 5) {
      const auto [q, Q] = fit_decay_rate(fp.trace);
      fp.trace.fitted_q = q;
      fp.trace.fitted_Q = Q;
    }
  }
  fp.ensemble = std::move(cur);
  return fp;
}

/// Pathwise solution filter: iterates x <- F(x, u) from the anchor window
/// until the weighted step distance drops below tol. Refuses to run unless
/// the model carries a contraction certificate admitting a filter at this
/// weighting (either a pointwise rate c with c * gamma < 1, or the
/// almost-sure GARCH series case).
inline PathWindow deterministic_filter(const StateModel& model,
                                       const PathWindow& u,
                                       const WeightVector& w, double tol,
                                       const Eigen::VectorXd& esn_scale =
                                           Eigen::VectorXd()) {
  const auto cert = pointwise_contraction(model, esn_scale);
  if (!cert || !cert->admits_filter(w.gamma))
    throw std::invalid_argument(
        "deterministic_filter: model has no contraction certificate valid at "
        "gamma = " +
        std::to_string(w.gamma));
  PathWindow x = PathWindow::constant(model.state_dim(), u.horizon, model.anchor());
  // The truncated iteration reaches its pad-determined fixed point after at
  // most horizon steps, so this always terminates.
  for (int it = 0; it < u.horizon + 2; ++it) {
    PathWindow nx = extend_F(model, x, u, model.anchor());
    const double d = state_seq_dist(nx, x, w);
    x = std::move(nx);
    if (d < tol) break;
  }
  return x;
}

struct ConsistencyResult {
  double distance = 0.0;
  FixedPointEstimate fp;
  Ensemble filtered;
};

/// Distance between the iterated fixed point and the pushforward of the
/// deterministic filter on the same input draws. Small values certify that
/// the stochastic construction reproduces the functional solution.
inline ConsistencyResult consistency_check(const StateModel& model,
                                           const Ensemble& inputs,
                                           const WeightVector& w,
                                           const ConvergeOptions& opt = {},
                                           const Eigen::VectorXd& esn_scale =
                                               Eigen::VectorXd()) {
  ConsistencyResult r;
  r.fp = converge_fixed_point(model, inputs, w, opt);
  r.filtered = inputs;
  r.filtered.meta.model_id = model.id();
  const std::size_t n = inputs.inputs.size();
  r.filtered.states.resize(n);
  parallel_for(n, opt.n_threads, [&](std::size_t i) {
    r.filtered.states[i] = deterministic_filter(
        model, r.filtered.inputs[i], w, opt.tol, esn_scale);
  });
  r.distance = wp_auto(r.fp.ensemble, r.filtered, w, opt.p, opt.ot_method,
                       opt.sinkhorn, opt.metric, opt.n_threads)
                   .distance;
  return r;
}

/// Stationarity diagnostic: compares per-time marginal means, variances and
/// lag-k autocovariances of the state across the interior window times
/// t in [-T/2, -1]. Deviations are measured in standard-error units, so the
/// pass tolerance scales as 4/sqrt(N).
struct StationarityReport {
  double max_mean_dev = 0.0;  // in standard errors
  double max_var_dev = 0.0;
  double max_acov_dev = 0.0;
  double tol_se = 4.0;
  int interior_times = 0;
  int max_lag = 0;
  bool pass = false;
};

inline StationarityReport stationarity_check(const FixedPointEstimate& fp,
                                             int max_lag = 5) {
  const Ensemble& e = fp.ensemble;
  if (!e.has_states())
    throw std::invalid_argument("stationarity_check: no states attached");
  const int N = e.n_paths();
  const int T = e.horizon();
  const int dim = e.state_dim();
  const int K = std::max(T / 2, 1);
  StationarityReport rep;
  rep.interior_times = K;
  rep.max_lag = std::min(max_lag, T - K);
  constexpr double eps_se = 1e-15;
  constexpr double eps_abs = 1e-12;

  std::vector<double> buf(static_cast<std::size_t>(N));
  const auto column = [&](int k, int d) -> const std::vector<double>& {
    for (int i = 0; i < N; ++i)
      buf[static_cast<std::size_t>(i)] =
          e.states[static_cast<std::size_t>(i)].at(k)[d];
    return buf;
  };

  for (int d = 0; d < dim; ++d) {
    std::vector<double> means(static_cast<std::size_t>(K)),
        vars(static_cast<std::size_t>(K)), se_mean(static_cast<std::size_t>(K)),
        se_var(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      const auto& col = column(k, d);
      const double mu = pairwise_mean(col);
      double m2 = 0.0, m4 = 0.0;
      for (double v : col) {
        const double c = v - mu;
        m2 += c * c;
        m4 += c * c * c * c;
      }
      m2 /= N;
      m4 /= N;
      means[static_cast<std::size_t>(k)] = mu;
      vars[static_cast<std::size_t>(k)] = m2;
      se_mean[static_cast<std::size_t>(k)] = std::sqrt(m2 / N);
      se_var[static_cast<std::size_t>(k)] =
          std::sqrt(std::max(m4 - m2 * m2, 0.0) / N);
    }
    const double pooled_mean = pairwise_mean(means);
    const double pooled_var = pairwise_mean(vars);
    for (int k = 0; k < K; ++k) {
      const double dm = std::abs(means[static_cast<std::size_t>(k)] - pooled_mean);
      const double dv = std::abs(vars[static_cast<std::size_t>(k)] - pooled_var);
      rep.max_mean_dev = std::max(
          rep.max_mean_dev,
          se_mean[static_cast<std::size_t>(k)] > eps_se
              ? dm / se_mean[static_cast<std::size_t>(k)]
              : (dm > eps_abs ? 1e9 : 0.0));
      rep.max_var_dev = std::max(
          rep.max_var_dev, se_var[static_cast<std::size_t>(k)] > eps_se
                               ? dv / se_var[static_cast<std::size_t>(k)]
                               : (dv > eps_abs ? 1e9 : 0.0));
    }
    for (int lag = 1; lag <= rep.max_lag; ++lag) {
      std::vector<double> acovs(static_cast<std::size_t>(K)),
          se_acov(static_cast<std::size_t>(K));
      for (int k = 0; k < K; ++k) {
        std::vector<double> a = column(k, d);
        const std::vector<double>& b = column(k + lag, d);
        const double mu_a = pairwise_mean(a);
        const double mu_b = pairwise_mean(b);
        double cov = 0.0, m22 = 0.0;
        for (int i = 0; i < N; ++i) {
          const double ca = a[static_cast<std::size_t>(i)] - mu_a;
          const double cb = b[static_cast<std::size_t>(i)] - mu_b;
          cov += ca * cb;
          m22 += ca * ca * cb * cb;
        }
        cov /= N;
        m22 /= N;
        acovs[static_cast<std::size_t>(k)] = cov;
        se_acov[static_cast<std::size_t>(k)] =
            std::sqrt(std::max(m22 - cov * cov, 0.0) / N);
      }
      const double pooled = pairwise_mean(acovs);
      for (int k = 0; k < K; ++k) {
        const double dv = std::abs(acovs[static_cast<std::size_t>(k)] - pooled);
        rep.max_acov_dev = std::max(
            rep.max_acov_dev, se_acov[static_cast<std::size_t>(k)] > eps_se
                                  ? dv / se_acov[static_cast<std::size_t>(k)]
                                  : (dv > eps_abs ? 1e9 : 0.0));
      }
    }
  }
  rep.pass = rep.max_mean_dev <= rep.tol_se && rep.max_var_dev <= rep.tol_se &&
             rep.max_acov_dev <= rep.tol_se;
  return rep;
}

/// Random initial state windows inside the model's domain, for uniqueness
/// probes against the anchor start.
inline std::vector<PathWindow> random_initial_states(const StateModel& model,
                                                     int n_paths, int horizon,
                                                     std::uint64_t seed,
                                                     double amplitude = 1.0) {
  std::vector<PathWindow> out(static_cast<std::size_t>(n_paths));
  for (int i = 0; i < n_paths; ++i) {
    PathWindow wdw(model.state_dim(), horizon);
    for (int k = 0; k < horizon; ++k) {
      auto row = wdw.at(k);
      for (int d = 0; d < model.state_dim(); ++d) {
        const auto u = counter_uniforms(seed, static_cast<std::uint64_t>(i),
                                        static_cast<std::uint32_t>(k),
                                        static_cast<std::uint32_t>(d));
        row[static_cast<std::size_t>(d)] = amplitude * (2.0 * u[0] - 1.0);
      }
      model.clamp_to_domain(row);
    }
    out[static_cast<std::size_t>(i)] = std::move(wdw);
  }
  return out;
}

}  // namespace stochesp
