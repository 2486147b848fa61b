#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochesp/inputs.hpp"
#include "stochesp/seqspace.hpp"
#include "stochesp/util.hpp"

namespace stochesp {

enum class OTMethod { quantile_1d, assignment, sinkhorn, auto_select };

inline const char* to_string(OTMethod m) {
  switch (m) {
    case OTMethod::quantile_1d: return "quantile_1d";
    case OTMethod::assignment: return "assignment";
    case OTMethod::sinkhorn: return "sinkhorn";
    case OTMethod::auto_select: return "auto";
  }
  return "?";
}

/// Result of one empirical transport computation. distance = plan_cost^{1/p};
/// iterations/marginal_err/converged are meaningful for sinkhorn only.
struct OTResult {
  double distance = 0.0;
  double p = 1.0;
  OTMethod method = OTMethod::assignment;
  double plan_cost = 0.0;
  int iterations = 0;
  double marginal_err = 0.0;
  bool converged = true;
};

inline constexpr int kAssignmentCap = 4096;

/// Exact W_p between two equal-size scalar samples via the comonotone
/// (sorted) coupling, which is optimal in one dimension.
inline OTResult wp_quantile_1d(std::vector<double> a, std::vector<double> b,
                               double p) {
  if (a.size() != b.size())
    throw std::invalid_argument("wp_quantile_1d: length mismatch");
  if (!(p >= 1.0)) throw std::domain_error("wp_quantile_1d: p must be >= 1");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> costs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    costs[i] = std::pow(std::abs(a[i] - b[i]), p);
  OTResult r;
  r.p = p;
  r.method = OTMethod::quantile_1d;
  r.plan_cost = pairwise_mean(costs);
  r.distance = std::pow(r.plan_cost, 1.0 / p);
  return r;
}

/// Minimum-cost perfect matching on a dense n x n matrix (row-major) by the
/// shortest-augmenting-path method with dual potentials. Exact; O(n^3).
inline double assignment_min_cost(const std::vector<double>& cost, int n,
                                  std::vector<int>* row_to_col = nullptr) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t nn = static_cast<std::size_t>(n);
  std::vector<double> u(nn + 1, 0.0), v(nn + 1, 0.0);
  std::vector<int> match(nn + 1, 0);  // column -> matched row (1-based)
  std::vector<int> way(nn + 1, 0);
  std::vector<double> minv(nn + 1);
  std::vector<char> used(nn + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      const double* row = cost.data() + static_cast<std::size_t>(i0 - 1) * nn;
      const double ui0 = u[static_cast<std::size_t>(i0)];
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = row[j - 1] - ui0 - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(nn, -1);
  for (int j = 1; j <= n; ++j)
    perm[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  // Re-sum the selected entries in row order so the reported value does not
  // depend on the augmenting order.
  std::vector<double> picked(nn);
  for (std::size_t i = 0; i < nn; ++i)
    picked[i] = cost[i * nn + static_cast<std::size_t>(perm[i])];
  if (row_to_col) *row_to_col = perm;
  return pairwise_sum(picked);
}

namespace detail {

inline void require_comparable(const Ensemble& A, const Ensemble& B,
                               const WeightVector& w, const char* where) {
  if (A.n_paths() != B.n_paths())
    throw std::invalid_argument(std::string(where) + ": path counts differ (" +
                                std::to_string(A.n_paths()) + " vs " +
                                std::to_string(B.n_paths()) + ")");
  if (!A.has_states() || !B.has_states())
    throw std::invalid_argument(std::string(where) +
                                ": both ensembles need attached states");
  if (A.horizon() != w.horizon || B.horizon() != w.horizon)
    throw std::invalid_argument(std::string(where) +
                                ": ensemble horizon != weight horizon");
  if (A.state_dim() != B.state_dim() || A.input_dim() != B.input_dim())
    throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}

inline double pair_cost(const Ensemble& A, const Ensemble& B, std::size_t i,
                        std::size_t j, const WeightVector& w, double p,
                        const ProductMetricSpec& metric) {
  const double d = product_dist(A.states[i], A.inputs[i], B.states[j],
                                B.inputs[j], w, metric.state, metric.input);
  return p == 1.0 ? d : std::pow(d, p);
}

/// Dense pairwise cost matrix c_ij = product_dist(A_i, B_j)^p.
inline std::vector<double> cost_matrix(const Ensemble& A, const Ensemble& B,
                                       const WeightVector& w, double p,
                                       const ProductMetricSpec& metric,
                                       int n_threads) {
  const std::size_t n = static_cast<std::size_t>(A.n_paths());
  std::vector<double> cost(n * n);
  parallel_for(n, n_threads, [&](std::size_t i) {
    double* row = cost.data() + i * n;
    for (std::size_t j = 0; j < n; ++j)
      row[j] = pair_cost(A, B, i, j, w, p, metric);
  });
  return cost;
}

}  // namespace detail

/// Median pairwise transport cost, the scale used to pick sinkhorn
/// regularizations. Exact for N <= 1024, estimated on a deterministic
/// subsample of rows above.
inline double median_pair_cost(const Ensemble& A, const Ensemble& B,
                               const WeightVector& w, double p,
                               const ProductMetricSpec& metric = {}) {
  detail::require_comparable(A, B, w, "median_pair_cost");
  const std::size_t n = static_cast<std::size_t>(A.n_paths());
  const std::size_t rows = std::min<std::size_t>(n, 1024 * 1024 / std::max<std::size_t>(n, 1) + 1);
  std::vector<double> c;
  c.reserve(rows * n);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j)
      c.push_back(detail::pair_cost(A, B, i, j, w, p, metric));
  std::nth_element(c.begin(), c.begin() + c.size() / 2, c.end());
  return c[c.size() / 2];
}

/// Exact W_p between equal-size uniform empirical measures, solved as an
/// N x N assignment problem on the product metric.
inline OTResult wp_assignment(const Ensemble& A, const Ensemble& B,
                              const WeightVector& w, double p,
                              const ProductMetricSpec& metric = {},
                              int n_threads = 1) {
  detail::require_comparable(A, B, w, "wp_assignment");
  const int n = A.n_paths();
  if (n > kAssignmentCap)
    throw std::invalid_argument("wp_assignment: N = " + std::to_string(n) +
                                " exceeds cap " + std::to_string(kAssignmentCap));
  const auto cost = detail::cost_matrix(A, B, w, p, metric, n_threads);
  OTResult r;
  r.p = p;
  r.method = OTMethod::assignment;
  r.plan_cost = assignment_min_cost(cost, n) / n;
  r.distance = std::pow(r.plan_cost, 1.0 / p);
  return r;
}

struct SinkhornOptions {
  double reg = 1e-2;    // target entropic regularization
  int max_iter = 2000;  // scaling sweeps across all annealing stages
  double tol = 1e-6;    // accepted total-variation marginal violation
  bool anneal = true;   // halve from the data scale down to reg
  int dense_cap = kAssignmentCap;  // largest N with a materialized cost matrix
};

/// Entropic-regularized OT via log-domain alternating scaling, with an
/// annealing schedule reg_k = reg_0 * 2^{-k} that halves the regularization
/// from the data scale reg_0 down to the requested target. Potentials are
/// warm-started across stages. The cost matrix is materialized up to
/// N = 4096 and evaluated row-by-row above that. The entropic bias is
/// reported, not corrected; a result whose marginal violation exceeds tol
/// comes back flagged (converged = false), never silently.
inline OTResult wp_sinkhorn(const Ensemble& A, const Ensemble& B,
                            const WeightVector& w, double p,
                            const SinkhornOptions& opt = {},
                            const ProductMetricSpec& metric = {},
                            int n_threads = 1) {
  detail::require_comparable(A, B, w, "wp_sinkhorn");
  if (!(opt.reg > 0.0)) throw std::domain_error("wp_sinkhorn: reg must be > 0");
  const std::size_t n = static_cast<std::size_t>(A.n_paths());
  const bool dense =
      n <= static_cast<std::size_t>(std::max(opt.dense_cap, 0));
  std::vector<double> cost;
  if (dense) cost = detail::cost_matrix(A, B, w, p, metric, n_threads);
  std::vector<double> rowbuf(dense ? 0 : n);
  const auto row_of = [&](std::size_t i) -> const double* {
    if (dense) return cost.data() + i * n;
    for (std::size_t j = 0; j < n; ++j)
      rowbuf[j] = detail::pair_cost(A, B, i, j, w, p, metric);
    return rowbuf.data();
  };

  double cmax = 0.0;
  if (dense) {
    for (double c : cost) cmax = std::max(cmax, c);
  } else {
    for (std::size_t i = 0; i < std::min<std::size_t>(n, 64); ++i) {
      const double* row = row_of(i);
      for (std::size_t j = 0; j < n; ++j) cmax = std::max(cmax, row[j]);
    }
  }

  const double loga = -std::log(static_cast<double>(n));
  std::vector<double> f(n, 0.0), g(n, 0.0);
  std::vector<double> mcol(n), scol(n);

  const auto update_f = [&](double reg) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = row_of(i);
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) m = std::min(m, row[j] - g[j]);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        s += std::exp(-(row[j] - g[j] - m) / reg);
      f[i] = reg * loga + m - reg * std::log(s);
    }
  };
  // Column softmins accumulated in one row-major streaming pass.
  const auto update_g = [&](double reg) {
    std::fill(mcol.begin(), mcol.end(),
              std::numeric_limits<double>::infinity());
    std::fill(scol.begin(), scol.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = row_of(i);
      for (std::size_t j = 0; j < n; ++j) {
        const double val = row[j] - f[i];
        if (val < mcol[j]) {
          scol[j] = scol[j] * std::exp(-(mcol[j] - val) / reg) + 1.0;
          mcol[j] = val;
        } else {
          scol[j] += std::exp(-(val - mcol[j]) / reg);
        }
      }
    }
    for (std::size_t j = 0; j < n; ++j)
      g[j] = reg * loga + mcol[j] - reg * std::log(scol[j]);
  };
  // Row marginals of the implied plan against 1/n (total variation).
  // Column marginals are exact right after a g-update.
  const auto marginal_violation = [&](double reg) {
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = row_of(i);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        s += std::exp(-(row[j] - f[i] - g[j]) / reg);
      err += std::abs(s - 1.0 / static_cast<double>(n));
    }
    return 0.5 * err;
  };

  std::vector<double> schedule;
  if (opt.anneal && cmax > opt.reg)
    for (double r = cmax; r > opt.reg; r *= 0.5) schedule.push_back(r);
  schedule.push_back(opt.reg);

  OTResult res;
  res.p = p;
  res.method = OTMethod::sinkhorn;
  int iters = 0;
  bool accepted = false;
  for (std::size_t stage = 0; stage < schedule.size() && iters < opt.max_iter;
       ++stage) {
    const double reg = schedule[stage];
    const bool final_stage = stage + 1 == schedule.size();
    const int budget =
        final_stage ? opt.max_iter - iters : std::min(4, opt.max_iter - iters);
    for (int it = 0; it < budget; ++it) {
      update_f(reg);
      update_g(reg);
      ++iters;
      if (final_stage && (it & 3) == 3) {
        if (marginal_violation(reg) < opt.tol) {
          accepted = true;
          break;
        }
      }
    }
  }
  const double reg = schedule.back();
  res.marginal_err = marginal_violation(reg);
  res.converged = accepted || res.marginal_err < opt.tol;
  res.iterations = iters;

  std::vector<double> row_costs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = row_of(i);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      s += row[j] * std::exp(-(row[j] - f[i] - g[j]) / reg);
    row_costs[i] = s;
  }
  res.plan_cost = pairwise_sum(row_costs);
  res.distance = std::pow(std::max(res.plan_cost, 0.0), 1.0 / p);
  return res;
}

/// Default method selection: sorted quantiles for scalar horizon-1 data,
/// exact assignment up to N = 1024, sinkhorn above.
inline OTMethod select_ot_method(const Ensemble& A, OTMethod requested) {
  if (requested != OTMethod::auto_select) return requested;
  if (A.state_dim() == 1 && A.input_dim() == 1 && A.horizon() == 1)
    return OTMethod::quantile_1d;
  return A.n_paths() <= 1024 ? OTMethod::assignment : OTMethod::sinkhorn;
}

/// Dispatch on a (possibly auto-selected) method. quantile_1d applies to the
/// scalar horizon-1 state coordinate, where the comonotone coupling is
/// optimal; the other methods use the full product metric.
inline OTResult wp_auto(const Ensemble& A, const Ensemble& B,
                        const WeightVector& w, double p,
                        OTMethod method = OTMethod::auto_select,
                        const SinkhornOptions& sopt = {},
                        const ProductMetricSpec& metric = {},
                        int n_threads = 1) {
  switch (select_ot_method(A, method)) {
    case OTMethod::quantile_1d: {
      if (A.state_dim() != 1 || A.horizon() != 1)
        throw std::invalid_argument(
            "wp_auto: quantile_1d applies only to scalar horizon-1 ensembles");
      std::vector<double> a(static_cast<std::size_t>(A.n_paths()));
      std::vector<double> b(static_cast<std::size_t>(B.n_paths()));
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = w.weights[0] * A.states[i].at(0)[0];
        b[i] = w.weights[0] * B.states[i].at(0)[0];
      }
      return wp_quantile_1d(std::move(a), std::move(b), p);
    }
    case OTMethod::sinkhorn:
      return wp_sinkhorn(A, B, w, p, sopt, metric, n_threads);
    default:
      return wp_assignment(A, B, w, p, metric, n_threads);
  }
}

}  // namespace stochesp
