#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochesp {

/// Truncated geometric weighting sequence on negative times.
///
/// weights[k] = (gamma-1) * gamma^t at time t = -(k+1), so weights[0] is the
/// weight of time -1 and the largest entry. The discarded tail carries mass
/// gamma^{-T}, and sum(weights) + tail_mass == 1 up to roundoff. The growth
/// constant of this family (sup of shifted weight ratios) is exactly gamma.
struct WeightVector {
  double gamma = 2.0;
  int horizon = 1;
  std::vector<double> weights;
  double tail_mass = 0.5;

  double growth() const { return gamma; }
  double operator[](int k) const { return weights[static_cast<std::size_t>(k)]; }
};

inline WeightVector make_weights(double gamma, int horizon) {
  if (!(gamma > 1.0))
    throw std::domain_error("make_weights: gamma must be > 1, got " +
                            std::to_string(gamma));
  if (horizon < 1)
    throw std::domain_error("make_weights: horizon must be >= 1, got " +
                            std::to_string(horizon));
  WeightVector w;
  w.gamma = gamma;
  w.horizon = horizon;
  w.weights.resize(static_cast<std::size_t>(horizon));
  double g = 1.0;
  for (int k = 0; k < horizon; ++k) {
    g /= gamma;  // g = gamma^{-(k+1)}
    w.weights[static_cast<std::size_t>(k)] = (gamma - 1.0) * g;
  }
  w.tail_mass = g;
  return w;
}

/// Smallest horizon T with gamma^{-T} < tail_tol.
inline int horizon_for_tail(double gamma, double tail_tol) {
  if (!(gamma > 1.0) || !(tail_tol > 0.0) || !(tail_tol < 1.0))
    throw std::domain_error("horizon_for_tail: need gamma > 1 and tail_tol in (0,1)");
  int t = static_cast<int>(std::ceil(-std::log(tail_tol) / std::log(gamma)));
  if (t < 1) t = 1;
  while (std::pow(gamma, -t) >= tail_tol) ++t;
  return t;
}

/// Finite window of a semi-infinite sequence of points in R^dim.
/// Row k holds the entry at time t = -(k+1); row 0 is the most recent.
struct PathWindow {
  int dim = 0;
  int horizon = 0;
  std::vector<double> data;  // row-major, horizon rows of dim entries

  PathWindow() = default;
  PathWindow(int dim_, int horizon_)
      : dim(dim_), horizon(horizon_),
        data(static_cast<std::size_t>(dim_) * static_cast<std::size_t>(horizon_),
             0.0) {}

  std::span<const double> at(int k) const {
    return {data.data() + static_cast<std::size_t>(k) * dim,
            static_cast<std::size_t>(dim)};
  }
  std::span<double> at(int k) {
    return {data.data() + static_cast<std::size_t>(k) * dim,
            static_cast<std::size_t>(dim)};
  }

  static PathWindow constant(int dim, int horizon, std::span<const double> value) {
    PathWindow w(dim, horizon);
    for (int k = 0; k < horizon; ++k) {
      auto row = w.at(k);
      for (int d = 0; d < dim; ++d) row[d] = value[static_cast<std::size_t>(d)];
    }
    return w;
  }

  bool all_finite() const {
    for (double x : data)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

/// State window paired with the input window that produced it.
struct PathPair {
  PathWindow state;
  PathWindow input;
};

/// Base metric on R^dim. Closed enumeration: Euclidean, or diagonal-scaled
/// Euclidean ||D(a-b)||_2. cap_at_one selects the bounded variant
/// min{1, d}, the choice made for the input-side window metric.
struct BaseMetric {
  enum class Kind { euclidean, diag_scaled };
  Kind kind = Kind::euclidean;
  std::vector<double> scale;  // diagonal of D for diag_scaled
  bool cap_at_one = false;

  double operator()(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    if (kind == Kind::diag_scaled) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = scale[i] * (a[i] - b[i]);
        s += d * d;
      }
    } else {
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
      }
    }
    const double r = std::sqrt(s);
    return cap_at_one ? std::min(1.0, r) : r;
  }
};

inline BaseMetric euclidean() { return {}; }

inline BaseMetric diag_scaled(std::vector<double> d) {
  BaseMetric m;
  m.kind = BaseMetric::Kind::diag_scaled;
  m.scale = std::move(d);
  return m;
}

inline BaseMetric capped_euclidean() {
  BaseMetric m;
  m.cap_at_one = true;
  return m;
}

namespace detail {
inline void require_same_shape(const PathWindow& a, const PathWindow& b,
                               const char* where) {
  if (a.dim != b.dim || a.horizon != b.horizon)
    throw std::invalid_argument(std::string(where) +
                                ": window shape mismatch (dims " +
                                std::to_string(a.dim) + "/" + std::to_string(b.dim) +
                                ", horizons " + std::to_string(a.horizon) + "/" +
                                std::to_string(b.horizon) + ")");
}
}  // namespace detail

/// Truncated weighted l1 distance sum_k weights[k] * d(a_k, b_k).
inline double state_seq_dist(const PathWindow& a, const PathWindow& b,
                             const WeightVector& w,
                             const BaseMetric& base_metric = euclidean()) {
  detail::require_same_shape(a, b, "state_seq_dist");
  if (a.horizon != w.horizon)
    throw std::invalid_argument("state_seq_dist: window horizon " +
                                std::to_string(a.horizon) +
                                " != weight horizon " + std::to_string(w.horizon));
  double s = 0.0;
  for (int k = 0; k < a.horizon; ++k)
    s += w.weights[static_cast<std::size_t>(k)] * base_metric(a.at(k), b.at(k));
  return s;
}

/// Sum product metric on (state window, input window) pairs.
inline double product_dist(const PathWindow& x1, const PathWindow& u1,
                           const PathWindow& x2, const PathWindow& u2,
                           const WeightVector& w,
                           const BaseMetric& state_metric = euclidean(),
                           const BaseMetric& input_metric = capped_euclidean()) {
  return state_seq_dist(x1, x2, w, state_metric) +
         state_seq_dist(u1, u2, w, input_metric);
}

inline double product_dist(const PathPair& p1, const PathPair& p2,
                           const WeightVector& w,
                           const BaseMetric& state_metric = euclidean(),
                           const BaseMetric& input_metric = capped_euclidean()) {
  return product_dist(p1.state, p1.input, p2.state, p2.input, w, state_metric,
                      input_metric);
}

/// State and input base metrics used in every product-distance evaluation.
struct ProductMetricSpec {
  BaseMetric state = euclidean();
  BaseMetric input = capped_euclidean();
};

}  // namespace stochesp
