#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stochesp/rng.hpp"
#include "stochesp/seqspace.hpp"
#include "stochesp/util.hpp"

namespace stochesp {

enum class Dist { std_normal, uniform, rademacher, student_t };

inline const char* to_string(Dist d) {
  switch (d) {
    case Dist::std_normal: return "std_normal";
    case Dist::uniform: return "uniform";
    case Dist::rademacher: return "rademacher";
    case Dist::student_t: return "student_t";
  }
  return "?";
}

/// Stateless sampler for iid hidden inputs. Each draw is a pure function of
/// (seed, path, time index, component), so paths are independent substreams
/// and results do not depend on evaluation order.
struct HiddenSampler {
  Dist dist = Dist::std_normal;
  int dim = 1;
  std::uint64_t seed = 1;
  double a = 0.0, b = 1.0;  // uniform bounds
  double nu = 5.0;          // student_t degrees of freedom
  double scale = 1.0;       // multiplies every draw

  void validate() const {
    if (dim < 1) throw std::domain_error("sampler: dim must be >= 1");
    if (dist == Dist::uniform && !(a < b))
      throw std::domain_error("sampler: uniform needs a < b");
    if (dist == Dist::student_t && !(nu > 0.0))
      throw std::domain_error("sampler: student_t needs nu > 0");
  }

  /// True when E|Z|^q is finite.
  bool finite_moment(double q) const {
    return dist != Dist::student_t || nu > q;
  }

  double sample(std::uint64_t path, std::uint32_t time_index,
                std::uint32_t component) const {
    switch (dist) {
      case Dist::std_normal:
        return scale * counter_normal(seed, path, time_index, component);
      case Dist::uniform: {
        const auto u = counter_uniforms(seed, path, time_index, component);
        return scale * (a + (b - a) * u[0]);
      }
      case Dist::rademacher: {
        const auto u = counter_uniforms(seed, path, time_index, component);
        return scale * (u[0] < 0.5 ? -1.0 : 1.0);
      }
      case Dist::student_t:
        return scale * counter_student_t(seed, path, time_index, component, nu);
    }
    return 0.0;
  }

  std::string id() const {
    std::ostringstream os;
    os << to_string(dist);
    if (dist == Dist::uniform) os << "(" << a << "," << b << ")";
    if (dist == Dist::student_t) os << "(nu=" << nu << ")";
    if (scale != 1.0) os << "*" << scale;
    return os.str();
  }
};

/// Causal input-generating map applied windowwise. The output at time t is
/// a function of entries at times <= t only; for FIR stages lags reaching
/// past the window's left edge are zero-padded.
class CausalFilter {
 public:
  enum class Kind { identity, fir, pointwise, compose };
  enum class Map { tanh_map, abs_map, square_map, sin_map };

  static CausalFilter identity(int dim) {
    CausalFilter f;
    f.kind_ = Kind::identity;
    f.in_dim_ = f.out_dim_ = dim;
    return f;
  }

  static CausalFilter fir(std::vector<Eigen::MatrixXd> kernel) {
    if (kernel.empty()) throw std::invalid_argument("fir: empty kernel");
    const auto rows = kernel.front().rows();
    const auto cols = kernel.front().cols();
    for (const auto& k : kernel)
      if (k.rows() != rows || k.cols() != cols)
        throw std::invalid_argument("fir: kernel matrices disagree in shape");
    CausalFilter f;
    f.kind_ = Kind::fir;
    f.kernel_ = std::move(kernel);
    f.in_dim_ = static_cast<int>(cols);
    f.out_dim_ = static_cast<int>(rows);
    return f;
  }

  /// Scalar FIR: output_t = sum_j taps[j] * z_{t-j}, componentwise.
  static CausalFilter fir_scalar(const std::vector<double>& taps, int dim = 1) {
    std::vector<Eigen::MatrixXd> kernel;
    kernel.reserve(taps.size());
    for (double t : taps)
      kernel.push_back(t * Eigen::MatrixXd::Identity(dim, dim));
    return fir(std::move(kernel));
  }

  static CausalFilter pointwise(Map map, int dim) {
    CausalFilter f;
    f.kind_ = Kind::pointwise;
    f.map_ = map;
    f.in_dim_ = f.out_dim_ = dim;
    return f;
  }

  static CausalFilter compose(std::vector<CausalFilter> stages) {
    if (stages.empty()) throw std::invalid_argument("compose: empty stage list");
    for (std::size_t i = 1; i < stages.size(); ++i)
      if (stages[i].input_dim() != stages[i - 1].output_dim())
        throw std::invalid_argument("compose: stage dimension mismatch");
    CausalFilter f;
    f.kind_ = Kind::compose;
    f.in_dim_ = stages.front().input_dim();
    f.out_dim_ = stages.back().output_dim();
    f.stages_ = std::make_shared<std::vector<CausalFilter>>(std::move(stages));
    return f;
  }

  Kind kind() const { return kind_; }
  int input_dim() const { return in_dim_; }
  int output_dim() const { return out_dim_; }
  bool is_identity() const { return kind_ == Kind::identity; }

  PathWindow apply(const PathWindow& z) const {
    if (z.dim != in_dim_)
      throw std::invalid_argument("apply_filter: window dim " +
                                  std::to_string(z.dim) + " != filter input dim " +
                                  std::to_string(in_dim_));
    switch (kind_) {
      case Kind::identity:
        return z;
      case Kind::pointwise: {
        PathWindow out = z;
        for (auto& v : out.data) v = eval_map(v);
        return out;
      }
      case Kind::fir: {
        PathWindow out(out_dim_, z.horizon);
        const int K = static_cast<int>(kernel_.size());
        for (int k = 0; k < z.horizon; ++k) {
          Eigen::Map<Eigen::VectorXd> ov(out.at(k).data(), out_dim_);
          ov.setZero();
          for (int j = 0; j < K; ++j) {
            const int src = k + j;  // lag j is one step older per unit
            if (src >= z.horizon) break;
            Eigen::Map<const Eigen::VectorXd> zv(z.at(src).data(), in_dim_);
            ov += kernel_[static_cast<std::size_t>(j)] * zv;
          }
        }
        return out;
      }
      case Kind::compose: {
        PathWindow cur = z;
        for (const auto& stage : *stages_) cur = stage.apply(cur);
        return cur;
      }
    }
    return z;
  }

  std::string id() const {
    switch (kind_) {
      case Kind::identity: return "identity";
      case Kind::fir: return "fir(" + std::to_string(kernel_.size()) + " lags)";
      case Kind::pointwise:
        switch (map_) {
          case Map::tanh_map: return "pointwise(tanh)";
          case Map::abs_map: return "pointwise(abs)";
          case Map::square_map: return "pointwise(square)";
          case Map::sin_map: return "pointwise(sin)";
        }
        return "pointwise";
      case Kind::compose: {
        std::string s = "compose(";
        for (std::size_t i = 0; i < stages_->size(); ++i)
          s += (i ? "," : "") + (*stages_)[i].id();
        return s + ")";
      }
    }
    return "?";
  }

 private:
  double eval_map(double v) const {
    switch (map_) {
      case Map::tanh_map: return std::tanh(v);
      case Map::abs_map: return std::abs(v);
      case Map::square_map: return v * v;
      case Map::sin_map: return std::sin(v);
    }
    return v;
  }

  Kind kind_ = Kind::identity;
  Map map_ = Map::tanh_map;
  std::vector<Eigen::MatrixXd> kernel_;
  std::shared_ptr<std::vector<CausalFilter>> stages_;
  int in_dim_ = 1, out_dim_ = 1;
};

inline PathWindow apply_filter(const CausalFilter& filter, const PathWindow& z) {
  return filter.apply(z);
}

struct EnsembleMeta {
  std::uint64_t seed = 0;
  std::string model_id;
  std::string filter_id;
};

/// N equally weighted sampled paths: the empirical stand-in for a joint law
/// on state x input windows. States stay empty until a dynamics run
/// attaches them; hidden windows are retained when a filter was applied.
struct Ensemble {
  std::vector<PathWindow> inputs;
  std::vector<PathWindow> states;
  std::vector<PathWindow> hidden;
  EnsembleMeta meta;

  int n_paths() const { return static_cast<int>(inputs.size()); }
  bool has_states() const { return !states.empty(); }
  int horizon() const { return inputs.empty() ? 0 : inputs.front().horizon; }
  int input_dim() const { return inputs.empty() ? 0 : inputs.front().dim; }
  int state_dim() const { return states.empty() ? 0 : states.front().dim; }

  PathPair pair(int i) const {
    return {states[static_cast<std::size_t>(i)],
            inputs[static_cast<std::size_t>(i)]};
  }
};

/// N windows of iid hidden draws; deterministic under a fixed seed.
inline Ensemble sample_hidden(const HiddenSampler& s, int n_paths, int horizon) {
  s.validate();
  if (n_paths < 1 || horizon < 1)
    throw std::domain_error("sample_hidden: n_paths and horizon must be >= 1");
  Ensemble e;
  e.meta.seed = s.seed;
  e.meta.filter_id = "identity";
  e.inputs.resize(static_cast<std::size_t>(n_paths));
  for (int i = 0; i < n_paths; ++i) {
    PathWindow w(s.dim, horizon);
    for (int k = 0; k < horizon; ++k) {
      auto row = w.at(k);
      for (int c = 0; c < s.dim; ++c)
        row[c] = s.sample(static_cast<std::uint64_t>(i),
                          static_cast<std::uint32_t>(k),
                          static_cast<std::uint32_t>(c));
    }
    e.inputs[static_cast<std::size_t>(i)] = std::move(w);
  }
  return e;
}

/// Observed inputs U = V(Z). Hidden windows are kept alongside for
/// causal-coupling diagnostics.
inline Ensemble generate_inputs(const HiddenSampler& s, const CausalFilter& V,
                                int n_paths, int horizon, int n_threads = 1) {
  Ensemble hidden = sample_hidden(s, n_paths, horizon);
  if (V.is_identity()) {
    hidden.meta.filter_id = V.id();
    return hidden;
  }
  Ensemble e;
  e.meta.seed = s.seed;
  e.meta.filter_id = V.id();
  e.inputs.resize(hidden.inputs.size());
  parallel_for(hidden.inputs.size(), n_threads,
               [&](std::size_t i) { e.inputs[i] = V.apply(hidden.inputs[i]); });
  e.hidden = std::move(hidden.inputs);
  return e;
}

}  // namespace stochesp
