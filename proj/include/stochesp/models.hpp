#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stochesp/seqspace.hpp"

namespace stochesp {

enum class ModelKind { garch, affine, esn, euler_sde, linear_test };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::garch: return "garch";
    case ModelKind::affine: return "affine";
    case ModelKind::esn: return "esn";
    case ModelKind::euler_sde: return "euler_sde";
    case ModelKind::linear_test: return "linear_test";
  }
  return "?";
}

struct GarchParams {
  double omega = 0.0, alpha = 0.0, beta = 0.0;
};

/// Coefficients of a tensor polynomial of degree <= 2 in the input:
/// A(u) = A0 + sum_i u_i A1[i] + sum_{i,j} u_i u_j A2[i*m+j], and b(u)
/// with the same layout. A1/A2 (b1/b2) may be empty for lower degree.
struct AffineParams {
  Eigen::MatrixXd A0;
  std::vector<Eigen::MatrixXd> A1, A2;
  Eigen::VectorXd b0;
  std::vector<Eigen::VectorXd> b1, b2;
};

struct EsnParams {
  Eigen::MatrixXd A, C;
  Eigen::VectorXd b;
};

/// Piecewise-linear scalar function given by sorted knots; constant
/// extrapolation outside the table keeps it globally Lipschitz.
struct PiecewiseLinear {
  std::vector<double> x, y;

  double operator()(double t) const {
    if (x.empty()) return 0.0;
    if (t <= x.front()) return y.front();
    if (t >= x.back()) return y.back();
    std::size_t hi = 1;
    while (x[hi] < t) ++hi;
    const double w = (t - x[hi - 1]) / (x[hi] - x[hi - 1]);
    return y[hi - 1] + w * (y[hi] - y[hi - 1]);
  }

  bool constant() const {
    for (double v : y)
      if (v != y.front()) return false;
    return true;
  }
};

enum class EulerForm { paper, drifted };

struct EulerSdeParams {
  PiecewiseLinear alpha, beta;
  double h = 0.1;
  EulerForm form = EulerForm::drifted;
};

struct LinearTestParams {
  double a = 0.5;
};

/// One-step state map f: X x U -> X with shape metadata and anchor point.
/// Immutable after construction; step/extend_F/apply_fc are pure.
class StateModel {
 public:
  static StateModel garch(double omega, double alpha, double beta) {
    if (omega < 0.0 || alpha < 0.0 || beta < 0.0)
      throw std::domain_error("garch: omega, alpha, beta must be >= 0");
    StateModel m;
    m.kind_ = ModelKind::garch;
    m.params_ = GarchParams{omega, alpha, beta};
    m.state_dim_ = 1;
    m.input_dim_ = 1;
    m.anchor_ = {0.0};
    return m;
  }

  static StateModel affine(AffineParams p) {
    const auto n = p.A0.rows();
    if (p.A0.cols() != n || p.b0.size() != n)
      throw std::invalid_argument("affine: A0 must be square and match b0");
    const int m_dim =
        p.A1.empty() ? (p.b1.empty() ? 0 : static_cast<int>(p.b1.size()))
                     : static_cast<int>(p.A1.size());
    for (const auto& M : p.A1)
      if (M.rows() != n || M.cols() != n)
        throw std::invalid_argument("affine: A1 coefficient shape mismatch");
    if (!p.A2.empty() &&
        p.A2.size() != static_cast<std::size_t>(m_dim) * m_dim)
      throw std::invalid_argument("affine: A2 must hold m*m coefficients");
    if (!p.b1.empty() && p.b1.size() != static_cast<std::size_t>(m_dim))
      throw std::invalid_argument("affine: b1 must hold m coefficients");
    StateModel m;
    m.kind_ = ModelKind::affine;
    m.state_dim_ = static_cast<int>(n);
    m.input_dim_ = m_dim > 0 ? m_dim : 1;
    m.params_ = std::move(p);
    m.anchor_.assign(static_cast<std::size_t>(n), 0.0);
    return m;
  }

  static StateModel esn(EsnParams p) {
    const auto n = p.A.rows();
    if (p.A.cols() != n) throw std::invalid_argument("esn: A must be square");
    if (p.C.rows() != n || p.b.size() != n)
      throw std::invalid_argument("esn: C and b must match A");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p.C);
    if (qr.rank() < std::min(p.C.rows(), p.C.cols()))
      throw std::invalid_argument("esn: C is rank deficient");
    StateModel m;
    m.kind_ = ModelKind::esn;
    m.state_dim_ = static_cast<int>(n);
    m.input_dim_ = static_cast<int>(p.C.cols());
    m.params_ = std::move(p);
    m.anchor_.assign(static_cast<std::size_t>(n), 0.0);
    return m;
  }

  static StateModel euler_sde(EulerSdeParams p) {
    if (!(p.h > 0.0)) throw std::domain_error("euler_sde: step h must be > 0");
    StateModel m;
    m.kind_ = ModelKind::euler_sde;
    m.params_ = std::move(p);
    m.state_dim_ = 1;
    m.input_dim_ = 1;
    m.anchor_ = {0.0};
    return m;
  }

  static StateModel linear_test(double a) {
    StateModel m;
    m.kind_ = ModelKind::linear_test;
    m.params_ = LinearTestParams{a};
    m.state_dim_ = 1;
    m.input_dim_ = 1;
    m.anchor_ = {0.0};
    return m;
  }

  ModelKind kind() const { return kind_; }
  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }
  std::span<const double> anchor() const { return anchor_; }

  void set_anchor(std::vector<double> a) {
    if (a.size() != static_cast<std::size_t>(state_dim_))
      throw std::invalid_argument("set_anchor: dimension mismatch");
    anchor_ = std::move(a);
  }

  template <class T>
  const T& params() const {
    return std::get<T>(params_);
  }

  /// One application of f. Writes f(x,u) into out; out may not alias x.
  void step(std::span<const double> x, std::span<const double> u,
            std::span<double> out) const {
    if (x.size() != static_cast<std::size_t>(state_dim_) ||
        u.size() != static_cast<std::size_t>(input_dim_) ||
        out.size() != static_cast<std::size_t>(state_dim_))
      throw std::invalid_argument("step: dimension mismatch");
    switch (kind_) {
      case ModelKind::garch: {
        const auto& p = std::get<GarchParams>(params_);
        if (x[0] < 0.0)
          throw std::domain_error("garch step: state must be >= 0");
        out[0] = p.omega + (p.alpha * u[0] * u[0] + p.beta) * x[0];
        return;
      }
      case ModelKind::linear_test: {
        const auto& p = std::get<LinearTestParams>(params_);
        out[0] = p.a * x[0] + u[0];
        return;
      }
      case ModelKind::euler_sde: {
        const auto& p = std::get<EulerSdeParams>(params_);
        const double drift = p.alpha(x[0]) * p.h + p.beta(x[0]) * u[0];
        out[0] = (p.form == EulerForm::paper ? 1.0 : x[0]) + drift;
        return;
      }
      case ModelKind::esn: {
        const auto& p = std::get<EsnParams>(params_);
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), state_dim_);
        Eigen::Map<const Eigen::VectorXd> uv(u.data(), input_dim_);
        Eigen::Map<Eigen::VectorXd> ov(out.data(), state_dim_);
        ov = (p.A * xv + p.C * uv + p.b).array().tanh();
        return;
      }
      case ModelKind::affine: {
        const auto& p = std::get<AffineParams>(params_);
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), state_dim_);
        Eigen::Map<Eigen::VectorXd> ov(out.data(), state_dim_);
        Eigen::VectorXd r = p.A0 * xv + p.b0;
        const int m = input_dim_;
        for (std::size_t i = 0; i < p.A1.size(); ++i) r += u[i] * (p.A1[i] * xv);
        for (std::size_t i = 0; i < p.b1.size(); ++i) r += u[i] * p.b1[i];
        for (std::size_t i = 0; i < p.A2.size(); ++i)
          r += u[i / m] * u[i % m] * (p.A2[i] * xv);
        for (std::size_t i = 0; i < p.b2.size(); ++i)
          r += u[i / m] * u[i % m] * p.b2[i];
        ov = r;
        return;
      }
    }
  }

  std::vector<double> step(const std::vector<double>& x,
                           const std::vector<double>& u) const {
    std::vector<double> out(static_cast<std::size_t>(state_dim_));
    step(std::span<const double>(x), std::span<const double>(u),
         std::span<double>(out));
    return out;
  }

  /// Clamp a point into the model's state domain (used by samplers that
  /// probe contractivity over a box).
  void clamp_to_domain(std::span<double> x) const {
    if (kind_ == ModelKind::garch) {
      if (x[0] < 0.0) x[0] = 0.0;
    } else if (kind_ == ModelKind::esn) {
      for (auto& v : x) v = std::clamp(v, -1.0, 1.0);
    }
  }

  std::string id() const {
    std::ostringstream os;
    os << to_string(kind_);
    switch (kind_) {
      case ModelKind::garch: {
        const auto& p = std::get<GarchParams>(params_);
        os << "(omega=" << p.omega << ",alpha=" << p.alpha << ",beta=" << p.beta
           << ")";
        break;
      }
      case ModelKind::linear_test:
        os << "(a=" << std::get<LinearTestParams>(params_).a << ")";
        break;
      default:
        os << "(n=" << state_dim_ << ",m=" << input_dim_ << ")";
        break;
    }
    return os.str();
  }

 private:
  StateModel() = default;

  ModelKind kind_ = ModelKind::linear_test;
  std::variant<GarchParams, AffineParams, EsnParams, EulerSdeParams,
               LinearTestParams>
      params_ = LinearTestParams{};
  int state_dim_ = 1;
  int input_dim_ = 1;
  std::vector<double> anchor_{0.0};
};

/// Windowwise extension F(x,u)_t = f(x_{t-1}, u_t). left_pad supplies the
/// state at time -T-1, one step beyond the window.
inline PathWindow extend_F(const StateModel& model, const PathWindow& x,
                           const PathWindow& u,
                           std::span<const double> left_pad) {
  if (x.horizon != u.horizon)
    throw std::invalid_argument("extend_F: horizon mismatch");
  if (x.dim != model.state_dim() || u.dim != model.input_dim())
    throw std::invalid_argument("extend_F: dimension mismatch");
  if (left_pad.size() != static_cast<std::size_t>(model.state_dim()))
    throw std::invalid_argument("extend_F: left_pad dimension mismatch");
  PathWindow out(x.dim, x.horizon);
  const int last = x.horizon - 1;
  for (int k = 0; k < last; ++k) model.step(x.at(k + 1), u.at(k), out.at(k));
  model.step(left_pad, u.at(last), out.at(last));
  return out;
}

inline PathWindow extend_F(const StateModel& model, const PathWindow& x,
                           const PathWindow& u) {
  return extend_F(model, x, u, model.anchor());
}

/// Fc(x,u) = (F(x,u), u); the input component is returned bit-identical.
inline PathPair apply_fc(const StateModel& model, const PathPair& pair,
                         std::span<const double> left_pad) {
  return {extend_F(model, pair.state, pair.input, left_pad), pair.input};
}

inline PathPair apply_fc(const StateModel& model, const PathPair& pair) {
  return apply_fc(model, pair, model.anchor());
}

}  // namespace stochesp
