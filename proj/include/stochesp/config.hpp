#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochesp/inputs.hpp"
#include "stochesp/models.hpp"
#include "stochesp/wasserstein.hpp"

namespace stochesp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Sectioned key = value text. Sections in square brackets, scalars and
/// comma-separated arrays, full-line # comments only. Every key must be
/// consumed by the loader; leftovers are hard errors with line numbers.
class ConfigReader {
 public:
  struct Entry {
    std::string section, key, value;
    int line = 0;
    mutable bool consumed = false;
  };

  static ConfigReader parse_string(const std::string& text,
                                   const std::string& origin = "<config>") {
    ConfigReader r;
    r.origin_ = origin;
    r.raw_text_ = text;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": unterminated section header");
        section = detail::trim(t.substr(1, t.size() - 2));
        if (section.empty())
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": empty section name");
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected key = value");
      Entry e;
      e.section = section;
      e.key = detail::trim(t.substr(0, eq));
      e.value = detail::trim(t.substr(eq + 1));
      e.line = lineno;
      if (e.key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty key");
      for (const auto& prev : r.entries_)
        if (prev.section == e.section && prev.key == e.key)
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": duplicate key '" + e.key + "'");
      r.entries_.push_back(std::move(e));
    }
    return r;
  }

  static ConfigReader parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
  }

  const std::string& raw_text() const { return raw_text_; }

  std::optional<std::string> get(const std::string& section,
                                 const std::string& key) const {
    for (const auto& e : entries_)
      if (e.section == section && e.key == key) {
        e.consumed = true;
        return e.value;
      }
    return std::nullopt;
  }

  bool has_section(const std::string& section) const {
    for (const auto& e : entries_)
      if (e.section == section) return true;
    return false;
  }

  std::string get_string(const std::string& s, const std::string& k,
                         const std::string& fallback) const {
    auto v = get(s, k);
    return v ? *v : fallback;
  }

  double get_double(const std::string& s, const std::string& k,
                    double fallback) const {
    auto v = get(s, k);
    if (!v) return fallback;
    return parse_double(s, k, *v);
  }

  long get_long(const std::string& s, const std::string& k, long fallback) const {
    auto v = get(s, k);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      const long x = std::stol(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return x;
    } catch (...) {
      fail(s, k, "expected an integer, got '" + *v + "'");
      return fallback;
    }
  }

  bool get_bool(const std::string& s, const std::string& k, bool fallback) const {
    auto v = get(s, k);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    fail(s, k, "expected true/false, got '" + *v + "'");
    return fallback;
  }

  std::vector<double> get_array(const std::string& s, const std::string& k) const {
    auto v = get(s, k);
    std::vector<double> out;
    if (!v) return out;
    std::istringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ','))
      out.push_back(parse_double(s, k, detail::trim(item)));
    return out;
  }

  void require(bool condition, const std::string& message) const {
    if (!condition) errors_.push_back(message);
  }

  void fail(const std::string& s, const std::string& k,
            const std::string& message) const {
    errors_.push_back(locate(s, k) + ": " + message);
  }

  /// Throws listing every unconsumed key and accumulated validation error.
  void finish() const {
    std::vector<std::string> problems = errors_;
    for (const auto& e : entries_)
      if (!e.consumed)
        problems.push_back(origin_ + ":" + std::to_string(e.line) +
                           ": unknown key '" + qualified(e) + "'");
    if (!problems.empty()) {
      std::string msg = "config validation failed:";
      for (const auto& p : problems) msg += "\n  " + p;
      throw ConfigError(msg);
    }
  }

 private:
  std::string qualified(const Entry& e) const {
    return e.section.empty() ? e.key : e.section + "." + e.key;
  }

  std::string locate(const std::string& s, const std::string& k) const {
    for (const auto& e : entries_)
      if (e.section == s && e.key == k)
        return origin_ + ":" + std::to_string(e.line);
    return origin_;
  }

  double parse_double(const std::string& s, const std::string& k,
                      const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return x;
    } catch (...) {
      fail(s, k, "expected a number, got '" + v + "'");
      return 0.0;
    }
  }

  std::vector<Entry> entries_;
  mutable std::vector<std::string> errors_;
  std::string origin_;
  std::string raw_text_;
};

/// Everything one experiment run needs, validated up front.
struct ExperimentConfig {
  std::string experiment;
  double p = 1.0;
  int n_paths = 1024;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // expands to {seed, seed+1, seed+2} when empty
  double tol = 1e-3;
  int max_steps = 0;
  std::string out_dir = "out";
  OTMethod ot = OTMethod::auto_select;
  int threads = 0;
  int ot_subsample = 256;
  bool dump_ensemble = false;
  double threshold = 0.0;  // consistency / divergence threshold
  int max_lag = 5;
  bool certified = false;
  double sinkhorn_reg = 1e-2;

  double gamma = 1.5;
  int horizon = 0;
  double tail_tol = 1e-6;

  // [model]
  std::string model_kind;
  double m_omega = 0, m_alpha = 0, m_beta = 0;  // garch
  double m_a = 0.5;                             // linear_test
  int m_state_dim = 1, m_input_dim = 1;
  std::vector<double> m_A, m_C, m_b;            // esn
  std::vector<double> m_A0, m_b0, m_A1, m_b1;   // affine, degree <= 1
  double m_h = 0.1;                             // euler_sde
  std::string m_form = "drifted";
  std::vector<double> m_alpha_x, m_alpha_y, m_beta_x, m_beta_y;

  // [inputs]
  std::string in_dist = "std_normal";
  double in_a = 0.0, in_b = 1.0, in_nu = 5.0, in_scale = 1.0;
  int in_dim = 0;  // 0: model input dim
  std::string in_filter = "identity";
  std::vector<double> in_kernel;
  std::string in_map = "tanh";

  // [counterexample]
  double ce_alpha = 0.4;
  int ce_t_max = 48;

  // [esn_gap]
  double gap_c = 0.01;
  double gap_input_std = 3.0;

  std::string raw_text;

  int resolved_horizon() const {
    return horizon > 0 ? horizon : horizon_for_tail(gamma, tail_tol);
  }

  std::vector<std::uint64_t> seed_list(std::size_t count) const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(seed + i);
    return out;
  }

  StateModel build_model() const {
    if (model_kind == "garch") return StateModel::garch(m_omega, m_alpha, m_beta);
    if (model_kind == "linear_test") return StateModel::linear_test(m_a);
    if (model_kind == "esn") {
      EsnParams p;
      const int n = m_state_dim, m = m_input_dim;
      p.A = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                           Eigen::Dynamic, Eigen::RowMajor>>(
          m_A.data(), n, n);
      p.C = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                           Eigen::Dynamic, Eigen::RowMajor>>(
          m_C.data(), n, m);
      p.b = Eigen::Map<const Eigen::VectorXd>(m_b.data(), n);
      return StateModel::esn(std::move(p));
    }
    if (model_kind == "affine") {
      AffineParams p;
      const int n = m_state_dim;
      p.A0 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                            Eigen::Dynamic, Eigen::RowMajor>>(
          m_A0.data(), n, n);
      p.b0 = Eigen::Map<const Eigen::VectorXd>(m_b0.data(), n);
      const int m = m_input_dim;
      for (int i = 0; i < m && !m_A1.empty(); ++i)
        p.A1.push_back(
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                           Eigen::Dynamic, Eigen::RowMajor>>(
                m_A1.data() + static_cast<std::size_t>(i) * n * n, n, n));
      for (int i = 0; i < m && !m_b1.empty(); ++i)
        p.b1.push_back(Eigen::Map<const Eigen::VectorXd>(
            m_b1.data() + static_cast<std::size_t>(i) * n, n));
      return StateModel::affine(std::move(p));
    }
    if (model_kind == "euler_sde") {
      EulerSdeParams p;
      p.h = m_h;
      p.form = m_form == "paper" ? EulerForm::paper : EulerForm::drifted;
      p.alpha = {m_alpha_x, m_alpha_y};
      p.beta = {m_beta_x, m_beta_y};
      return StateModel::euler_sde(std::move(p));
    }
    throw ConfigError("unsupported model kind '" + model_kind + "'");
  }

  HiddenSampler build_sampler(std::uint64_t run_seed) const {
    HiddenSampler s;
    if (in_dist == "std_normal") s.dist = Dist::std_normal;
    else if (in_dist == "uniform") s.dist = Dist::uniform;
    else if (in_dist == "rademacher") s.dist = Dist::rademacher;
    else if (in_dist == "student_t") s.dist = Dist::student_t;
    else throw ConfigError("unsupported input dist '" + in_dist + "'");
    s.a = in_a;
    s.b = in_b;
    s.nu = in_nu;
    s.scale = in_scale;
    s.dim = in_dim;
    s.seed = run_seed;
    s.validate();
    return s;
  }

  CausalFilter build_filter() const {
    if (in_filter == "identity") return CausalFilter::identity(in_dim);
    if (in_filter == "fir") return CausalFilter::fir_scalar(in_kernel, in_dim);
    const auto map = [this] {
      if (in_map == "tanh") return CausalFilter::Map::tanh_map;
      if (in_map == "abs") return CausalFilter::Map::abs_map;
      if (in_map == "square") return CausalFilter::Map::square_map;
      if (in_map == "sin") return CausalFilter::Map::sin_map;
      throw ConfigError("unsupported pointwise map '" + in_map + "'");
    };
    if (in_filter == "pointwise") return CausalFilter::pointwise(map(), in_dim);
    if (in_filter == "fir_then_pointwise")
      return CausalFilter::compose({CausalFilter::fir_scalar(in_kernel, in_dim),
                                    CausalFilter::pointwise(map(), in_dim)});
    throw ConfigError("unsupported filter '" + in_filter + "'");
  }
};

inline OTMethod parse_ot_method(const std::string& s) {
  if (s == "auto") return OTMethod::auto_select;
  if (s == "quantile") return OTMethod::quantile_1d;
  if (s == "assignment") return OTMethod::assignment;
  if (s == "sinkhorn") return OTMethod::sinkhorn;
  throw ConfigError("unknown ot method '" + s + "'");
}

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "converge",         "certify", "consistency",
      "counterexample_d", "esn_gap", "stationarity"};
  return names;
}

inline ExperimentConfig load_config(const ConfigReader& r) {
  ExperimentConfig c;
  c.raw_text = r.raw_text();

  c.experiment = r.get_string("", "experiment", "");
  r.require(std::find(experiment_names().begin(), experiment_names().end(),
                      c.experiment) != experiment_names().end(),
            "experiment must be one of converge|certify|consistency|"
            "counterexample_d|esn_gap|stationarity, got '" +
                c.experiment + "'");
  c.p = r.get_double("", "p", c.p);
  r.require(c.p >= 1.0, "p must be >= 1");
  c.n_paths = static_cast<int>(r.get_long("", "n_paths", c.n_paths));
  r.require(c.n_paths >= 1, "n_paths must be >= 1");
  c.seed = static_cast<std::uint64_t>(r.get_long("", "seed", 1));
  for (double s : r.get_array("", "seeds"))
    c.seeds.push_back(static_cast<std::uint64_t>(s));
  c.tol = r.get_double("", "tol", c.tol);
  r.require(c.tol > 0.0, "tol must be > 0");
  c.max_steps = static_cast<int>(r.get_long("", "max_steps", 0));
  c.out_dir = r.get_string("", "out_dir", c.out_dir);
  const std::string ot = r.get_string("", "ot", "auto");
  try {
    c.ot = parse_ot_method(ot);
  } catch (const ConfigError& e) {
    r.fail("", "ot", e.what());
  }
  c.threads = static_cast<int>(r.get_long("", "threads", 0));
  c.ot_subsample = static_cast<int>(r.get_long("", "ot_subsample", 256));
  r.require(c.ot_subsample <= 1024, "ot_subsample must be <= 1024");
  c.dump_ensemble = r.get_bool("", "dump_ensemble", false);
  c.threshold = r.get_double("", "threshold", 0.0);
  c.max_lag = static_cast<int>(r.get_long("", "max_lag", 5));
  c.certified = r.get_bool("", "certified", false);
  c.sinkhorn_reg = r.get_double("", "sinkhorn_reg", 1e-2);

  c.gamma = r.get_double("weights", "gamma", 0.0);
  c.horizon = static_cast<int>(r.get_long("weights", "horizon", 0));
  c.tail_tol = r.get_double("weights", "tail_tol", 1e-6);
  const bool needs_weights = c.experiment != "counterexample_d" || c.gamma > 0;
  if (c.experiment == "counterexample_d" && c.gamma <= 0) c.gamma = 2.6;
  if (needs_weights)
    r.require(c.gamma > 1.0, "[weights] gamma must be > 1");
  if (c.horizon > 0) r.require(c.horizon >= 1, "[weights] horizon must be >= 1");

  const bool needs_model =
      c.experiment == "converge" || c.experiment == "certify" ||
      c.experiment == "consistency" || c.experiment == "stationarity";
  c.model_kind = r.get_string("model", "kind", "");
  if (needs_model) {
    r.require(!c.model_kind.empty(), "[model] kind is required");
    if (c.model_kind == "garch") {
      c.m_omega = r.get_double("model", "omega", 0.0);
      c.m_alpha = r.get_double("model", "alpha", 0.0);
      c.m_beta = r.get_double("model", "beta", 0.0);
      r.require(c.m_omega >= 0 && c.m_alpha >= 0 && c.m_beta >= 0,
                "[model] garch parameters must be >= 0");
    } else if (c.model_kind == "linear_test") {
      c.m_a = r.get_double("model", "a", 0.5);
    } else if (c.model_kind == "esn") {
      c.m_state_dim = static_cast<int>(r.get_long("model", "state_dim", 0));
      c.m_input_dim = static_cast<int>(r.get_long("model", "input_dim", 0));
      c.m_A = r.get_array("model", "A");
      c.m_C = r.get_array("model", "C");
      c.m_b = r.get_array("model", "b");
      r.require(c.m_state_dim >= 1 && c.m_input_dim >= 1,
                "[model] esn needs state_dim and input_dim");
      const std::size_t n = static_cast<std::size_t>(c.m_state_dim);
      const std::size_t m = static_cast<std::size_t>(c.m_input_dim);
      r.require(c.m_A.size() == n * n, "[model] A must have state_dim^2 entries");
      r.require(c.m_C.size() == n * m,
                "[model] C must have state_dim*input_dim entries");
      r.require(c.m_b.size() == n, "[model] b must have state_dim entries");
    } else if (c.model_kind == "affine") {
      c.m_state_dim = static_cast<int>(r.get_long("model", "state_dim", 1));
      c.m_input_dim = static_cast<int>(r.get_long("model", "input_dim", 1));
      c.m_A0 = r.get_array("model", "A0");
      c.m_b0 = r.get_array("model", "b0");
      c.m_A1 = r.get_array("model", "A1");
      c.m_b1 = r.get_array("model", "b1");
      const std::size_t n = static_cast<std::size_t>(c.m_state_dim);
      const std::size_t m = static_cast<std::size_t>(c.m_input_dim);
      r.require(c.m_A0.size() == n * n, "[model] A0 must have state_dim^2 entries");
      r.require(c.m_b0.size() == n, "[model] b0 must have state_dim entries");
      r.require(c.m_A1.empty() || c.m_A1.size() == m * n * n,
                "[model] A1 must hold input_dim blocks of state_dim^2 entries");
      r.require(c.m_b1.empty() || c.m_b1.size() == m * n,
                "[model] b1 must hold input_dim blocks of state_dim entries");
      r.require(!(c.m_A1.empty() && c.m_b1.empty()) || c.m_input_dim == 1,
                "[model] affine without A1/b1 ignores the input; input_dim "
                "must be 1");
    } else if (c.model_kind == "euler_sde") {
      c.m_h = r.get_double("model", "h", 0.1);
      c.m_form = r.get_string("model", "form", "drifted");
      c.m_alpha_x = r.get_array("model", "alpha_x");
      c.m_alpha_y = r.get_array("model", "alpha_y");
      c.m_beta_x = r.get_array("model", "beta_x");
      c.m_beta_y = r.get_array("model", "beta_y");
      r.require(c.m_h > 0, "[model] h must be > 0");
      r.require(c.m_form == "drifted" || c.m_form == "paper",
                "[model] form must be drifted|paper");
      r.require(c.m_alpha_x.size() == c.m_alpha_y.size() && !c.m_alpha_x.empty(),
                "[model] alpha_x/alpha_y must be equal-length, nonempty");
      r.require(c.m_beta_x.size() == c.m_beta_y.size() && !c.m_beta_x.empty(),
                "[model] beta_x/beta_y must be equal-length, nonempty");
    } else {
      r.fail("model", "kind", "unknown model kind '" + c.model_kind + "'");
    }
  }

  const bool needs_inputs = needs_model || c.experiment == "esn_gap";
  if (needs_inputs || r.has_section("inputs")) {
    c.in_dist = r.get_string("inputs", "dist", "std_normal");
    r.require(c.in_dist == "std_normal" || c.in_dist == "uniform" ||
                  c.in_dist == "rademacher" || c.in_dist == "student_t",
              "[inputs] dist must be std_normal|uniform|rademacher|student_t");
    c.in_a = r.get_double("inputs", "a", 0.0);
    c.in_b = r.get_double("inputs", "b", 1.0);
    c.in_nu = r.get_double("inputs", "nu", 5.0);
    c.in_scale = r.get_double("inputs", "scale", 1.0);
    c.in_dim = static_cast<int>(r.get_long("inputs", "dim", 0));
    c.in_filter = r.get_string("inputs", "filter", "identity");
    r.require(c.in_filter == "identity" || c.in_filter == "fir" ||
                  c.in_filter == "pointwise" ||
                  c.in_filter == "fir_then_pointwise",
              "[inputs] filter must be identity|fir|pointwise|fir_then_pointwise");
    c.in_kernel = r.get_array("inputs", "kernel");
    if (c.in_filter == "fir" || c.in_filter == "fir_then_pointwise")
      r.require(!c.in_kernel.empty(), "[inputs] fir filter needs a kernel");
    c.in_map = r.get_string("inputs", "map", "tanh");
  }
  if (c.in_dim == 0) {
    if (c.model_kind == "esn" || c.model_kind == "affine")
      c.in_dim = c.m_input_dim;
    else if (c.experiment == "esn_gap")
      c.in_dim = 2;
    else
      c.in_dim = 1;
  }

  if (c.experiment == "counterexample_d" || r.has_section("counterexample")) {
    c.ce_alpha = r.get_double("counterexample", "alpha", 0.4);
    c.ce_t_max = static_cast<int>(r.get_long("counterexample", "t_max", 48));
    r.require(c.ce_alpha > 0 && c.ce_alpha < 0.5,
              "[counterexample] alpha must be in (0, 1/2)");
    if (c.experiment == "counterexample_d")
      r.require(c.p > 1.0, "counterexample_d requires p > 1");
  }

  if (c.experiment == "esn_gap" || r.has_section("esn_gap")) {
    c.gap_c = r.get_double("esn_gap", "c", 0.01);
    c.gap_input_std = r.get_double("esn_gap", "input_std", 3.0);
    r.require(c.gap_c > 0, "[esn_gap] c must be > 0");
    r.require(c.gap_input_std > 0, "[esn_gap] input_std must be > 0");
  }

  if (c.threshold == 0.0) {
    if (c.experiment == "consistency") c.threshold = 5e-3;
    if (c.experiment == "counterexample_d") c.threshold = 1e6;
  }

  r.finish();
  return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  return load_config(ConfigReader::parse_file(path));
}

}  // namespace stochesp
