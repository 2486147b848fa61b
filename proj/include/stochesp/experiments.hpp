#pragma once

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stochesp/certificates.hpp"
#include "stochesp/config.hpp"
#include "stochesp/csv.hpp"
#include "stochesp/dynamics.hpp"
#include "stochesp/util.hpp"
#include "stochesp/version.hpp"

namespace stochesp {

inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

/// Flat key = value run summary.
class Summary {
 public:
  void add(const std::string& key, const std::string& value) {
    kv_.emplace_back(key, value);
  }
  void add(const std::string& key, double value) { add(key, format_g17(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, long value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) {
    add(key, std::string(value ? "true" : "false"));
  }
  void add_cert(const std::string& prefix, const Certificate& c) {
    add(prefix + ".kind", std::string(to_string(c.kind)));
    add(prefix + ".method", std::string(to_string(c.method)));
    add(prefix + ".estimate", c.estimate);
    if (c.method == CertMethod::monte_carlo) {
      add(prefix + ".std_error", c.std_error);
      add(prefix + ".n_samples", c.n_samples);
    }
    add(prefix + ".pass", c.pass);
    if (!c.notes.empty()) add(prefix + ".notes", c.notes);
  }

  std::string text() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> kv_;
};

inline std::string trace_to_csv(const ConvergenceTrace& trace) {
  std::string out = "n,wp_step_coupled,wp_step_ot,mean_state_t-1,var_state_t-1\n";
  for (const auto& s : trace.steps) {
    out += std::to_string(s.n) + ',' + format_g17(s.wp_step_coupled) + ',' +
           format_g17(s.wp_step_ot) + ',' + format_g17(s.mean_state_recent) +
           ',' + format_g17(s.var_state_recent) + '\n';
  }
  return out;
}

inline std::string list_experiments() {
  std::ostringstream os;
  os << "converge          iterate the ensemble map from the anchor start to "
        "its fixed point; fit the geometric step-decay rate\n"
     << "                  keys: [model], [inputs], [weights], n_paths, tol, "
        "max_steps, p, ot, dump_ensemble\n"
     << "certify           evaluate contraction / boundedness certificates and "
        "the fixed-point existence gate\n"
     << "                  keys: [model], [inputs], [weights], p, n_paths\n"
     << "consistency       compare the iterated fixed point against the "
        "deterministic solution filter on shared input draws\n"
     << "                  keys: [model], [inputs], [weights], n_paths, tol, "
        "threshold\n"
     << "counterexample_d  exhibit a second exact fixed point and the divergent "
        "weighted moment sums once the integrability constraint is dropped\n"
     << "                  keys: [counterexample] (alpha, t_max), [weights] "
        "gamma, p > 1, threshold\n"
     << "esn_gap           contraction-on-average under noisy inputs for the "
        "2x2 matrix family whose scaled operator norm exceeds 1\n"
     << "                  keys: [esn_gap] (c, input_std), [inputs], n_paths, "
        "seeds, p\n"
     << "stationarity      check time-shift invariance of the fixed-point "
        "state marginals\n"
     << "                  keys: [model], [inputs], [weights], n_paths, "
        "max_lag\n";
  return os.str();
}

namespace detail {

inline ConvergeOptions converge_options(const ExperimentConfig& c) {
  ConvergeOptions opt;
  opt.p = c.p;
  opt.tol = c.tol;
  opt.max_steps = c.max_steps;
  opt.ot_subsample = c.ot_subsample;
  opt.ot_method =
      c.ot == OTMethod::auto_select ? OTMethod::auto_select : c.ot;
  opt.sinkhorn.reg = c.sinkhorn_reg;
  opt.n_threads = resolve_threads(c.threads);
  return opt;
}

inline void common_header(Summary& s, const ExperimentConfig& c) {
  s.add("experiment", c.experiment);
  s.add("version", std::string(kVersion));
  std::ostringstream hash;
  hash << "0x" << std::hex << fnv1a64(c.raw_text);
  s.add("config_hash", hash.str());
  s.add("p", c.p);
  s.add("seed", static_cast<long>(c.seed));
}

inline void write_outputs(const ExperimentConfig& c, const Summary& s,
                          const std::string& trace_csv,
                          const std::string& trace_name = "trace.csv") {
  const std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);
  if (!trace_csv.empty()) write_file_atomic(dir / trace_name, trace_csv);
  write_file_atomic(dir / "summary.txt", s.text());
}

/// The contraction-moment constant fed to the existence gate, by the
/// cheapest sound route for the configured model.
inline Certificate model_kappa(const ExperimentConfig& c, const StateModel& model,
                               const HiddenSampler& sampler,
                               const CausalFilter& filter) {
  if (model.kind() == ModelKind::garch)
    return garch_kappa(c.m_alpha, c.m_beta, c.p, sampler);
  if (model.kind() == ModelKind::linear_test) {
    Certificate cert;
    cert.kind = CertKind::contractivity;
    cert.method = CertMethod::analytic;
    cert.estimate = std::pow(std::abs(c.m_a), c.p);
    cert.pass = cert.estimate < 1.0;
    cert.notes = "kappa = |a|^p exactly";
    return cert;
  }
  if (!filter.is_identity()) {
    Certificate cert;
    cert.kind = CertKind::contractivity;
    cert.method = CertMethod::monte_carlo;
    cert.estimate = std::numeric_limits<double>::quiet_NaN();
    cert.pass = false;
    cert.notes = "not certified: conditional contraction under a non-identity "
                 "filter is out of scope";
    return cert;
  }
  ContractivityOptions opt;
  opt.seed = c.seed;
  return contractivity_estimate(model, sampler, filter, c.p, opt);
}

}  // namespace detail

inline int run_converge(const ExperimentConfig& c) {
  const WeightVector w = make_weights(c.gamma, c.resolved_horizon());
  const StateModel model = c.build_model();
  const HiddenSampler sampler = c.build_sampler(c.seed);
  const CausalFilter filter = c.build_filter();
  const int threads = resolve_threads(c.threads);

  Summary s;
  detail::common_header(s, c);
  s.add("model", model.id());
  s.add("filter", filter.id());
  s.add("gamma", c.gamma);
  s.add("horizon", w.horizon);
  s.add("n_paths", c.n_paths);
  s.add("tol", c.tol);

  if (c.certified) {
    const Certificate kappa = detail::model_kappa(c, model, sampler, filter);
    const Certificate gate =
        check_theorem_condition(kappa.estimate, c.gamma, c.p);
    s.add_cert("cert.kappa", kappa);
    s.add_cert("cert.theorem_condition", gate);
    if (!kappa.pass || !gate.pass) {
      s.add("converged", false);
      s.add("exit", kExitCheckFailed);
      detail::write_outputs(c, s, "");
      return kExitCheckFailed;
    }
  }

  const Ensemble inputs =
      generate_inputs(sampler, filter, c.n_paths, w.horizon, threads);
  const FixedPointEstimate fp =
      converge_fixed_point(model, inputs, w, detail::converge_options(c));

  s.add("converged", fp.trace.converged);
  s.add("n_final", fp.trace.n_final);
  s.add("fitted_q", fp.trace.fitted_q);
  s.add("fitted_Q", fp.trace.fitted_Q);
  if (!fp.trace.steps.empty()) {
    s.add("mean_state_t-1", fp.trace.steps.back().mean_state_recent);
    s.add("var_state_t-1", fp.trace.steps.back().var_state_recent);
  }
  if (model.kind() == ModelKind::garch && c.m_alpha + c.m_beta < 1.0) {
    const double analytic = c.m_omega / (1.0 - c.m_alpha - c.m_beta);
    s.add("stationary_mean_analytic", analytic);
    if (!fp.trace.steps.empty() && analytic != 0.0)
      s.add("stationary_mean_rel_err",
            std::abs(fp.trace.steps.back().mean_state_recent - analytic) /
                analytic);
  }
  const int exit = fp.trace.converged ? kExitPass : kExitCheckFailed;
  s.add("exit", exit);
  detail::write_outputs(c, s, trace_to_csv(fp.trace));
  if (c.dump_ensemble)
    dump_ensemble_csv(fp.ensemble,
                      std::filesystem::path(c.out_dir) / "fixedpoint.csv");
  return exit;
}

inline int run_certify(const ExperimentConfig& c, std::ostream& out = std::cout) {
  const WeightVector w = make_weights(c.gamma, c.resolved_horizon());
  const StateModel model = c.build_model();
  const HiddenSampler sampler = c.build_sampler(c.seed);
  const CausalFilter filter = c.build_filter();
  const int threads = resolve_threads(c.threads);

  Summary s;
  detail::common_header(s, c);
  s.add("model", model.id());
  s.add("filter", filter.id());
  s.add("gamma", c.gamma);
  s.add("horizon", w.horizon);

  const Certificate kappa = detail::model_kappa(c, model, sampler, filter);
  const Ensemble inputs =
      generate_inputs(sampler, filter, c.n_paths, w.horizon, threads);
  const Certificate bounded = bounded_input_C(model, inputs, w, c.p);
  Certificate gate;
  if (std::isfinite(kappa.estimate) && kappa.estimate > 0.0) {
    gate = check_theorem_condition(kappa.estimate, c.gamma, c.p);
  } else {
    gate.kind = CertKind::theorem_condition;
    gate.estimate = kappa.estimate;
    gate.pass = false;
    gate.notes = "no usable kappa estimate";
  }
  s.add_cert("cert.kappa", kappa);
  s.add_cert("cert.bounded_C", bounded);
  s.add_cert("cert.theorem_condition", gate);

  const auto row = [&](const char* name, const Certificate& cert) {
    out << "  " << name << ": estimate=" << format_g17(cert.estimate);
    if (cert.method == CertMethod::monte_carlo)
      out << " (stderr=" << format_g17(cert.std_error) << ")";
    out << "  [" << (cert.pass ? "pass" : "FAIL") << "]  " << cert.notes << "\n";
  };
  out << "certificates for " << model.id() << " under " << sampler.id() << " / "
      << filter.id() << ":\n";
  row("contractivity kappa", kappa);
  row("bounded input C   ", bounded);
  row("existence gate    ", gate);

  if (model.kind() == ModelKind::esn) {
    const auto& p = model.params<EsnParams>();
    s.add("esn_scaled_norm_identity_D", esn_scaled_norm(p.A));
  }

  const int exit = gate.pass ? kExitPass : kExitCheckFailed;
  s.add("exit", exit);
  detail::write_outputs(c, s, "");
  return exit;
}

inline int run_consistency(const ExperimentConfig& c) {
  const WeightVector w = make_weights(c.gamma, c.resolved_horizon());
  const StateModel model = c.build_model();
  const HiddenSampler sampler = c.build_sampler(c.seed);
  const CausalFilter filter = c.build_filter();
  const int threads = resolve_threads(c.threads);
  const Ensemble inputs =
      generate_inputs(sampler, filter, c.n_paths, w.horizon, threads);

  const ConsistencyResult r =
      consistency_check(model, inputs, w, detail::converge_options(c));

  Summary s;
  detail::common_header(s, c);
  s.add("model", model.id());
  s.add("filter", filter.id());
  s.add("gamma", c.gamma);
  s.add("horizon", w.horizon);
  s.add("n_paths", c.n_paths);
  s.add("distance", r.distance);
  s.add("threshold", c.threshold);
  s.add("converged", r.fp.trace.converged);
  const bool pass = r.fp.trace.converged && r.distance < c.threshold;
  const int exit = pass ? kExitPass : kExitCheckFailed;
  s.add("exit", exit);
  detail::write_outputs(c, s, trace_to_csv(r.fp.trace));
  if (c.dump_ensemble)
    dump_ensemble_csv(r.filtered,
                      std::filesystem::path(c.out_dir) / "fixedpoint.csv");
  return exit;
}

inline int run_counterexample_d(const ExperimentConfig& c,
                                std::ostream& out = std::cout) {
  const int horizon = c.horizon > 0 ? c.horizon : 32;
  const IntegrabilityCounterexample rep = integrability_counterexample(
      c.ce_alpha, c.gamma, c.p, horizon, c.ce_t_max, c.threshold);

  std::string table = "T,partial_sum\n";
  for (std::size_t i = 0; i < rep.partial_sums.size(); ++i)
    table += std::to_string(i + 1) + ',' + format_g17(rep.partial_sums[i]) + '\n';

  Summary s;
  detail::common_header(s, c);
  s.add("alpha", rep.alpha);
  s.add("gamma", rep.gamma);
  s.add("gamma_alpha", rep.gamma * rep.alpha);
  s.add("gamma_alpha_p", rep.gamma * std::pow(rep.alpha, rep.p));
  s.add("resid_zero_path", rep.resid_zero);
  s.add("resid_geometric_path", rep.resid_geometric);
  s.add("partial_sums_monotone", rep.monotone);
  s.add("threshold", rep.threshold);
  s.add("t_at_threshold", rep.t_at_threshold);
  s.add("diverges", rep.diverges);

  out << "second fixed point x_t = alpha^t, alpha = " << rep.alpha
      << ": max interior residual " << format_g17(rep.resid_geometric) << "\n"
      << "weighted moment partial sums reach " << format_g17(rep.threshold)
      << " at T = " << rep.t_at_threshold << "\n";

  const bool pass = rep.resid_zero <= 1e-12 && rep.resid_geometric <= 1e-12 &&
                    rep.monotone && rep.diverges;
  const int exit = pass ? kExitPass : kExitCheckFailed;
  s.add("exit", exit);
  detail::write_outputs(c, s, table);
  return exit;
}

inline int run_esn_gap(const ExperimentConfig& c, std::ostream& out = std::cout) {
  const WeightVector w = make_weights(c.gamma, c.resolved_horizon());
  const CounterexampleMatrix rec = esn_counterexample_norm(c.gap_c);
  const Eigen::Vector2d d_opt(rec.d_opt, 1.0);
  const double numeric_norm = esn_scaled_norm(rec.A, d_opt);

  EsnParams ep;
  ep.A = rec.A;
  ep.C = Eigen::Matrix2d::Identity();
  ep.b = Eigen::Vector2d::Zero();
  const StateModel model = StateModel::esn(std::move(ep));

  const BaseMetric d_metric = diag_scaled({rec.d_opt, 1.0});

  HiddenSampler sampler;
  sampler.dist = Dist::std_normal;
  sampler.dim = 2;
  sampler.scale = c.gap_input_std;
  sampler.seed = c.seed;

  ContractivityOptions copt;
  copt.seed = c.seed;
  const Certificate kappa = contractivity_estimate(
      model, sampler, CausalFilter::identity(2), c.p, copt, d_metric);

  Summary s;
  detail::common_header(s, c);
  s.add("c", c.gap_c);
  s.add("input_std", c.gap_input_std);
  s.add("inf_norm_closed_form", rec.inf_norm);
  s.add("inf_norm_numeric", numeric_norm);
  s.add("deterministic_contraction_fails", rec.inf_norm > 1.0);
  s.add_cert("cert.kappa_D_metric", kappa);

  ConvergeOptions opt = detail::converge_options(c);
  opt.metric.state = d_metric;
  const auto seeds = c.seed_list(3);
  bool all_converged = true;
  std::string traces;
  int idx = 0;
  const std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);
  for (const auto seed : seeds) {
    HiddenSampler seeded = sampler;
    seeded.seed = seed;
    const Ensemble inputs = generate_inputs(
        seeded, CausalFilter::identity(2), c.n_paths, w.horizon, opt.n_threads);
    const FixedPointEstimate fp = converge_fixed_point(model, inputs, w, opt);
    s.add("seed_" + std::to_string(seed) + ".converged", fp.trace.converged);
    s.add("seed_" + std::to_string(seed) + ".n_final", fp.trace.n_final);
    all_converged = all_converged && fp.trace.converged;
    write_file_atomic(dir / ("trace_seed" + std::to_string(idx) + ".csv"),
                      trace_to_csv(fp.trace));
    ++idx;
  }

  out << "scaled-norm infimum " << format_g17(rec.inf_norm)
      << (rec.inf_norm > 1.0 ? " > 1 (no pointwise contraction in any "
                               "diagonal scaling)"
                             : "")
      << "\n"
      << "average contraction kappa in the optimal diagonal metric: "
      << format_g17(kappa.estimate) << " +- "
      << format_g17(2.0 * kappa.std_error) << " ["
      << (kappa.pass ? "pass" : "FAIL") << "]\n"
      << "fixed-point iteration converged on " << (all_converged ? "all" : "NOT all")
      << " seeds\n";

  const bool pass = rec.inf_norm > 1.0 && kappa.pass && all_converged;
  const int exit = pass ? kExitPass : kExitCheckFailed;
  s.add("exit", exit);
  write_file_atomic(dir / "summary.txt", s.text());
  return exit;
}

inline int run_stationarity(const ExperimentConfig& c) {
  const WeightVector w = make_weights(c.gamma, c.resolved_horizon());
  const StateModel model = c.build_model();
  const HiddenSampler sampler = c.build_sampler(c.seed);
  const CausalFilter filter = c.build_filter();
  const int threads = resolve_threads(c.threads);
  const Ensemble inputs =
      generate_inputs(sampler, filter, c.n_paths, w.horizon, threads);
  const FixedPointEstimate fp =
      converge_fixed_point(model, inputs, w, detail::converge_options(c));
  const StationarityReport rep = stationarity_check(fp, c.max_lag);

  Summary s;
  detail::common_header(s, c);
  s.add("model", model.id());
  s.add("converged", fp.trace.converged);
  s.add("interior_times", rep.interior_times);
  s.add("max_lag", rep.max_lag);
  s.add("max_mean_dev_se", rep.max_mean_dev);
  s.add("max_var_dev_se", rep.max_var_dev);
  s.add("max_acov_dev_se", rep.max_acov_dev);
  s.add("tol_se", rep.tol_se);
  s.add("stationary", rep.pass);
  const bool pass = fp.trace.converged && rep.pass;
  const int exit = pass ? kExitPass : kExitCheckFailed;
  s.add("exit", exit);
  detail::write_outputs(c, s, trace_to_csv(fp.trace));
  return exit;
}

inline int run_experiment(const ExperimentConfig& c,
                          std::ostream& out = std::cout) {
  if (c.experiment == "converge") return run_converge(c);
  if (c.experiment == "certify") return run_certify(c, out);
  if (c.experiment == "consistency") return run_consistency(c);
  if (c.experiment == "counterexample_d") return run_counterexample_d(c, out);
  if (c.experiment == "esn_gap") return run_esn_gap(c, out);
  if (c.experiment == "stationarity") return run_stationarity(c);
  throw ConfigError("unknown experiment '" + c.experiment + "'");
}

}  // namespace stochesp
