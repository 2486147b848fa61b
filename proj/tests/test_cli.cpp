#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stochesp/config.hpp"
#include "stochesp/csv.hpp"
#include "stochesp/experiments.hpp"

using namespace stochesp;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "stochesp_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const std::string kGarchConfig = R"(# small converge run
experiment = converge
p = 1
n_paths = 200
seed = 42
tol = 1e-3
ot = assignment
ot_subsample = 50

[weights]
gamma = 1.25
horizon = 48

[model]
kind = garch
omega = 0.1
alpha = 0.1
beta = 0.5

[inputs]
dist = std_normal
filter = identity
)";

}  // namespace

TEST_CASE("config parser reports malformed lines with numbers") {
  try {
    ConfigReader::parse_string("experiment = converge\nbogus line\n", "cfg");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
  }
}

TEST_CASE("unknown keys are hard errors with locations") {
  const std::string text = kGarchConfig + "\ntypo_key = 1\n";
  try {
    load_config(ConfigReader::parse_string(text, "cfg"));
    FAIL("expected a validation error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("typo_key") != std::string::npos);
    CHECK(msg.find("cfg:") != std::string::npos);
  }
}

TEST_CASE("duplicate keys are rejected") {
  CHECK_THROWS_AS(
      ConfigReader::parse_string("a = 1\na = 2\n", "cfg"),
      ConfigError);
}

TEST_CASE("validation lists every violated constraint at once") {
  const std::string text = R"(experiment = converge
p = 0.5
n_paths = 0
[weights]
gamma = 0.9
[model]
kind = garch
[inputs]
dist = std_normal
)";
  try {
    load_config(ConfigReader::parse_string(text, "cfg"));
    FAIL("expected a validation error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("p must be >= 1") != std::string::npos);
    CHECK(msg.find("n_paths must be >= 1") != std::string::npos);
    CHECK(msg.find("gamma must be > 1") != std::string::npos);
  }
}

TEST_CASE("experiment listing is stable and complete") {
  const std::string listing = list_experiments();
  std::size_t last = 0;
  for (const auto& name : experiment_names()) {
    const auto pos = listing.find(name);
    REQUIRE(pos != std::string::npos);
    CHECK(pos >= last);
    last = pos;
  }
  CHECK(experiment_names().size() == 6);
  CHECK(listing.find("esn_gap") != std::string::npos);
}

TEST_CASE("converge experiment runs end to end") {
  const auto dir = fresh_dir("converge");
  ExperimentConfig cfg = load_config(ConfigReader::parse_string(kGarchConfig));
  cfg.out_dir = dir.string();
  cfg.dump_ensemble = true;
  REQUIRE(run_experiment(cfg) == kExitPass);

  const std::string trace = slurp(dir / "trace.csv");
  CHECK(trace.rfind("n,wp_step_coupled,wp_step_ot,mean_state_t-1,var_state_t-1\n",
                    0) == 0);
  const std::string summary = slurp(dir / "summary.txt");
  CHECK(summary.find("fitted_q = ") != std::string::npos);
  CHECK(summary.find("converged = true") != std::string::npos);
  CHECK(summary.find("config_hash = 0x") != std::string::npos);
  CHECK(summary.find("stationary_mean_analytic") != std::string::npos);

  const Ensemble dumped = load_ensemble_csv(dir / "fixedpoint.csv");
  CHECK(dumped.n_paths() == 200);
  CHECK(dumped.has_states());
}

TEST_CASE("csv outputs are byte-identical across runs and worker counts") {
  const auto dir1 = fresh_dir("det1");
  const auto dir2 = fresh_dir("det2");
  const auto dir4 = fresh_dir("det4");
  ExperimentConfig cfg = load_config(ConfigReader::parse_string(kGarchConfig));
  cfg.out_dir = dir1.string();
  cfg.threads = 1;
  REQUIRE(run_experiment(cfg) == kExitPass);
  cfg.out_dir = dir2.string();
  REQUIRE(run_experiment(cfg) == kExitPass);
  cfg.out_dir = dir4.string();
  cfg.threads = 4;
  REQUIRE(run_experiment(cfg) == kExitPass);
  const std::string t1 = slurp(dir1 / "trace.csv");
  CHECK(t1 == slurp(dir2 / "trace.csv"));
  CHECK(t1 == slurp(dir4 / "trace.csv"));
}

TEST_CASE("certified converge gates on the existence condition") {
  ExperimentConfig cfg = load_config(ConfigReader::parse_string(kGarchConfig));
  cfg.certified = true;  // kappa = 0.6 < 2^{1-p}/gamma = 0.8
  cfg.out_dir = fresh_dir("cert_ok").string();
  CHECK(run_experiment(cfg) == kExitPass);

  cfg.m_beta = 0.85;  // kappa = 0.95 >= 0.8: the gate must refuse
  cfg.out_dir = fresh_dir("cert_fail").string();
  CHECK(run_experiment(cfg) == kExitCheckFailed);
}

TEST_CASE("certify experiment writes the certificate table") {
  ExperimentConfig cfg = load_config(ConfigReader::parse_string(kGarchConfig));
  cfg.experiment = "certify";
  cfg.out_dir = fresh_dir("certify").string();
  std::ostringstream table;
  REQUIRE(run_certify(cfg, table) == kExitPass);
  CHECK(table.str().find("contractivity kappa") != std::string::npos);
  CHECK(table.str().find("pass") != std::string::npos);
  const std::string summary = slurp(std::filesystem::path(cfg.out_dir) / "summary.txt");
  CHECK(summary.find("cert.theorem_condition.pass = true") != std::string::npos);
  CHECK(summary.find("cert.bounded_C.estimate = ") != std::string::npos);
}

TEST_CASE("counterexample experiment validates and diverges") {
  const std::string text = R"(experiment = counterexample_d
p = 2
[weights]
gamma = 2.6
[counterexample]
alpha = 0.4
t_max = 24
)";
  ExperimentConfig cfg = load_config(ConfigReader::parse_string(text));
  cfg.out_dir = fresh_dir("counterexample").string();
  std::ostringstream out;
  REQUIRE(run_counterexample_d(cfg, out) == kExitPass);
  const std::string trace = slurp(std::filesystem::path(cfg.out_dir) / "trace.csv");
  CHECK(trace.rfind("T,partial_sum\n", 0) == 0);
  const std::string summary = slurp(std::filesystem::path(cfg.out_dir) / "summary.txt");
  CHECK(summary.find("diverges = true") != std::string::npos);
}

TEST_CASE("consistency experiment pass and threshold") {
  const std::string text = R"(experiment = consistency
p = 1
n_paths = 256
seed = 3
tol = 1e-3
ot = assignment
ot_subsample = 0

[weights]
gamma = 1.5
horizon = 36

[model]
kind = linear_test
a = 0.5

[inputs]
dist = std_normal
)";
  ExperimentConfig cfg = load_config(ConfigReader::parse_string(text));
  cfg.out_dir = fresh_dir("consistency").string();
  REQUIRE(run_experiment(cfg) == kExitPass);
  const std::string summary = slurp(std::filesystem::path(cfg.out_dir) / "summary.txt");
  CHECK(summary.find("distance = ") != std::string::npos);
  CHECK(summary.find("threshold = 0.005") != std::string::npos);
}

TEST_CASE("stationarity experiment runs") {
  const std::string text = R"(experiment = stationarity
p = 1
n_paths = 2000
seed = 5
tol = 1e-4
ot_subsample = 0
max_lag = 3

[weights]
gamma = 1.25
horizon = 64

[model]
kind = garch
omega = 0.2
alpha = 0.05
beta = 0.55

[inputs]
dist = std_normal
)";
  ExperimentConfig cfg = load_config(ConfigReader::parse_string(text));
  cfg.out_dir = fresh_dir("stationarity").string();
  REQUIRE(run_experiment(cfg) == kExitPass);
  const std::string summary = slurp(std::filesystem::path(cfg.out_dir) / "summary.txt");
  CHECK(summary.find("stationary = true") != std::string::npos);
}

TEST_CASE("thread count resolution falls back to the environment") {
  ::setenv("STOCHESP_THREADS", "3", 1);
  CHECK(resolve_threads(0) == 3);
  CHECK(resolve_threads(7) == 7);
  ::unsetenv("STOCHESP_THREADS");
  CHECK(resolve_threads(0) == 1);
}

TEST_CASE("affine input-lift model runs from a config") {
  const std::string text = R"(experiment = consistency
p = 1
n_paths = 128
tol = 1e-3
ot = assignment
ot_subsample = 0
[weights]
gamma = 1.5
horizon = 16
[model]
kind = affine
state_dim = 1
input_dim = 1
A0 = 0.0
b0 = 0.0
b1 = 1.0
[inputs]
dist = std_normal
)";
  ExperimentConfig cfg = load_config(ConfigReader::parse_string(text));
  cfg.out_dir = fresh_dir("affine_lift").string();
  CHECK(run_experiment(cfg) == kExitPass);
}

TEST_CASE("fir config builds a usable input spec") {
  const std::string text = R"(experiment = converge
n_paths = 64
[weights]
gamma = 1.5
horizon = 16
[model]
kind = linear_test
a = 0.4
[inputs]
dist = std_normal
filter = fir
kernel = 1.0, 0.5
)";
  ExperimentConfig cfg = load_config(ConfigReader::parse_string(text));
  cfg.out_dir = fresh_dir("fir").string();
  CHECK(run_experiment(cfg) == kExitPass);
}
