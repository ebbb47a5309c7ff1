#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mresgld/experiment.hpp"

using namespace mresgld;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mresgld_test_" + name);
  fs::remove_all(dir);
  return dir;
}

int cli(const std::string& args) {
  const int status = std::system((std::string(MRESGLD_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string error_of(const json& j) {
  try {
    ExperimentConfig::from_json(j).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing names the offending field") {
  CHECK(error_of({{"experiment", "two_mode"}, {"stepz", 10}}).find("stepz") != std::string::npos);
  CHECK(error_of({{"experiment", "two_mode"}, {"step_size", -1.0}}).find("step_size") != std::string::npos);
  CHECK(error_of({{"experiment", "two_mode"}, {"steps", "many"}}).find("steps") != std::string::npos);
  CHECK(error_of({{"experiment", "two_mode"}, {"tau_low", 5}, {"tau_high", 2}}).find("tau_high") != std::string::npos);
  CHECK(error_of({{"experiment", "nope"}}).find("experiment") != std::string::npos);
  CHECK(error_of({{"steps", 10}}).find("experiment") != std::string::npos);
  CHECK(error_of({{"experiment", "two_mode"}, {"sampler", "hmc"}}).find("sampler") != std::string::npos);
  CHECK(error_of({{"experiment", "two_mode"}, {"intensity", "big"}}).find("intensity") != std::string::npos);
  CHECK(error_of({{"experiment", "two_mode"}, {"sigma1", 2.0}, {"sigma2", 1.0}}).find("sigma2") != std::string::npos);
  CHECK(error_of({{"experiment", "two_mode"}, {"a1", 0.3}, {"a2", 0.6}}).find("a2") != std::string::npos);
  CHECK(error_of({{"experiment", "two_mode"}, {"burn_in", 1.0}}).find("burn_in") != std::string::npos);
}

TEST_CASE("config round trip and shipped configs") {
  const ExperimentConfig c = ExperimentConfig::from_json(
      {{"experiment", "qgd_forward"}, {"intensity", 50.0}, {"a2", 0.25}, {"compare", {"sgld"}}, {"seed", 4}});
  CHECK(c.a1 == doctest::Approx(0.75));
  CHECK(*c.intensity == 50.0);
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  for (const auto& id : experiment_ids()) {
    const fs::path path = fs::path(MRESGLD_CONFIG_DIR) / (id + ".json");
    REQUIRE(fs::exists(path));
    const ExperimentConfig cfg = ExperimentConfig::load(path.string());
    CHECK(cfg.experiment == id);
    CHECK_FALSE(cfg.comment.empty());
    CHECK_NOTHROW(cfg.validate());
  }
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("phase errors carry the phase tag") {
  const PhaseError e("sampling", "non-finite gradient");
  CHECK(std::string(e.what()) == "[sampling] non-finite gradient");
  CHECK(e.phase() == "sampling");
}

TEST_CASE("swap verification on a small grid") {
  ExperimentConfig cfg;
  cfg.experiment = "swap_unbiasedness";
  cfg.draws = 20000;
  cfg.seed = 5;
  const SwapVerification v = verify_swap_unbiasedness(cfg);
  CHECK(v.cells.size() == 18);
  CHECK(v.passed);
  CHECK(v.negated_failures > 0);
  for (const auto& c : v.cells)
    if (c.sigma1 == 0 && c.sigma2 == 0) CHECK(c.z == 0.0);
  cfg.negate = true;
  CHECK_FALSE(verify_swap_unbiasedness(cfg).passed);
}

TEST_CASE("double-well run writes its artifacts deterministically") {
  ExperimentConfig cfg = ExperimentConfig::load(std::string(MRESGLD_CONFIG_DIR) + "/double_well.json");
  cfg.steps = 5000;
  cfg.discretization_paths = 20;
  cfg.output_dir = scratch("dw_a").string();
  const RunReport a = run_experiment(cfg);
  for (const char* f : {"samples.csv", "swaplog.csv", "metrics.csv", "report.json", "histogram.svg"})
    CHECK(fs::exists(fs::path(cfg.output_dir) / f));
  CHECK(a.data["timing"].contains("sampling"));
  CHECK(a.data["config"]["seed"] == 3);

  ExperimentConfig again = cfg;
  again.output_dir = scratch("dw_b").string();
  run_experiment(again);
  CHECK(slurp(fs::path(cfg.output_dir) / "samples.csv") == slurp(fs::path(again.output_dir) / "samples.csv"));
}

TEST_CASE("double-well low chain matches its Gibbs density") {
  ExperimentConfig cfg = ExperimentConfig::load(std::string(MRESGLD_CONFIG_DIR) + "/double_well.json");
  cfg.discretization_paths = 10;
  cfg.output_dir = scratch("dw_tv").string();
  const RunReport r = run_experiment(cfg);
  CHECK(r.data["total_variation"].get<double>() < 0.1);
  CHECK(r.data["swap"]["swap_rate"].get<double>() > 0.0);
}

TEST_CASE("pinn run writes a training log and predictions") {
  ExperimentConfig cfg = ExperimentConfig::load(std::string(MRESGLD_CONFIG_DIR) + "/nonlinear_inverse.json");
  cfg.steps = 40;
  cfg.log_interval = 10;
  cfg.compare = {"sgld"};
  cfg.calibration_samples = 3;
  cfg.output_dir = scratch("nl").string();
  const RunReport r = run_experiment(cfg);
  const std::string log = slurp(fs::path(cfg.output_dir) / "samples.csv");
  CHECK(log.rfind("epoch,relative_error,energy,alpha,chain_id,swapped\n", 0) == 0);
  const std::string pred = slurp(fs::path(cfg.output_dir) / "predictions.csv");
  CHECK(pred.rfind("x,t,u_pred_mean,u_pred_var,u_exact\n", 0) == 0);
  CHECK(std::count(pred.begin(), pred.end(), '\n') == 202);
  CHECK(r.data["runs"].contains("sgld"));
  CHECK(r.data["config"]["sigma2"].get<double>() > 0.0);
}

TEST_CASE("command line exit codes") {
  CHECK(cli("list-experiments") == 0);
  CHECK(cli("run /nonexistent.json") != 0);
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  {
    std::ofstream bad(dir / "bad.json");
    bad << R"({"experiment": "double_well", "tau_low": "cold"})";
  }
  CHECK(cli("run " + (dir / "bad.json").string()) == 2);
  {
    std::ofstream diverge(dir / "diverge.json");
    // A step this large overflows the double-well drift.
    diverge << R"({"experiment": "double_well", "step_size": 10.0, "steps": 100, "intensity": 1,)"
            << R"( "discretization_paths": 2, "output_dir": ")" << (dir / "out").string() << "\"}";
  }
  CHECK(cli("run " + (dir / "diverge.json").string()) == 3);
  CHECK(cli("verify-swap --draws 2000 --out-dir " + (dir / "v").string()) == 0);
  CHECK(cli("verify-swap --negate --draws 20000") == 1);
}
