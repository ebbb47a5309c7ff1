// Runs every acceptance criterion and prints one PASS/FAIL line for each.
//
// Criteria listed in kKnownFailures fail at desk scale for reasons documented
// in the README; they still print FAIL. The exit status is nonzero when any
// other criterion fails, or when a known failure unexpectedly passes (so the
// list gets revisited).

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mresgld/experiment.hpp"
#include "mresgld/fem.hpp"
#include "mresgld/io.hpp"
#include "mresgld/pinn.hpp"
#include "mresgld/replica.hpp"
#include "mresgld/sampler.hpp"

using namespace mresgld;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<int> kKnownFailures = {9, 10};

const fs::path kConfigs = MRESGLD_CONFIG_DIR;
const fs::path kWork = fs::absolute("acceptance_out");

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) { return format_real(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the CLI on a config and returns report.json; throws on a nonzero exit.
json cli_run(const fs::path& config, const fs::path& out) {
  fs::remove_all(out);
  fs::create_directories(out);
  const std::string cmd = std::string("\"") + MRESGLD_CLI + "\" run \"" + config.string() +
                          "\" --out-dir \"" + out.string() + "\" > \"" + (out / "cli.log").string() +
                          "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) throw std::runtime_error("cli exited with " + std::to_string(rc) + " on " + config.string());
  return read_json(out / "report.json");
}

// First run of every shipped config; reused by the later criteria.
std::map<std::string, json> g_reports;

json report_for(const std::string& name) {
  auto it = g_reports.find(name);
  if (it != g_reports.end()) return it->second;
  json r = cli_run(kConfigs / (name + ".json"), kWork / name / "a");
  g_reports[name] = r;
  return r;
}

// --------------------------------------------------------------------------

Outcome swap_unbiasedness() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = ExperimentConfig::load((kConfigs / "swap_unbiasedness.json").string());
  cfg.draws = 100000;
  const SwapVerification v = verify_swap_unbiasedness(cfg);
  const double secs = seconds_since(t0);
  const bool ok = v.cells.size() >= 12 && v.passed && v.negated_failures >= 1 && secs < 60.0;
  return {ok, std::to_string(v.cells.size()) + " cells, max |z| = " + fmt(v.max_abs_z) +
                  ", negated variant fails in " + std::to_string(v.negated_failures) + " cells, " +
                  fmt(secs) + " s"};
}

Outcome reduction_identities() {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double t1 = 0.2 + 2 * rng.uniform(), t2 = t1 + 0.05 + 10 * rng.uniform();
    const double a1 = 0.05 + 0.9 * rng.uniform(), sigma = 2 * rng.uniform();
    const double u1 = 4 * rng.normal(), u2 = 4 * rng.normal();
    const SwapConfig cfg = SwapConfig::make(t1, t2, 1.0, a1, sigma, sigma);
    const double multi = swap_factor_multi_variance(u1, u2, u1, u2, cfg).value;
    const double single = swap_factor_single_variance(u1, u2, sigma, cfg).value;
    worst = std::max(worst, std::abs(multi - single) / std::abs(single));

    const SwapConfig cfg0 = SwapConfig::make(t1, t2, 1.0, a1);
    const double m0 = swap_factor_multi_variance(u1, u2, u1, u2, cfg0).value;
    const double s0 = swap_factor_single_variance(u1, u2, 0.0, cfg0).value;
    const double e0 = swap_factor_exact(u1, u2, cfg0).value;
    worst = std::max({worst, std::abs(m0 - e0) / e0, std::abs(s0 - e0) / e0});
  }
  return {worst <= 1e-12, "worst relative gap over 1000 inputs " + fmt(worst)};
}

struct Quadratic : EnergyModel {
  double energy(const ParameterVector& x) override { return 0.5 * x.squaredNorm(); }
  ParameterVector gradient(const ParameterVector& x) override { return x; }
  double sigma() const override { return 0.0; }
};

Outcome sgld_stationarity() {
  const auto t0 = std::chrono::steady_clock::now();
  Quadratic model;
  bool ok = true;
  std::ostringstream detail;
  std::uint64_t seed = 31;
  for (double tau : {0.25, 0.5, 1.0}) {
    ChainConfig cfg{tau, 0.01, 0.0, {}};
    Rng rng(seed++);
    const Trajectory t = run_chain(ParameterVector::Zero(1), cfg, model, 2000000, rng, 10);
    double sum = 0, sum2 = 0;
    std::size_t n = 0;
    for (std::size_t i = t.snapshots.size() / 20; i < t.snapshots.size(); ++i, ++n) {
      const double x = t.snapshots[i].position[0];
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sum2 / static_cast<double>(n) - mean * mean;
    ok = ok && std::abs(var / tau - 1.0) <= 0.10;
    detail << "tau " << tau << ": var " << fmt(var) << "; ";
  }
  const double secs = seconds_since(t0);
  detail << fmt(secs) << " s";
  return {ok && secs < 60.0, detail.str()};
}

double relative_l2(const Eigen::VectorXd& a, const Eigen::VectorXd& ref) {
  return (a - ref).norm() / ref.norm();
}

Outcome fem_order() {
  const auto t0 = std::chrono::steady_clock::now();
  SourceParams p;
  p.x0 = {0.45, 0.55};
  std::ostringstream detail;
  bool ok = true;

  // Space: error against the exact solution, time step small enough to be
  // negligible.
  std::vector<double> errs;
  for (int n : {10, 20, 40, 80}) errs.push_back(nodal_relative_error(HeatSolver(n, 0.03 / 3000, 0.03).solve(p), p));
  detail << "dx ratios";
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double r = errs[i - 1] / errs[i];
    ok = ok && r >= 3.0 && r <= 5.0;
    detail << ' ' << fmt(r);
  }

  // Time: fixed mesh, against a much finer time step on the same mesh.
  const Eigen::VectorXd ref = HeatSolver(50, 0.03 / 7680, 0.03).solve(p).values;
  std::vector<double> terr;
  for (int steps : {30, 60, 120, 240}) terr.push_back(relative_l2(HeatSolver(50, 0.03 / steps, 0.03).solve(p).values, ref));
  detail << "; dt ratios";
  for (std::size_t i = 1; i < terr.size(); ++i) {
    const double r = terr[i - 1] / terr[i];
    ok = ok && r >= 1.6 && r <= 2.4;
    detail << ' ' << fmt(r);
  }
  const double secs = seconds_since(t0);
  detail << "; " << fmt(secs) << " s";
  return {ok && secs < 120.0, detail.str()};
}

Outcome two_mode() {
  const json r = report_for("two_mode");
  const auto& m = r["metrics"];
  const double left = m["mresgld.mode_fraction_left"], right = m["mresgld.mode_fraction_right"];
  const double other = m["sgld.mode_fraction_right"];  // sgld starts at the left mode
  const double secs = r["timing"]["total"];
  const std::size_t steps = r["config"]["steps"];
  const bool ok = steps >= 5000 && left >= 0.15 && right >= 0.15 && other < 0.02 && secs <= 600.0;
  return {ok, "m-reSGLD fractions " + fmt(left) + " / " + fmt(right) + ", SGLD other mode " + fmt(other) +
                  ", " + std::to_string(steps) + " steps, " + fmt(secs) + " s"};
}

Outcome infinite_mode() {
  const json r = report_for("infinite_mode");
  const double mres = r["metrics"]["mresgld.angular_coverage"], sgld = r["metrics"]["sgld.angular_coverage"];
  return {mres >= 0.5 && sgld < mres, "coverage m-reSGLD " + fmt(mres) + ", SGLD " + fmt(sgld)};
}

Outcome cost_ordering() {
  json cfg = read_json(kConfigs / "two_mode.json");
  cfg["forward_mode"] = "time_stepping";
  cfg["sampler"] = "mresgld";
  cfg["compare"] = json::array({"resgld"});
  cfg["steps"] = 125;  // 100 samples after the 20% burn-in
  cfg["thinning"] = 1;
  const fs::path dir = kWork / "cost";
  fs::create_directories(dir);
  const fs::path path = dir / "cost.json";
  std::ofstream(path) << cfg.dump(2);
  const json r = cli_run(path, dir / "run");
  const double mres = r["runs"]["mresgld"]["seconds_per_step"], res = r["runs"]["resgld"]["seconds_per_step"];
  const double ratio = mres / res;
  return {ratio < 0.85, "time-stepping seconds per step " + fmt(mres) + " vs " + fmt(res) + ", ratio " + fmt(ratio)};
}

double gradient_check(const PinnProblem& p, std::uint64_t seed) {
  Rng rng(seed);
  const ParameterVector params = p.network.initialize(rng, 0.8);
  const ParameterVector g = pinn_gradient(p.network, params, p.collocation, p.loss, p.pde);
  auto energy = [&](Eigen::Index i, double shift) {
    ParameterVector q = params;
    q[i] += shift;
    return pinn_energy(p.network, q, p.collocation, p.loss, p.pde).total();
  };
  const double scale = g.cwiseAbs().maxCoeff();
  Rng pick(seed + 1);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    Eigen::Index i = static_cast<Eigen::Index>(pick.uniform() * static_cast<double>(p.network.weight_count()));
    if (k == 0 && p.network.has_inverse_slot()) i = static_cast<Eigen::Index>(p.network.parameter_count() - 1);
    const double h = 1e-4;
    const double fd = (-energy(i, 2 * h) + 8 * energy(i, h) - 8 * energy(i, -h) + energy(i, -2 * h)) / (12 * h);
    worst = std::max(worst, std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-6 * scale}));
  }
  return worst;
}

Outcome pinn_gradients() {
  const double qf = gradient_check(build_qgd_forward(Fidelity::fine), 101);
  const double qi = gradient_check(build_qgd_inverse(Fidelity::fine), 102);
  const double nl = gradient_check(build_nonlinear_inverse(Fidelity::fine), 103);
  return {std::max({qf, qi, nl}) <= 1e-5,
          "worst relative error: QGD forward " + fmt(qf) + ", QGD inverse " + fmt(qi) + ", nonlinear " + fmt(nl)};
}

Outcome qgd_ordering() {
  const json m = report_for("qgd_forward")["metrics"];
  const double mres = m["mresgld.relative_error_mean"], lt = m["sgld.relative_error_mean"],
               ht = m["sgld_high.relative_error_mean"];
  return {mres <= lt && mres <= ht && mres < 0.05,
          "mean relative error m-reSGLD " + fmt(mres) + ", lt-SGLD " + fmt(lt) + ", ht-SGLD " + fmt(ht)};
}

Outcome inverse_recovery() {
  const double qgd = report_for("qgd_inverse")["metrics"]["mresgld.alpha_mean"];
  const double nl = report_for("nonlinear_inverse")["metrics"]["mresgld.alpha_mean"];
  return {std::abs(qgd - 1.0) <= 0.05 && std::abs(nl - 0.7) <= 0.1,
          "alpha mean QGD " + fmt(qgd) + " (target 1), nonlinear " + fmt(nl) + " (target 0.7)"};
}

Outcome determinism() {
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& id : experiment_ids()) {
    report_for(id);
    const fs::path a = kWork / id / "a", b = kWork / id / "b";
    cli_run(kConfigs / (id + ".json"), b);
    std::size_t here = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("samples", 0) != 0 || e.path().extension() != ".csv") continue;
      ++here;
      if (!fs::exists(b / name) || slurp(e.path()) != slurp(b / name)) differing.push_back(id + "/" + name);
    }
    if (here == 0) differing.push_back(id + " (no sample files)");
    compared += here;
  }
  std::string detail = std::to_string(compared) + " sample files over " + std::to_string(experiment_ids().size()) +
                       " experiments";
  for (const auto& d : differing) detail += ", differs: " + d;
  return {differing.empty(), detail};
}

Outcome discretization_direction() {
  const json r = report_for("double_well");
  const std::vector<double> e = r["discretization_errors"];
  bool ok = e.size() == 3;
  for (std::size_t i = 1; i < e.size(); ++i) ok = ok && e[i] < e[i - 1];
  std::string detail = "errors";
  for (double v : e) detail += " " + fmt(v);
  return {ok, detail};
}

}  // namespace

int main() {
  fs::create_directories(kWork);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"swap-estimator unbiasedness", swap_unbiasedness},
      {"reduction identities", reduction_identities},
      {"SGLD stationarity", sgld_stationarity},
      {"FEM convergence order", fem_order},
      {"two-mode recovery", two_mode},
      {"infinite-mode coverage", infinite_mode},
      {"cost ordering", cost_ordering},
      {"PINN gradient checks", pinn_gradients},
      {"QGD forward training trend", qgd_ordering},
      {"inverse recovery", inverse_recovery},
      {"determinism", determinism},
      {"discretization-error direction", discretization_direction},
  };

  int unexpected = 0, passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool known = kKnownFailures.count(id) > 0;
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << criteria[i].first << ": " << o.detail;
    if (!o.pass && known) std::cout << " [known failure]";
    if (o.pass && known) std::cout << " [listed as a known failure but passed]";
    std::cout << std::endl;
    passed += o.pass ? 1 : 0;
    if (o.pass == known) ++unexpected;
  }
  std::cout << passed << " of " << criteria.size() << " criteria passed" << std::endl;
  return unexpected == 0 ? 0 : 1;
}
