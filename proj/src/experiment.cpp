#include "mresgld/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <type_traits>

#include "mresgld/inverse.hpp"
#include "mresgld/io.hpp"
#include "mresgld/pinn.hpp"
#include "mresgld/replica.hpp"
#include "mresgld/sampler.hpp"

namespace mresgld {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kExperiments = {"two_mode",          "infinite_mode", "qgd_forward",
                                               "qgd_inverse",       "nonlinear_inverse",
                                               "swap_unbiasedness", "double_well"};
const std::set<std::string> kSamplers = {"sgld", "resgld", "mresgld"};
const std::set<std::string> kCompare = {"sgld", "sgld_high", "resgld", "mresgld"};

// ---------------------------------------------------------------------------
// Config field readers. Each names the field in its error message.

[[noreturn]] void bad_field(const std::string& key, const std::string& expected) {
  throw ConfigError("field '" + key + "': expected " + expected);
}

double read_number(const json& v, const std::string& key) {
  if (!v.is_number()) bad_field(key, "a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad_field(key, "a finite number");
  return d;
}

double read_positive(const json& v, const std::string& key) {
  const double d = read_number(v, key);
  if (!(d > 0.0)) bad_field(key, "a positive number");
  return d;
}

double read_nonnegative(const json& v, const std::string& key) {
  const double d = read_number(v, key);
  if (!(d >= 0.0)) bad_field(key, "a non-negative number");
  return d;
}

std::size_t read_count(const json& v, const std::string& key, bool allow_zero = false) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) bad_field(key, "an integer");
  const auto n = v.get<long long>();
  if (n < 0 || (!allow_zero && n == 0)) bad_field(key, allow_zero ? "a non-negative integer" : "a positive integer");
  return static_cast<std::size_t>(n);
}

std::string read_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad_field(key, "a string");
  return v.get<std::string>();
}

bool read_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) bad_field(key, "true or false");
  return v.get<bool>();
}

std::vector<double> read_numbers(const json& v, const std::string& key) {
  if (!v.is_array()) bad_field(key, "an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read_number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::vector<double>> read_pairs(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) bad_field(key, "a non-empty array of [a, b] pairs");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto pair = read_numbers(v[i], key + "[" + std::to_string(i) + "]");
    if (pair.size() != 2) bad_field(key + "[" + std::to_string(i) + "]", "a pair of two numbers");
    out.push_back(pair);
  }
  return out;
}

// ---------------------------------------------------------------------------

class PhaseClock {
 public:
  template <class F>
  auto run(const std::string& phase, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
      timings_[phase] = timings_.value(phase, 0.0) +
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    try {
      if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
        f();
        record();
      } else {
        auto r = f();
        record();
        return r;
      }
    } catch (const PhaseError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw PhaseError(phase, e.what());
    }
  }
  const json& timings() const { return timings_; }

 private:
  json timings_ = json::object();
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

class Output {
 public:
  explicit Output(const std::string& dir) : dir_(dir) { fs::create_directories(dir_); }

  std::ofstream open(const std::string& name) {
    const fs::path path = dir_ / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    files_.push_back(path.string());
    return out;
  }
  void svg(const std::string& name, const SvgPlot& plot) {
    const fs::path path = dir_ / name;
    plot.write(path.string());
    files_.push_back(path.string());
  }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

void write_metrics(Output& out, const std::vector<std::pair<std::string, double>>& metrics) {
  auto f = out.open("metrics.csv");
  f << "metric,value\n";
  for (const auto& [k, v] : metrics) f << k << ',' << format_real(v) << '\n';
}

// ---------------------------------------------------------------------------
// Sampler variants shared by the source-inversion and PINN experiments.

struct Variant {
  std::string name;  // sgld, sgld_high, resgld, mresgld
  bool pair = false;
};

Variant variant_of(const std::string& name) { return {name, name == "resgld" || name == "mresgld"}; }

std::vector<Variant> variants(const ExperimentConfig& cfg) {
  std::vector<Variant> out;
  std::string primary = cfg.sampler;
  if (primary == "sgld" && cfg.sgld_temperature == "high") primary = "sgld_high";
  out.push_back(variant_of(primary));
  for (const auto& c : cfg.compare)
    if (std::none_of(out.begin(), out.end(), [&](const Variant& v) { return v.name == c; }))
      out.push_back(variant_of(c));
  return out;
}

SwapConfig swap_config_for(const ExperimentConfig& cfg, const std::string& variant) {
  const double s2 = variant == "resgld" ? cfg.sigma1 : cfg.sigma2;
  SwapConfig sc = SwapConfig::make(cfg.tau_low, cfg.tau_high, 1.0, cfg.a1, cfg.sigma1, s2);
  if (cfg.intensity) {
    sc.intensity = *cfg.intensity;
  } else {
    const double spread = sc.a1 * sc.sigma1 + sc.a2 * sc.sigma2;
    const double correction = spread * spread * sc.tau_delta() * sc.tau_delta();
    sc.log_intensity = correction + cfg.log_intensity_offset - std::log(cfg.step_size);
  }
  return sc;
}

// Per-step callback: (step, low chain, high chain or null, swapped this step).
using StepObserver = std::function<void(std::size_t, const ChainState&, const ChainState*, bool)>;

struct VariantRun {
  Variant variant;
  Trajectory low, high;
  std::vector<SwapRecord> swap_log;
  std::size_t swaps = 0, attempts = 0;
  std::size_t rejected_low = 0, rejected_high = 0;
  double seconds = 0.0;
  SwapConfig swap;
};

// Models: fine_a drives every low chain and lone SGLD chains; fine_b is the
// high chain of resgld; coarse is the high chain of mresgld.
VariantRun run_variant(const Variant& v, const ExperimentConfig& cfg, EnergyModel& fine_a,
                       EnergyModel& fine_b, EnergyModel& coarse, const ParameterVector& init,
                       const StepObserver& observer) {
  VariantRun run;
  run.variant = v;
  const Rng root(cfg.seed);
  const auto t0 = std::chrono::steady_clock::now();
  if (!v.pair) {
    ChainConfig chain{v.name == "sgld_high" ? cfg.tau_high : cfg.tau_low, cfg.step_size, fine_a.sigma(), {}};
    chain.validate();
    Rng rng = root.split(0);
    ChainState state = make_chain_state(init, fine_a);
    run.low.thinning = cfg.thinning;
    for (std::size_t k = 1; k <= cfg.steps; ++k) {
      try {
        state = sgld_step(std::move(state), chain, fine_a, rng);
      } catch (const SamplerError& e) {
        throw SamplerError(e.reason(), e.position(), k);
      }
      if (k % cfg.thinning == 0) run.low.snapshots.push_back(state);
      if (observer) observer(k, state, nullptr, false);
    }
    run.rejected_low = state.rejected_steps;
  } else {
    EnergyModel& high_model = v.name == "resgld" ? fine_b : coarse;
    run.swap = swap_config_for(cfg, v.name);
    ChainConfig lo{cfg.tau_low, cfg.step_size, fine_a.sigma(), {}};
    ChainConfig hi{cfg.tau_high, cfg.step_size, high_model.sigma(), {}};
    PairRunOptions opt;
    opt.n_steps = cfg.steps;
    opt.swap_interval = cfg.swap_interval;
    opt.thinning = cfg.thinning;
    std::size_t last_swaps = 0;
    if (observer) {
      opt.observer = [&](std::size_t step, const ReplicaPairState& s) {
        const bool swapped = s.swap_count != last_swaps;
        last_swaps = s.swap_count;
        observer(step, s.low, &s.high, swapped);
      };
    }
    PairRun pr = run_replica_pair(init, init, fine_a, high_model, run.swap, lo, hi, opt, root);
    run.low = std::move(pr.low);
    run.high = std::move(pr.high);
    run.swap_log = std::move(pr.swap_log);
    run.swaps = pr.final_state.swap_count;
    run.attempts = pr.final_state.attempt_count;
    run.rejected_low = pr.final_state.low.rejected_steps;
    run.rejected_high = pr.final_state.high.rejected_steps;
  }
  run.seconds = seconds_since(t0);
  return run;
}

json swap_summary(const VariantRun& r) {
  json j;
  j["attempts"] = r.attempts;
  j["swaps"] = r.swaps;
  j["swap_rate"] = r.attempts ? static_cast<double>(r.swaps) / static_cast<double>(r.attempts) : 0.0;
  if (r.variant.pair) {
    j["tau_low"] = r.swap.tau_low;
    j["tau_high"] = r.swap.tau_high;
    if (r.swap.log_intensity)
      j["log_intensity"] = *r.swap.log_intensity;
    else
      j["intensity"] = r.swap.intensity;
    j["a1"] = r.swap.a1;
    j["sigma1"] = r.swap.sigma1;
    j["sigma2"] = r.swap.sigma2;
    std::size_t clamped = 0;
    for (const auto& rec : r.swap_log) clamped += rec.clamped ? 1 : 0;
    j["clamped_factors"] = clamped;
  }
  return j;
}

std::string samples_name(const Variant& v, bool primary) {
  return primary ? "samples.csv" : "samples_" + v.name + ".csv";
}

// ---------------------------------------------------------------------------
// Source inversion: two_mode and infinite_mode.

RunReport run_source_inversion(const ExperimentConfig& cfg) {
  PhaseClock clock;
  Output out(cfg.output_dir);
  const bool two_mode = cfg.experiment == "two_mode";
  const ForwardMode mode = cfg.forward_mode == "time_stepping" ? ForwardMode::time_stepping : ForwardMode::response;

  ExperimentConfig run_cfg = cfg;
  auto problem = clock.run("setup", [&] {
    return std::make_unique<InverseProblem>(two_mode ? make_two_mode_problem(cfg.obs_sigma)
                                                     : make_infinite_mode_problem(cfg.obs_sigma));
  });

  const auto vars = variants(cfg);
  const bool uses_coarse = std::any_of(vars.begin(), vars.end(), [](const Variant& v) { return v.name == "mresgld"; });
  double gap_rms = 0.0;
  if (uses_coarse) {
    gap_rms = clock.run("calibration", [&] {
      return calibrate_coarse_sigma(*problem, cfg.calibration_samples, Rng(cfg.seed).split(7));
    });
    if (cfg.auto_calibrate) {
      run_cfg.sigma1 = 0.0;
      run_cfg.sigma2 = gap_rms;
    } else if (cfg.sigma2 < gap_rms) {
      throw ConfigError("field 'sigma2': " + format_real(cfg.sigma2) +
                        " is below the measured coarse/fine energy gap " + format_real(gap_rms));
    }
  }

  auto fine_a = clock.run("setup", [&] {
    return std::make_unique<PosteriorEnergy>(*problem, Fidelity::fine, run_cfg.sigma1, cfg.fd_step, mode);
  });
  auto fine_b = clock.run("setup", [&] {
    return std::make_unique<PosteriorEnergy>(*problem, Fidelity::fine, run_cfg.sigma1, cfg.fd_step, mode);
  });
  auto coarse = clock.run("setup", [&] {
    return std::make_unique<PosteriorEnergy>(*problem, Fidelity::coarse, run_cfg.sigma2, cfg.fd_step, mode);
  });

  ParameterVector init(2);
  if (cfg.init) {
    init << (*cfg.init)[0], (*cfg.init)[1];
  } else if (two_mode) {
    const Point2 m = two_mode_analytic_modes().front();
    init << m.x, m.y;
  } else {
    init << 0.5, 0.5;
  }

  const Circle circle = infinite_mode_circle();
  json runs = json::object();
  std::vector<std::pair<std::string, double>> metrics;
  if (uses_coarse) metrics.emplace_back("coarse_gap_rms", gap_rms);

  for (std::size_t vi = 0; vi < vars.size(); ++vi) {
    const Variant& v = vars[vi];
    const std::size_t evals_before = fine_a->forward_evaluations() + fine_b->forward_evaluations() +
                                     coarse->forward_evaluations();
    VariantRun run = clock.run("sampling", [&] {
      return run_variant(v, run_cfg, *fine_a, *fine_b, *coarse, init, nullptr);
    });
    const std::size_t evals = fine_a->forward_evaluations() + fine_b->forward_evaluations() +
                              coarse->forward_evaluations() - evals_before;

    json r = clock.run("metrics", [&] {
      ModeDiagnostics diag;
      diag.burn_in = cfg.burn_in;
      for (const auto& s : run.low.snapshots) diag.samples.push_back({s.position[0], s.position[1]});
      if (two_mode)
        diag.mode_centers = two_mode_analytic_modes();
      else
        diag.circle = circle;
      const CoverageReport cov = mode_coverage(diag);
      json j;
      if (two_mode) {
        j["mode_fractions"] = cov.mode_fractions;
        metrics.emplace_back(v.name + ".mode_fraction_left", cov.mode_fractions[0]);
        metrics.emplace_back(v.name + ".mode_fraction_right", cov.mode_fractions[1]);
      } else {
        j["angular_coverage"] = *cov.angular_coverage;
        metrics.emplace_back(v.name + ".angular_coverage", *cov.angular_coverage);
      }
      j["samples_used"] = cov.samples_used;
      j["seconds"] = run.seconds;
      j["seconds_per_step"] = run.seconds / static_cast<double>(cfg.steps);
      j["forward_evaluations"] = evals;
      j["rejection_rate_low"] = static_cast<double>(run.rejected_low) / static_cast<double>(cfg.steps);
      j["rejection_rate_high"] = static_cast<double>(run.rejected_high) / static_cast<double>(cfg.steps);
      j["swap"] = swap_summary(run);
      metrics.emplace_back(v.name + ".seconds_per_step", run.seconds / static_cast<double>(cfg.steps));
      metrics.emplace_back(v.name + ".swap_rate", j["swap"]["swap_rate"].get<double>());
      metrics.emplace_back(v.name + ".rejection_rate_low", j["rejection_rate_low"].get<double>());
      return j;
    });
    runs[v.name] = r;

    clock.run("output", [&] {
      {
        auto f = out.open(samples_name(v, vi == 0));
        f << "step,x,y,energy,chain_id\n";
        auto dump = [&](const Trajectory& t, int chain) {
          for (const auto& s : t.snapshots)
            f << s.step_count << ',' << format_real(s.position[0]) << ',' << format_real(s.position[1]) << ','
              << format_real(s.last_energy) << ',' << chain << '\n';
        };
        dump(run.low, 0);
        dump(run.high, 1);
      }
      if (v.pair) {
        auto f = out.open(vi == 0 ? "swaplog.csv" : "swaplog_" + v.name + ".csv");
        write_swap_log_csv(f, run.swap_log);
      }
      SvgPlot plot(cfg.experiment + " posterior samples (" + v.name + ")", "x", "y");
      plot.set_range(0, 1, 0, 1);
      std::vector<std::pair<double, double>> pts;
      const auto skip = static_cast<std::size_t>(cfg.burn_in * static_cast<double>(run.low.snapshots.size()));
      for (std::size_t i = skip; i < run.low.snapshots.size(); ++i)
        pts.emplace_back(run.low.snapshots[i].position[0], run.low.snapshots[i].position[1]);
      plot.add_scatter(pts, "#1f77b4");
      if (two_mode) {
        std::vector<std::pair<double, double>> modes;
        for (const Point2& m : two_mode_analytic_modes()) modes.emplace_back(m.x, m.y);
        plot.add_markers(modes, "black");
      } else {
        plot.add_circle(circle.center.x, circle.center.y, circle.radius, "black");
      }
      std::vector<std::pair<double, double>> sensors;
      for (const Point2& s : problem->sensors.locations) sensors.emplace_back(s.x, s.y);
      plot.add_markers(sensors, "#d62728", 3.0);
      out.svg("scatter_" + v.name + ".svg", plot);
    });
  }

  // Wall-clock ratio of the multi-fidelity pair against the fine/fine pair.
  if (runs.contains("mresgld") && runs.contains("resgld")) {
    const double ratio = runs["mresgld"]["seconds"].get<double>() / runs["resgld"]["seconds"].get<double>();
    metrics.emplace_back("mresgld_over_resgld_seconds", ratio);
  }

  RunReport report;
  clock.run("output", [&] { write_metrics(out, metrics); });
  report.data["experiment"] = cfg.experiment;
  report.data["config"] = run_cfg.to_json();
  report.data["runs"] = runs;
  report.data["snap_distance"] = problem->snap_distance;
  report.data["observations"] = std::vector<double>(problem->observations.data(),
                                                    problem->observations.data() + problem->observations.size());
  json m = json::object();
  for (const auto& [k, val] : metrics) m[k] = val;
  report.data["metrics"] = m;
  report.data["timing"] = clock.timings();
  return {report.data, out.files()};
}

// ---------------------------------------------------------------------------
// PINN experiments.

PinnProblem pinn_problem(const std::string& id, Fidelity f) {
  if (id == "qgd_forward") return build_qgd_forward(f);
  if (id == "qgd_inverse") return build_qgd_inverse(f);
  return build_nonlinear_inverse(f);
}

RunReport run_pinn(const ExperimentConfig& cfg) {
  PhaseClock clock;
  Output out(cfg.output_dir);
  ExperimentConfig run_cfg = cfg;

  auto setup = [&](Fidelity f) {
    PinnProblem p = pinn_problem(cfg.experiment, f);
    p.alpha_init = cfg.alpha_init;
    p.loss.sigma_u = cfg.sigma_u;
    p.loss.sigma_f = cfg.sigma_f;
    p.loss.sigma_b = cfg.sigma_b;
    p.loss.prior_std = cfg.prior_std;
    return p;
  };
  const PinnProblem fine = clock.run("setup", [&] { return setup(Fidelity::fine); });
  const PinnProblem coarse = clock.run("setup", [&] { return setup(Fidelity::coarse); });

  if (cfg.auto_calibrate) {
    run_cfg.sigma1 = 0.0;
    run_cfg.sigma2 = clock.run("calibration", [&] {
      return calibrate_collocation_sigma(fine, coarse, cfg.calibration_samples, Rng(cfg.seed).split(7));
    });
  }

  PinnEnergyModel fine_a(fine, run_cfg.sigma1), fine_b(fine, run_cfg.sigma1), coarse_m(coarse, run_cfg.sigma2);
  Rng init_rng = Rng(cfg.seed).split(50);
  const ParameterVector init = fine.network.initialize(init_rng, cfg.alpha_init);
  const bool inverse = fine.network.has_inverse_slot();

  const Eigen::Matrix2Xd& grid = fine.evaluation_grid;
  Eigen::VectorXd exact(grid.cols());
  for (Eigen::Index i = 0; i < grid.cols(); ++i) exact[i] = fine.pde.exact(grid(0, i), grid(1, i));
  const auto burn_step = static_cast<std::size_t>(std::floor(cfg.burn_in * static_cast<double>(cfg.steps)));

  json runs = json::object();
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> curves;
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> alpha_traces;
  const auto vars = variants(cfg);

  for (std::size_t vi = 0; vi < vars.size(); ++vi) {
    const Variant& v = vars[vi];
    struct LogRow {
      std::size_t step;
      double rel, energy, alpha;
      int chain;
      bool swapped;
    };
    std::vector<LogRow> log;
    Welford rel_stats, alpha_stats;
    std::vector<Welford> pred(static_cast<std::size_t>(grid.cols()));
    bool swapped_since_log = false;
    std::vector<std::pair<double, double>> curve, trace;

    StepObserver observer = [&](std::size_t step, const ChainState& low, const ChainState* high, bool swapped) {
      swapped_since_log = swapped_since_log || swapped;
      if (step % cfg.log_interval != 0 && step != cfg.steps) return;
      const Eigen::VectorXd u = predict(fine.network, low.position, grid);
      const double rel = relative_error(u, exact);
      const double alpha = inverse ? fine.network.alpha(low.position) : 0.0;
      log.push_back({step, rel, low.last_energy, alpha, 0, swapped_since_log});
      if (high) {
        const double rel_h = relative_error(fine.network, high->position, fine.pde, grid);
        const double alpha_h = inverse ? fine.network.alpha(high->position) : 0.0;
        log.push_back({step, rel_h, high->last_energy, alpha_h, 1, swapped_since_log});
      }
      swapped_since_log = false;
      curve.emplace_back(static_cast<double>(step), rel);
      trace.emplace_back(static_cast<double>(step), alpha);
      if (step > burn_step) {
        rel_stats.add(rel);
        alpha_stats.add(alpha);
        for (Eigen::Index i = 0; i < u.size(); ++i) pred[static_cast<std::size_t>(i)].add(u[i]);
      }
    };

    VariantRun run = clock.run("sampling", [&] {
      return run_variant(v, run_cfg, fine_a, fine_b, coarse_m, init, observer);
    });

    json r;
    r["seconds"] = run.seconds;
    r["logged_after_burn_in"] = rel_stats.n;
    r["relative_error_mean"] = rel_stats.mean;
    r["relative_error_variance"] = rel_stats.variance();
    r["final_relative_error"] = curve.empty() ? 0.0 : curve.back().second;
    double pred_var = 0.0;
    for (const auto& w : pred) pred_var += w.variance();
    pred_var /= static_cast<double>(pred.size());
    r["prediction_variance_mean"] = pred_var;
    r["swap"] = swap_summary(run);
    metrics.emplace_back(v.name + ".relative_error_mean", rel_stats.mean);
    metrics.emplace_back(v.name + ".relative_error_variance", rel_stats.variance());
    metrics.emplace_back(v.name + ".prediction_variance_mean", pred_var);
    if (inverse) {
      r["alpha_mean"] = alpha_stats.mean;
      r["alpha_variance"] = alpha_stats.variance();
      metrics.emplace_back(v.name + ".alpha_mean", alpha_stats.mean);
      metrics.emplace_back(v.name + ".alpha_variance", alpha_stats.variance());
    }
    metrics.emplace_back(v.name + ".swap_rate", r["swap"]["swap_rate"].get<double>());
    runs[v.name] = r;
    curves.emplace_back(v.name, curve);
    alpha_traces.emplace_back(v.name, trace);

    clock.run("output", [&] {
      {
        auto f = out.open(samples_name(v, vi == 0));
        f << "epoch,relative_error,energy,alpha,chain_id,swapped\n";
        for (const auto& row : log)
          f << row.step << ',' << format_real(row.rel) << ',' << format_real(row.energy) << ','
            << format_real(row.alpha) << ',' << row.chain << ',' << (row.swapped ? 1 : 0) << '\n';
      }
      {
        auto f = out.open(vi == 0 ? "predictions.csv" : "predictions_" + v.name + ".csv");
        f << "x,t,u_pred_mean,u_pred_var,u_exact\n";
        for (Eigen::Index i = 0; i < grid.cols(); ++i) {
          const auto& w = pred[static_cast<std::size_t>(i)];
          f << format_real(grid(0, i)) << ',' << format_real(grid(1, i)) << ',' << format_real(w.mean) << ','
            << format_real(w.variance()) << ',' << format_real(exact[i]) << '\n';
        }
      }
      if (v.pair) {
        auto f = out.open(vi == 0 ? "swaplog.csv" : "swaplog_" + v.name + ".csv");
        write_swap_log_csv(f, run.swap_log);
      }
      SvgPlot band(cfg.experiment + " prediction (" + v.name + ")", "x", "u");
      std::vector<double> xs, lo, hi;
      std::vector<std::pair<double, double>> mean_line, exact_line;
      for (Eigen::Index i = 0; i < grid.cols(); ++i) {
        const auto& w = pred[static_cast<std::size_t>(i)];
        const double sd = std::sqrt(w.variance());
        xs.push_back(grid(0, i));
        lo.push_back(w.mean - 2.0 * sd);
        hi.push_back(w.mean + 2.0 * sd);
        mean_line.emplace_back(grid(0, i), w.mean);
        exact_line.emplace_back(grid(0, i), exact[i]);
      }
      band.add_band(xs, lo, hi, "#1f77b4");
      band.add_line(mean_line, "#1f77b4", "posterior mean");
      band.add_line(exact_line, "black", "exact");
      out.svg("prediction_" + v.name + ".svg", band);
    });
  }

  clock.run("output", [&] {
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
    SvgPlot err(cfg.experiment + " relative error", "epoch", "relative error");
    err.set_log_y(true);
    for (std::size_t i = 0; i < curves.size(); ++i) err.add_line(curves[i].second, colors[i % 4], curves[i].first);
    out.svg("relative_error.svg", err);
    if (inverse) {
      SvgPlot al(cfg.experiment + " alpha", "epoch", "alpha");
      for (std::size_t i = 0; i < alpha_traces.size(); ++i)
        al.add_line(alpha_traces[i].second, colors[i % 4], alpha_traces[i].first);
      out.svg("alpha.svg", al);
    }
    write_metrics(out, metrics);
  });

  RunReport report;
  report.data["experiment"] = cfg.experiment;
  report.data["config"] = run_cfg.to_json();
  report.data["runs"] = runs;
  report.data["parameter_count"] = fine.network.parameter_count();
  if (inverse) report.data["alpha_true"] = fine.pde.alpha_true;
  json m = json::object();
  for (const auto& [k, val] : metrics) m[k] = val;
  report.data["metrics"] = m;
  report.data["timing"] = clock.timings();
  return {report.data, out.files()};
}

// ---------------------------------------------------------------------------
// Double well U(x) = (x^2 - 1)^2 with exact energies.

class DoubleWell final : public EnergyModel {
 public:
  double energy(const ParameterVector& x) override {
    const double s = x[0] * x[0] - 1.0;
    return s * s;
  }
  ParameterVector gradient(const ParameterVector& x) override {
    ParameterVector g(1);
    g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0);
    return g;
  }
  double sigma() const override { return 0.0; }
};

RunReport run_double_well(const ExperimentConfig& cfg) {
  PhaseClock clock;
  Output out(cfg.output_dir);
  DoubleWell low, high;
  ParameterVector init(1);
  init << (cfg.init ? (*cfg.init)[0] : -1.0);

  ExperimentConfig run_cfg = cfg;
  run_cfg.sigma1 = run_cfg.sigma2 = 0.0;
  const VariantRun run = clock.run("sampling", [&] {
    return run_variant(variant_of("resgld"), run_cfg, low, high, high, init, nullptr);
  });

  constexpr int kBins = 80;
  constexpr double kLo = -2.0, kHi = 2.0;
  const double width = (kHi - kLo) / kBins;
  std::vector<double> target(kBins), empirical(kBins, 0.0);
  const double tv = clock.run("metrics", [&] {
    double z = 0.0;
    for (int b = 0; b < kBins; ++b) {
      // Simpson's rule per bin.
      const double a = kLo + b * width, m = a + 0.5 * width, e = a + width;
      auto w = [&](double x) { return std::exp(-(x * x - 1) * (x * x - 1) / cfg.tau_low); };
      target[b] = width / 6.0 * (w(a) + 4.0 * w(m) + w(e));
      z += target[b];
    }
    for (double& t : target) t /= z;
    const auto skip = static_cast<std::size_t>(cfg.burn_in * static_cast<double>(run.low.snapshots.size()));
    std::size_t used = 0;
    for (std::size_t i = skip; i < run.low.snapshots.size(); ++i) {
      const double x = run.low.snapshots[i].position[0];
      ++used;
      if (x < kLo || x >= kHi) continue;
      empirical[static_cast<std::size_t>((x - kLo) / width)] += 1.0;
    }
    double dist = 0.0;
    for (int b = 0; b < kBins; ++b) {
      empirical[b] /= static_cast<double>(std::max<std::size_t>(used, 1));
      dist += std::abs(empirical[b] - target[b]);
    }
    // Mass outside the histogram range counts fully against the sample.
    double inside = 0.0;
    for (double e : empirical) inside += e;
    return 0.5 * (dist + (1.0 - inside));
  });

  std::vector<double> errors;
  clock.run("discretization", [&] {
    ParameterVector lo(1), hi(1);
    lo << -1.0;
    hi << 1.0;
    for (std::size_t i = 0; i < cfg.discretization_etas.size(); ++i) {
      DoubleWell model;
      errors.push_back(coupled_discretization_error(model, cfg.tau_low, cfg.tau_high, cfg.discretization_etas[i], 4,
                                                    cfg.discretization_horizon, cfg.discretization_paths, lo, hi,
                                                    Rng(cfg.seed).split(300 + i)));
    }
  });
  bool monotone = true;
  for (std::size_t i = 1; i < errors.size(); ++i) monotone = monotone && errors[i] < errors[i - 1];

  std::vector<std::pair<std::string, double>> metrics = {{"total_variation", tv},
                                                         {"swap_rate", run.attempts ? double(run.swaps) / double(run.attempts) : 0.0},
                                                         {"discretization_monotone", monotone ? 1.0 : 0.0}};
  for (std::size_t i = 0; i < errors.size(); ++i)
    metrics.emplace_back("discretization_error_eta_" + format_real(cfg.discretization_etas[i]), errors[i]);

  clock.run("output", [&] {
    {
      auto f = out.open("samples.csv");
      f << "step,x,energy,chain_id\n";
      auto dump = [&](const Trajectory& t, int chain) {
        for (const auto& s : t.snapshots)
          f << s.step_count << ',' << format_real(s.position[0]) << ',' << format_real(s.last_energy) << ',' << chain
            << '\n';
      };
      dump(run.low, 0);
      dump(run.high, 1);
    }
    {
      auto f = out.open("swaplog.csv");
      write_swap_log_csv(f, run.swap_log);
    }
    write_metrics(out, metrics);
    SvgPlot hist("double well low-chain marginal", "x", "probability per bin");
    std::vector<std::pair<double, double>> t_line, e_line;
    for (int b = 0; b < kBins; ++b) {
      const double c = kLo + (b + 0.5) * width;
      t_line.emplace_back(c, target[b]);
      e_line.emplace_back(c, empirical[b]);
    }
    hist.add_line(t_line, "black", "exp(-U/tau1)");
    hist.add_line(e_line, "#1f77b4", "samples");
    out.svg("histogram.svg", hist);
    SvgPlot disc("coupled discretization error", "eta", "mean sup deviation^2");
    disc.set_log_y(true);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < errors.size(); ++i) pts.emplace_back(cfg.discretization_etas[i], errors[i]);
    disc.add_line(pts, "#d62728", "eta vs eta/4");
    disc.add_markers(pts, "#d62728");
    out.svg("discretization.svg", disc);
  });

  RunReport report;
  report.data["experiment"] = cfg.experiment;
  report.data["config"] = run_cfg.to_json();
  report.data["total_variation"] = tv;
  report.data["discretization_errors"] = errors;
  report.data["discretization_monotone"] = monotone;
  report.data["swap"] = swap_summary(run);
  json m = json::object();
  for (const auto& [k, val] : metrics) m[k] = val;
  report.data["metrics"] = m;
  report.data["timing"] = clock.timings();
  return {report.data, out.files()};
}

// ---------------------------------------------------------------------------

RunReport run_swap_unbiasedness(const ExperimentConfig& cfg) {
  PhaseClock clock;
  Output out(cfg.output_dir);
  const SwapVerification v = clock.run("sampling", [&] { return verify_swap_unbiasedness(cfg); });

  clock.run("output", [&] {
    auto f = out.open("samples.csv");
    f << "tau_low,tau_high,sigma1,sigma2,a1,exact,mean,std_error,z,negated_mean,negated_z,independent_mean\n";
    for (const auto& c : v.cells)
      f << format_real(c.tau_low) << ',' << format_real(c.tau_high) << ',' << format_real(c.sigma1) << ','
        << format_real(c.sigma2) << ',' << format_real(c.a1) << ',' << format_real(c.exact) << ','
        << format_real(c.mean) << ',' << format_real(c.std_error) << ',' << format_real(c.z) << ','
        << format_real(c.negated_mean) << ',' << format_real(c.negated_z) << ',' << format_real(c.independent_mean)
        << '\n';
    write_metrics(out, {{"max_abs_z", v.max_abs_z},
                        {"passed", v.passed ? 1.0 : 0.0},
                        {"negated_failures", static_cast<double>(v.negated_failures)}});
    SvgPlot plot("swap factor z-scores per cell", "cell", "z");
    std::vector<std::pair<double, double>> plus, minus;
    for (std::size_t i = 0; i < v.cells.size(); ++i) {
      plus.emplace_back(static_cast<double>(i), v.cells[i].z);
      minus.emplace_back(static_cast<double>(i), std::clamp(v.cells[i].negated_z, -50.0, 50.0));
    }
    plot.add_markers(plus, "#1f77b4");
    plot.add_markers(minus, "#d62728", 3.0);
    plot.add_line({{0.0, 4.0}, {static_cast<double>(v.cells.size() - 1), 4.0}}, "gray", "|z| = 4");
    plot.add_line({{0.0, -4.0}, {static_cast<double>(v.cells.size() - 1), -4.0}}, "gray", "");
    out.svg("zscores.svg", plot);
  });

  RunReport report;
  json cells = json::array();
  for (const auto& c : v.cells)
    cells.push_back({{"tau_low", c.tau_low}, {"tau_high", c.tau_high}, {"sigma1", c.sigma1}, {"sigma2", c.sigma2},
                     {"a1", c.a1}, {"exact", c.exact}, {"mean", c.mean}, {"std_error", c.std_error}, {"z", c.z},
                     {"negated_mean", c.negated_mean}, {"negated_z", c.negated_z},
                     {"independent_mean", c.independent_mean}});
  report.data["experiment"] = cfg.experiment;
  report.data["config"] = cfg.to_json();
  report.data["cells"] = cells;
  report.data["checked_variant"] = v.negated ? "negated" : "plus";
  report.data["max_abs_z"] = v.max_abs_z;
  report.data["passed"] = v.passed;
  report.data["negated_failures"] = v.negated_failures;
  report.data["timing"] = clock.timings();
  return {report.data, out.files()};
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& experiment_ids() { return kExperiments; }

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  using Setter = std::function<void(const json&, const std::string&)>;
  const std::map<std::string, Setter> fields = {
      {"experiment", [&](const json& v, const std::string& k) { c.experiment = read_string(v, k); }},
      {"comment", [&](const json& v, const std::string& k) { c.comment = read_string(v, k); }},
      {"sampler", [&](const json& v, const std::string& k) { c.sampler = read_string(v, k); }},
      {"sgld_temperature", [&](const json& v, const std::string& k) { c.sgld_temperature = read_string(v, k); }},
      {"compare",
       [&](const json& v, const std::string& k) {
         if (!v.is_array()) bad_field(k, "an array of sampler names");
         c.compare.clear();
         for (std::size_t i = 0; i < v.size(); ++i) c.compare.push_back(read_string(v[i], k + "[" + std::to_string(i) + "]"));
       }},
      {"seed", [&](const json& v, const std::string& k) { c.seed = read_count(v, k, true); }},
      {"steps", [&](const json& v, const std::string& k) { c.steps = read_count(v, k, true); }},
      {"burn_in", [&](const json& v, const std::string& k) { c.burn_in = read_number(v, k); }},
      {"thinning", [&](const json& v, const std::string& k) { c.thinning = read_count(v, k); }},
      {"step_size", [&](const json& v, const std::string& k) { c.step_size = read_positive(v, k); }},
      {"tau_low", [&](const json& v, const std::string& k) { c.tau_low = read_positive(v, k); }},
      {"tau_high", [&](const json& v, const std::string& k) { c.tau_high = read_positive(v, k); }},
      {"swap_interval", [&](const json& v, const std::string& k) { c.swap_interval = read_count(v, k); }},
      {"intensity",
       [&](const json& v, const std::string& k) {
         if (v.is_string() && v.get<std::string>() == "auto")
           c.intensity.reset();
         else if (v.is_number())
           c.intensity = read_positive(v, k);
         else
           bad_field(k, "a positive number or \"auto\"");
       }},
      {"a1", [&](const json& v, const std::string& k) { c.a1 = read_number(v, k); }},
      {"a2",
       [&](const json& v, const std::string& k) {
         const double a2 = read_number(v, k);
         if (!j.contains("a1")) c.a1 = 1.0 - a2;
         else if (std::abs(c.a1 + a2 - 1.0) > 1e-12 && std::abs(j["a1"].get<double>() + a2 - 1.0) > 1e-12)
           bad_field(k, "1 - a1");
       }},
      {"sigma1", [&](const json& v, const std::string& k) { c.sigma1 = read_nonnegative(v, k); }},
      {"sigma2", [&](const json& v, const std::string& k) { c.sigma2 = read_nonnegative(v, k); }},
      {"auto_calibrate", [&](const json& v, const std::string& k) { c.auto_calibrate = read_bool(v, k); }},
      {"calibration_samples", [&](const json& v, const std::string& k) { c.calibration_samples = read_count(v, k); }},
      {"output_dir", [&](const json& v, const std::string& k) { c.output_dir = read_string(v, k); }},
      {"obs_sigma", [&](const json& v, const std::string& k) { c.obs_sigma = read_positive(v, k); }},
      {"fd_step", [&](const json& v, const std::string& k) { c.fd_step = read_positive(v, k); }},
      {"forward_mode", [&](const json& v, const std::string& k) { c.forward_mode = read_string(v, k); }},
      {"init", [&](const json& v, const std::string& k) { c.init = read_numbers(v, k); }},
      {"log_interval", [&](const json& v, const std::string& k) { c.log_interval = read_count(v, k); }},
      {"alpha_init", [&](const json& v, const std::string& k) { c.alpha_init = read_number(v, k); }},
      {"sigma_u", [&](const json& v, const std::string& k) { c.sigma_u = read_positive(v, k); }},
      {"sigma_f", [&](const json& v, const std::string& k) { c.sigma_f = read_positive(v, k); }},
      {"sigma_b", [&](const json& v, const std::string& k) { c.sigma_b = read_positive(v, k); }},
      {"prior_std", [&](const json& v, const std::string& k) { c.prior_std = read_positive(v, k); }},
      {"log_intensity_offset",
       [&](const json& v, const std::string& k) { c.log_intensity_offset = read_number(v, k); }},
      {"draws", [&](const json& v, const std::string& k) { c.draws = read_count(v, k); }},
      {"negate", [&](const json& v, const std::string& k) { c.negate = read_bool(v, k); }},
      {"tau_pairs", [&](const json& v, const std::string& k) { c.tau_pairs = read_pairs(v, k); }},
      {"sigma_pairs", [&](const json& v, const std::string& k) { c.sigma_pairs = read_pairs(v, k); }},
      {"a1_values", [&](const json& v, const std::string& k) { c.a1_values = read_numbers(v, k); }},
      {"u_low", [&](const json& v, const std::string& k) { c.u_low = read_number(v, k); }},
      {"u_high", [&](const json& v, const std::string& k) { c.u_high = read_number(v, k); }},
      {"discretization_etas", [&](const json& v, const std::string& k) { c.discretization_etas = read_numbers(v, k); }},
      {"discretization_paths", [&](const json& v, const std::string& k) { c.discretization_paths = read_count(v, k); }},
      {"discretization_horizon",
       [&](const json& v, const std::string& k) { c.discretization_horizon = read_positive(v, k); }},
  };
  if (!j.contains("experiment")) throw ConfigError("field 'experiment': required");
  // a1 is read before a2 so the pair can be cross-checked.
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::stable_partition(keys.begin(), keys.end(), [](const std::string& k) { return k != "a2"; });
  for (const auto& key : keys) {
    auto f = fields.find(key);
    if (f == fields.end()) throw ConfigError("unknown key '" + key + "'");
    f->second(j[key], key);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = experiment;
  if (!comment.empty()) j["comment"] = comment;
  j["sampler"] = sampler;
  j["sgld_temperature"] = sgld_temperature;
  j["compare"] = compare;
  j["seed"] = seed;
  j["steps"] = steps;
  j["burn_in"] = burn_in;
  j["thinning"] = thinning;
  j["step_size"] = step_size;
  j["tau_low"] = tau_low;
  j["tau_high"] = tau_high;
  j["swap_interval"] = swap_interval;
  if (intensity)
    j["intensity"] = *intensity;
  else
    j["intensity"] = "auto";
  j["log_intensity_offset"] = log_intensity_offset;
  j["a1"] = a1;
  j["sigma1"] = sigma1;
  j["sigma2"] = sigma2;
  j["auto_calibrate"] = auto_calibrate;
  j["calibration_samples"] = calibration_samples;
  j["output_dir"] = output_dir;
  if (experiment == "two_mode" || experiment == "infinite_mode") {
    j["obs_sigma"] = obs_sigma;
    j["fd_step"] = fd_step;
    j["forward_mode"] = forward_mode;
  }
  if (init) j["init"] = *init;
  if (experiment == "qgd_forward" || experiment == "qgd_inverse" || experiment == "nonlinear_inverse") {
    j["log_interval"] = log_interval;
    j["alpha_init"] = alpha_init;
    j["sigma_u"] = sigma_u;
    j["sigma_f"] = sigma_f;
    j["sigma_b"] = sigma_b;
    j["prior_std"] = prior_std;
  }
  if (experiment == "swap_unbiasedness") {
    j["draws"] = draws;
    j["negate"] = negate;
    j["tau_pairs"] = tau_pairs;
    j["sigma_pairs"] = sigma_pairs;
    j["a1_values"] = a1_values;
    j["u_low"] = u_low;
    j["u_high"] = u_high;
  }
  if (experiment == "double_well") {
    j["discretization_etas"] = discretization_etas;
    j["discretization_paths"] = discretization_paths;
    j["discretization_horizon"] = discretization_horizon;
  }
  return j;
}

void ExperimentConfig::validate() const {
  if (std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end())
    throw ConfigError("field 'experiment': unknown experiment '" + experiment + "'");
  if (!kSamplers.count(sampler)) throw ConfigError("field 'sampler': expected sgld, resgld or mresgld");
  if (sgld_temperature != "low" && sgld_temperature != "high")
    throw ConfigError("field 'sgld_temperature': expected low or high");
  for (const auto& c : compare)
    if (!kCompare.count(c)) throw ConfigError("field 'compare': unknown sampler '" + c + "'");
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ConfigError("field 'burn_in': expected a fraction in [0, 1)");
  if (output_dir.empty()) throw ConfigError("field 'output_dir': must not be empty");

  if (experiment == "swap_unbiasedness") {
    for (const auto& p : tau_pairs)
      if (!(p[0] > 0 && p[0] < p[1])) throw ConfigError("field 'tau_pairs': each pair needs 0 < tau_low < tau_high");
    for (const auto& p : sigma_pairs)
      if (!(p[0] >= 0 && p[1] >= 0)) throw ConfigError("field 'sigma_pairs': sigmas must be non-negative");
    if (a1_values.empty()) throw ConfigError("field 'a1_values': must not be empty");
    for (double a : a1_values)
      if (!(a > 0 && a < 1)) throw ConfigError("field 'a1_values': each a1 must lie in (0, 1)");
    return;
  }

  if (steps == 0) throw ConfigError("field 'steps': must be positive");
  if (!(tau_low > 0.0 && tau_low < tau_high)) throw ConfigError("field 'tau_high': must exceed tau_low");
  if (!(a1 > 0.0 && a1 < 1.0)) throw ConfigError("field 'a1': must lie in (0, 1)");
  if (sampler == "mresgld" || std::count(compare.begin(), compare.end(), "mresgld")) {
    if (!auto_calibrate && sigma1 > sigma2)
      throw ConfigError("field 'sigma2': the coarse model's sigma must be at least sigma1");
  }
  if (experiment == "two_mode" || experiment == "infinite_mode") {
    if (forward_mode != "response" && forward_mode != "time_stepping")
      throw ConfigError("field 'forward_mode': expected response or time_stepping");
    if (!(fd_step < 0.25)) throw ConfigError("field 'fd_step': must be below 0.25");
    if (init) {
      if (init->size() != 2) throw ConfigError("field 'init': expected [x, y]");
      for (double v : *init)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("field 'init': must lie in [0, 1]^2");
    }
    if (steps / thinning < 100) throw ConfigError("field 'steps': need at least 100 recorded samples");
  }
  if (experiment == "double_well") {
    if (init && init->size() != 1) throw ConfigError("field 'init': expected [x]");
    if (discretization_etas.empty()) throw ConfigError("field 'discretization_etas': must not be empty");
    for (double e : discretization_etas)
      if (!(e > 0)) throw ConfigError("field 'discretization_etas': step sizes must be positive");
  }
  if (experiment == "qgd_forward" && sampler == "mresgld") {
    // nothing extra
  }
}

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  RunReport report;
  const auto t0 = std::chrono::steady_clock::now();
  if (config.experiment == "two_mode" || config.experiment == "infinite_mode")
    report = run_source_inversion(config);
  else if (config.experiment == "double_well")
    report = run_double_well(config);
  else if (config.experiment == "swap_unbiasedness")
    report = run_swap_unbiasedness(config);
  else
    report = run_pinn(config);
  report.data["timing"]["total"] = seconds_since(t0);

  const fs::path path = fs::path(config.output_dir) / "report.json";
  report.artifacts.push_back(path.string());
  report.data["artifacts"] = report.artifacts;
  std::ofstream out(path);
  if (!out) throw PhaseError("output", "cannot write " + path.string());
  out << report.data.dump(2) << '\n';
  return report;
}

// ---------------------------------------------------------------------------

SwapVerification verify_swap_unbiasedness(const ExperimentConfig& config) {
  SwapVerification result;
  result.negated = config.negate;
  Rng root(config.seed);
  std::uint64_t cell_id = 0;
  for (const auto& tp : config.tau_pairs) {
    for (const auto& sp : config.sigma_pairs) {
      for (double a1 : config.a1_values) {
        SwapConfig sc;
        sc.tau_low = tp[0];
        sc.tau_high = tp[1];
        sc.a1 = a1;
        sc.a2 = 1.0 - a1;
        sc.sigma1 = sp[0];
        sc.sigma2 = sp[1];
        sc.max_factor = 1e300;
        sc.validate();

        SwapCell cell{tp[0], tp[1], sp[0], sp[1], a1};
        cell.exact = swap_factor_exact(config.u_low, config.u_high, sc).value;
        Rng rng = root.split(cell_id++);
        Welford plus, minus, indep;
        for (std::size_t n = 0; n < config.draws; ++n) {
          // One shock per position, shared by both estimators.
          const double z_low = rng.normal(), z_high = rng.normal();
          const double u1l = config.u_low + sc.sigma1 * z_low, u1h = config.u_high + sc.sigma1 * z_high;
          const double u2l = config.u_low + sc.sigma2 * z_low, u2h = config.u_high + sc.sigma2 * z_high;
          plus.add(swap_factor_multi_variance(u1l, u1h, u2l, u2h, sc, CombineSign::plus).value);
          minus.add(swap_factor_multi_variance(u1l, u1h, u2l, u2h, sc, CombineSign::minus).value);
          const double i1l = config.u_low + sc.sigma1 * rng.normal(), i1h = config.u_high + sc.sigma1 * rng.normal();
          const double i2l = config.u_low + sc.sigma2 * rng.normal(), i2h = config.u_high + sc.sigma2 * rng.normal();
          indep.add(swap_factor_multi_variance(i1l, i1h, i2l, i2h, sc).value);
        }
        auto z_of = [&](const Welford& w, double* se_out) {
          const double se = std::sqrt(w.variance() / static_cast<double>(w.n));
          if (se_out) *se_out = se;
          if (se == 0.0) return w.mean == cell.exact ? 0.0 : std::copysign(INFINITY, w.mean - cell.exact);
          return (w.mean - cell.exact) / se;
        };
        cell.mean = plus.mean;
        cell.z = z_of(plus, &cell.std_error);
        cell.negated_mean = minus.mean;
        cell.negated_z = z_of(minus, nullptr);
        cell.independent_mean = indep.mean;
        if (sp[0] != sp[1] && std::abs(cell.negated_z) > 4.0) ++result.negated_failures;
        const double checked = config.negate ? cell.negated_z : cell.z;
        result.max_abs_z = std::max(result.max_abs_z, std::abs(checked));
        result.cells.push_back(cell);
      }
    }
  }
  result.passed = result.max_abs_z <= 4.0;
  return result;
}

}  // namespace mresgld
