#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mresgld {

// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while an experiment runs, tagged with the phase it happened in.
class PhaseError : public std::runtime_error {
 public:
  PhaseError(std::string phase, const std::string& what)
      : std::runtime_error("[" + phase + "] " + what), phase_(std::move(phase)) {}
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

const std::vector<std::string>& experiment_ids();

struct ExperimentConfig {
  std::string experiment;
  std::string comment;
  std::string sampler = "mresgld";           // sgld | resgld | mresgld
  std::string sgld_temperature = "low";      // which temperature a lone sgld chain uses
  std::vector<std::string> compare;          // extra runs: sgld, sgld_high, resgld, mresgld
  std::uint64_t seed = 1;
  std::size_t steps = 1000;
  double burn_in = 0.5;
  std::size_t thinning = 1;
  double step_size = 1e-3;
  double tau_low = 1.0;
  double tau_high = 10.0;
  std::size_t swap_interval = 1;
  std::optional<double> intensity;  // empty: r = exp(correction + log_intensity_offset) / eta
  double log_intensity_offset = 0.0;
  double a1 = 0.5;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  bool auto_calibrate = false;
  std::size_t calibration_samples = 50;
  std::string output_dir = "out";

  // Source inversion.
  double obs_sigma = 0.1;
  double fd_step = 1e-3;
  std::string forward_mode = "response";  // response | time_stepping
  std::optional<std::vector<double>> init;

  // PINN.
  std::size_t log_interval = 10;
  double alpha_init = 0.5;
  double sigma_u = 0.1;  // initial, initial-velocity and observation data
  double sigma_f = 0.1;  // PDE residual
  double sigma_b = 0.1;  // boundary data
  double prior_std = 1.0;

  // Swap-estimator verification.
  std::size_t draws = 100000;
  bool negate = false;
  std::vector<std::vector<double>> tau_pairs = {{1, 2}, {1, 10}};
  std::vector<std::vector<double>> sigma_pairs = {{0, 0}, {0.3, 1}, {1, 1}};
  std::vector<double> a1_values = {0.3, 0.5, 0.7};
  double u_low = 2.0;
  double u_high = 0.0;

  // Double well.
  std::vector<double> discretization_etas = {1e-2, 2.5e-3, 6.25e-4};
  std::size_t discretization_paths = 200;
  double discretization_horizon = 1.0;

  // Rejects unknown keys and ill-typed or out-of-range values.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
};

// Report of one run; `data` is written verbatim as report.json.
struct RunReport {
  nlohmann::json data;
  std::vector<std::string> artifacts;
};

RunReport run_experiment(const ExperimentConfig& config);

// ---------------------------------------------------------------------------

struct SwapCell {
  double tau_low = 0, tau_high = 0, sigma1 = 0, sigma2 = 0, a1 = 0;
  double exact = 0;
  double mean = 0, std_error = 0, z = 0;
  double negated_mean = 0, negated_z = 0;
  double independent_mean = 0;  // independent shocks per estimator; reported only
};

struct SwapVerification {
  std::vector<SwapCell> cells;
  bool negated = false;       // the checked variant is the negated one
  double max_abs_z = 0;       // of the checked variant
  bool passed = false;        // every |z| <= 4 for the checked variant
  std::size_t negated_failures = 0;  // sigma1 != sigma2 cells where the negated variant has |z| > 4
};

// Monte-Carlo check of the multi-variance swap factor over the config's grid
// of (tau pair, sigma pair, a1) cells, with U(low) = u_low and U(high) = u_high.
// Both estimators share the two per-position shocks, as in the martingale
// construction.
SwapVerification verify_swap_unbiasedness(const ExperimentConfig& config);

}  // namespace mresgld
