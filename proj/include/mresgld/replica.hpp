#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <iosfwd>
#include <vector>

#include "mresgld/rng.hpp"
#include "mresgld/sampler.hpp"

namespace mresgld {

// Parameters of the two-chain swap rule. a1 + a2 == 1 always holds for a
// config built with make(); validate() checks the remaining invariants.
struct SwapConfig {
  double tau_low = 1.0;
  double tau_high = 10.0;
  double intensity = 1.0;
  double a1 = 0.5;
  double a2 = 0.5;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  // Factors above this value are clamped (and flagged).
  double max_factor = 1e12;
  // When set, replaces log(intensity). Lets r = exp(large) be used without
  // overflow; the swap probability is then computed in log space.
  std::optional<double> log_intensity;

  static SwapConfig make(double tau_low, double tau_high, double intensity, double a1 = 0.5,
                         double sigma1 = 0.0, double sigma2 = 0.0);

  double tau_delta() const { return 1.0 / tau_low - 1.0 / tau_high; }
  void validate() const;
};

struct SwapFactor {
  double value = 1.0;
  bool clamped = false;
  double exponent = 0.0;  // log of the unclamped factor
};

// S = exp(tau_delta * (u1 - u2)) with exact energies.
SwapFactor swap_factor_exact(double u1, double u2, const SwapConfig& cfg);

// Bias-corrected factor for a single estimator variance sigma^2:
// exp(tau_delta * (uhat1 - uhat2 - tau_delta * sigma^2)).
SwapFactor swap_factor_single_variance(double uhat1, double uhat2, double sigma,
                                       const SwapConfig& cfg);

// Sign used to combine the two estimator differences. `plus` is the combination
// for which the factor is unbiased; `minus` is kept so the failing variant can
// be demonstrated.
enum class CombineSign { plus, minus };

// Multi-variance factor built from the fine estimator (U1) and the coarse
// estimator (U2), each evaluated at both chain positions:
//   exp(tau_delta * [a1 (U1(b1) - U1(b2)) + a2 (U2(b1) - U2(b2))
//                    - (a1 sigma1 + a2 sigma2)^2 tau_delta])
SwapFactor swap_factor_multi_variance(double uhat1_low, double uhat1_high, double uhat2_low,
                                      double uhat2_high, const SwapConfig& cfg,
                                      CombineSign sign = CombineSign::plus);

// The four energies the swap rule consumes; "low"/"high" name the chain whose
// position was evaluated.
struct SwapEnergies {
  double u1_low = 0.0;   // fine model at the low-temperature position
  double u1_high = 0.0;  // fine model at the high-temperature position
  double u2_low = 0.0;   // coarse model at the low-temperature position
  double u2_high = 0.0;  // coarse model at the high-temperature position
};

struct ReplicaPairState {
  ChainState low;   // temperature tau_low, fine energy model
  ChainState high;  // temperature tau_high, coarse energy model
  std::size_t swap_count = 0;
  std::size_t attempt_count = 0;
};

struct SwapRecord {
  std::size_t step = 0;
  double s_hat = 0.0;
  SwapEnergies energies;
  bool swapped = false;
  bool clamped = false;
};

// Uses the cached last_energy of each chain for its own model and evaluates
// each model once at the other chain's position.
SwapEnergies evaluate_swap_energies(const ReplicaPairState& pair, EnergyModel& model_low,
                                    EnergyModel& model_high);

// Exchanges the two positions with probability min(1, r * eta * S_hat).
// Temperatures and models stay with their chains; cached gradients are dropped.
ReplicaPairState attempt_swap(ReplicaPairState pair, const SwapEnergies& energies,
                              const SwapConfig& cfg, double step_size, Rng& rng,
                              SwapRecord* record = nullptr);

struct PairRunOptions {
  std::size_t n_steps = 1000;
  std::size_t swap_interval = 1;
  std::size_t thinning = 1;
  bool record_trajectories = true;
  // Called after every step (after the swap attempt, if any).
  std::function<void(std::size_t step, const ReplicaPairState&)> observer;
};

struct PairRun {
  Trajectory low;
  Trajectory high;
  std::vector<SwapRecord> swap_log;
  ReplicaPairState final_state;
};

// Stream layout: rng.split(0) drives the low chain, split(1) the high chain,
// split(2) the swap decisions. A single chain run with rng.split(0) therefore
// sees the same noise as the pair's low chain.
PairRun run_replica_pair(const ParameterVector& init_low, const ParameterVector& init_high,
                         EnergyModel& model_low, EnergyModel& model_high, const SwapConfig& cfg,
                         const ChainConfig& chain_low, const ChainConfig& chain_high,
                         const PairRunOptions& options, const Rng& rng);

// CSV: step,s_hat,u1_low,u1_high,u2_low,u2_high,swapped
void write_swap_log_csv(std::ostream& out, const std::vector<SwapRecord>& log);

// Strong discretization error of the two-chain Langevin system on exact
// energies: paths with step eta and eta/refine share Brownian increments, and
// the mean over paths of sup_t |coarse - fine|^2 over [0, horizon] is returned.
// The swap rule is left out; both chains are coupled chain-by-chain.
double coupled_discretization_error(EnergyModel& model, double tau_low, double tau_high,
                                    double eta, std::size_t refine, double horizon,
                                    std::size_t n_paths, const ParameterVector& init_low,
                                    const ParameterVector& init_high, const Rng& rng);

}  // namespace mresgld
