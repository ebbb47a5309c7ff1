#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mresgld/rng.hpp"

namespace mresgld {

using ParameterVector = Eigen::VectorXd;

struct Evaluation {
  double energy = 0.0;
  ParameterVector gradient;
};

// Noisy energy U_hat(position) with an assumed estimator standard deviation.
// sigma() must stay fixed for the lifetime of a sampling run.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;

  virtual double energy(const ParameterVector& position) = 0;
  virtual ParameterVector gradient(const ParameterVector& position) = 0;

  // Models that share work between the value and the gradient override this.
  virtual Evaluation evaluate(const ParameterVector& position) {
    return {energy(position), gradient(position)};
  }

  virtual double sigma() const = 0;

  // Support of the prior. Steps that leave it are rejected by sgld_step.
  virtual bool in_domain(const ParameterVector& /*position*/) const { return true; }
};

// Raised when a step cannot be taken (non-finite gradient or energy).
class SamplerError : public std::runtime_error {
 public:
  SamplerError(const std::string& what, ParameterVector position,
               std::optional<std::size_t> step = std::nullopt);

  const std::string& reason() const { return reason_; }
  const ParameterVector& position() const { return position_; }
  std::optional<std::size_t> step() const { return step_; }

 private:
  std::string reason_;
  ParameterVector position_;
  std::optional<std::size_t> step_;
};

using StepSchedule = std::function<double(std::size_t step, double base_step)>;

struct ChainConfig {
  double temperature = 1.0;
  double step_size = 1e-3;
  double estimator_sigma = 0.0;
  // Empty means constant step size.
  StepSchedule schedule;

  double step_at(std::size_t step) const {
    return schedule ? schedule(step, step_size) : step_size;
  }
  // Throws std::invalid_argument on a negative temperature, a non-positive
  // step size or a negative sigma. temperature == 0 is allowed and turns the
  // update into plain gradient descent.
  void validate() const;
};

struct ChainState {
  ParameterVector position;
  std::size_t step_count = 0;
  double last_energy = 0.0;
  std::size_t rejected_steps = 0;
  // Gradient at `position` from the last evaluation, reused by the next step.
  std::optional<ParameterVector> cached_gradient;
};

// Evaluates the model at `position` and fills last_energy / cached_gradient.
ChainState make_chain_state(const ParameterVector& position, EnergyModel& model);

// One SGLD update:
//   position' = position - eta * grad U_hat(position) + sqrt(2 eta tau) * eps.
// A proposal outside model.in_domain() is rejected (position kept,
// rejected_steps incremented). step_count always advances by one.
ChainState sgld_step(ChainState state, const ChainConfig& config, EnergyModel& model, Rng& rng);

struct Trajectory {
  std::vector<ChainState> snapshots;
  std::size_t thinning = 1;
};

// Runs n_steps SGLD updates from `init`, recording a snapshot after every
// `thinning`-th step.
Trajectory run_chain(const ParameterVector& init, const ChainConfig& config, EnergyModel& model,
                     std::size_t n_steps, Rng& rng, std::size_t thinning = 1);

}  // namespace mresgld
