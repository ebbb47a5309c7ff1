#include "mresgld/sampler.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace mresgld {

namespace {

std::string describe(const ParameterVector& v) {
  std::ostringstream out;
  out << "[";
  const Eigen::Index shown = std::min<Eigen::Index>(v.size(), 8);
  for (Eigen::Index i = 0; i < shown; ++i) out << (i ? ", " : "") << v[i];
  if (v.size() > shown) out << ", ... (" << v.size() << " entries)";
  out << "]";
  return out.str();
}

}  // namespace

SamplerError::SamplerError(const std::string& what, ParameterVector position,
                           std::optional<std::size_t> step)
    : std::runtime_error(what + " at position " + describe(position) +
                         (step ? " (step " + std::to_string(*step) + ")" : std::string())),
      reason_(what),
      position_(std::move(position)),
      step_(step) {}

void ChainConfig::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature))
    throw std::invalid_argument("temperature must be non-negative");
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw std::invalid_argument("step_size must be positive");
  if (!(estimator_sigma >= 0.0)) throw std::invalid_argument("estimator_sigma must be non-negative");
}

ChainState make_chain_state(const ParameterVector& position, EnergyModel& model) {
  ChainState state;
  state.position = position;
  Evaluation ev = model.evaluate(position);
  state.last_energy = ev.energy;
  state.cached_gradient = std::move(ev.gradient);
  return state;
}

ChainState sgld_step(ChainState state, const ChainConfig& config, EnergyModel& model, Rng& rng) {
  ParameterVector grad = state.cached_gradient ? std::move(*state.cached_gradient)
                                               : model.gradient(state.position);
  state.cached_gradient.reset();
  if (!grad.allFinite()) throw SamplerError("non-finite gradient", state.position);

  const double eta = config.step_at(state.step_count);
  const double noise_scale = std::sqrt(2.0 * eta * config.temperature);

  ParameterVector proposal = state.position - eta * grad;
  for (Eigen::Index i = 0; i < proposal.size(); ++i) proposal[i] += noise_scale * rng.normal();

  ++state.step_count;
  if (!model.in_domain(proposal)) {
    ++state.rejected_steps;
    state.cached_gradient = std::move(grad);
    return state;
  }
  if (!proposal.allFinite()) throw SamplerError("non-finite proposal", state.position);

  Evaluation ev = model.evaluate(proposal);
  if (!std::isfinite(ev.energy)) throw SamplerError("non-finite energy", proposal);
  state.position = std::move(proposal);
  state.last_energy = ev.energy;
  state.cached_gradient = std::move(ev.gradient);
  return state;
}

Trajectory run_chain(const ParameterVector& init, const ChainConfig& config, EnergyModel& model,
                     std::size_t n_steps, Rng& rng, std::size_t thinning) {
  if (n_steps == 0) throw std::invalid_argument("n_steps must be positive");
  if (thinning == 0) throw std::invalid_argument("thinning must be positive");
  config.validate();

  Trajectory traj;
  traj.thinning = thinning;
  traj.snapshots.reserve(n_steps / thinning);

  ChainState state = make_chain_state(init, model);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    try {
      state = sgld_step(std::move(state), config, model, rng);
    } catch (const SamplerError& e) {
      throw SamplerError(e.reason(), e.position(), k);
    }
    if (k % thinning == 0) {
      ChainState snap;
      snap.position = state.position;
      snap.step_count = state.step_count;
      snap.last_energy = state.last_energy;
      snap.rejected_steps = state.rejected_steps;
      traj.snapshots.push_back(std::move(snap));
    }
  }
  return traj;
}

}  // namespace mresgld
