#include "mresgld/replica.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "mresgld/io.hpp"

namespace mresgld {

namespace {

SwapFactor clamp_exp(double exponent, const SwapConfig& cfg) {
  const double log_max = std::log(cfg.max_factor);
  if (exponent > log_max) return {cfg.max_factor, true, exponent};
  return {std::exp(exponent), false, exponent};
}

}  // namespace

SwapConfig SwapConfig::make(double tau_low, double tau_high, double intensity, double a1,
                            double sigma1, double sigma2) {
  SwapConfig cfg;
  cfg.tau_low = tau_low;
  cfg.tau_high = tau_high;
  cfg.intensity = intensity;
  cfg.a1 = a1;
  cfg.a2 = 1.0 - a1;
  cfg.sigma1 = sigma1;
  cfg.sigma2 = sigma2;
  cfg.validate();
  return cfg;
}

void SwapConfig::validate() const {
  if (!(tau_low > 0.0)) throw std::invalid_argument("tau_low must be positive");
  if (!(tau_low < tau_high)) throw std::invalid_argument("tau_low must be below tau_high");
  if (!(intensity > 0.0)) throw std::invalid_argument("swap intensity must be positive");
  if (log_intensity && !std::isfinite(*log_intensity))
    throw std::invalid_argument("log swap intensity must be finite");
  if (!(a1 > 0.0 && a1 < 1.0) || !(a2 > 0.0 && a2 < 1.0))
    throw std::invalid_argument("a1 and a2 must lie in (0, 1)");
  if (std::abs(a1 + a2 - 1.0) > 1e-12) throw std::invalid_argument("a1 + a2 must equal 1");
  if (!(sigma1 >= 0.0) || !(sigma2 >= 0.0))
    throw std::invalid_argument("estimator sigmas must be non-negative");
  if (!(max_factor > 1.0)) throw std::invalid_argument("max_factor must exceed 1");
}

SwapFactor swap_factor_exact(double u1, double u2, const SwapConfig& cfg) {
  const double td = cfg.tau_delta();
  if (td == 0.0) return {1.0, false};
  return clamp_exp(td * (u1 - u2), cfg);
}

SwapFactor swap_factor_single_variance(double uhat1, double uhat2, double sigma,
                                       const SwapConfig& cfg) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  const double td = cfg.tau_delta();
  if (td == 0.0) return {1.0, false};
  return clamp_exp(td * (uhat1 - uhat2 - td * sigma * sigma), cfg);
}

SwapFactor swap_factor_multi_variance(double uhat1_low, double uhat1_high, double uhat2_low,
                                      double uhat2_high, const SwapConfig& cfg,
                                      CombineSign sign) {
  if (std::abs(cfg.a1 + cfg.a2 - 1.0) > 1e-12)
    throw std::invalid_argument("a1 + a2 must equal 1");
  const double td = cfg.tau_delta();
  if (td == 0.0) return {1.0, false};
  const double second = (sign == CombineSign::plus ? 1.0 : -1.0) * cfg.a2 * (uhat2_low - uhat2_high);
  const double spread = cfg.a1 * cfg.sigma1 + cfg.a2 * cfg.sigma2;
  return clamp_exp(td * (cfg.a1 * (uhat1_low - uhat1_high) + second - spread * spread * td), cfg);
}

SwapEnergies evaluate_swap_energies(const ReplicaPairState& pair, EnergyModel& model_low,
                                    EnergyModel& model_high) {
  SwapEnergies e;
  e.u1_low = pair.low.last_energy;
  e.u1_high = model_low.energy(pair.high.position);
  e.u2_low = model_high.energy(pair.low.position);
  e.u2_high = pair.high.last_energy;
  return e;
}

ReplicaPairState attempt_swap(ReplicaPairState pair, const SwapEnergies& energies,
                              const SwapConfig& cfg, double step_size, Rng& rng,
                              SwapRecord* record) {
  const SwapFactor s = swap_factor_multi_variance(energies.u1_low, energies.u1_high,
                                                  energies.u2_low, energies.u2_high, cfg);
  const double p = cfg.log_intensity
                       ? std::exp(std::min(0.0, *cfg.log_intensity + std::log(step_size) + s.exponent))
                       : std::min(1.0, cfg.intensity * step_size * s.value);
  const double u = rng.uniform();
  const bool swap = u < p;

  ++pair.attempt_count;
  if (swap) {
    ++pair.swap_count;
    std::swap(pair.low.position, pair.high.position);
    pair.low.last_energy = energies.u1_high;
    pair.high.last_energy = energies.u2_low;
    pair.low.cached_gradient.reset();
    pair.high.cached_gradient.reset();
  }
  if (record) {
    record->step = pair.low.step_count;
    record->s_hat = s.value;
    record->energies = energies;
    record->swapped = swap;
    record->clamped = s.clamped;
  }
  return pair;
}

PairRun run_replica_pair(const ParameterVector& init_low, const ParameterVector& init_high,
                         EnergyModel& model_low, EnergyModel& model_high, const SwapConfig& cfg,
                         const ChainConfig& chain_low, const ChainConfig& chain_high,
                         const PairRunOptions& options, const Rng& rng) {
  if (options.swap_interval == 0) throw std::invalid_argument("swap_interval must be >= 1");
  if (options.n_steps == 0) throw std::invalid_argument("n_steps must be positive");
  if (options.thinning == 0) throw std::invalid_argument("thinning must be positive");
  cfg.validate();
  chain_low.validate();
  chain_high.validate();

  Rng rng_low = rng.split(0);
  Rng rng_high = rng.split(1);
  Rng rng_swap = rng.split(2);

  PairRun run;
  run.low.thinning = options.thinning;
  run.high.thinning = options.thinning;

  ReplicaPairState pair;
  pair.low = make_chain_state(init_low, model_low);
  pair.high = make_chain_state(init_high, model_high);

  auto snapshot = [](const ChainState& s) {
    ChainState snap;
    snap.position = s.position;
    snap.step_count = s.step_count;
    snap.last_energy = s.last_energy;
    snap.rejected_steps = s.rejected_steps;
    return snap;
  };

  for (std::size_t k = 1; k <= options.n_steps; ++k) {
    try {
      pair.low = sgld_step(std::move(pair.low), chain_low, model_low, rng_low);
      pair.high = sgld_step(std::move(pair.high), chain_high, model_high, rng_high);
    } catch (const SamplerError& e) {
      throw SamplerError(e.reason(), e.position(), k);
    }
    if (k % options.swap_interval == 0) {
      const SwapEnergies energies = evaluate_swap_energies(pair, model_low, model_high);
      SwapRecord rec;
      pair = attempt_swap(std::move(pair), energies, cfg, chain_low.step_at(k - 1), rng_swap, &rec);
      run.swap_log.push_back(rec);
    }
    if (options.record_trajectories && k % options.thinning == 0) {
      run.low.snapshots.push_back(snapshot(pair.low));
      run.high.snapshots.push_back(snapshot(pair.high));
    }
    if (options.observer) options.observer(k, pair);
  }
  run.final_state = std::move(pair);
  return run;
}

void write_swap_log_csv(std::ostream& out, const std::vector<SwapRecord>& log) {
  out << "step,s_hat,u1_low,u1_high,u2_low,u2_high,swapped\n";
  for (const auto& r : log) {
    out << r.step << ',' << format_real(r.s_hat) << ',' << format_real(r.energies.u1_low) << ','
        << format_real(r.energies.u1_high) << ',' << format_real(r.energies.u2_low) << ','
        << format_real(r.energies.u2_high) << ',' << (r.swapped ? 1 : 0) << '\n';
  }
}

double coupled_discretization_error(EnergyModel& model, double tau_low, double tau_high,
                                    double eta, std::size_t refine, double horizon,
                                    std::size_t n_paths, const ParameterVector& init_low,
                                    const ParameterVector& init_high, const Rng& rng) {
  if (refine < 1 || !(eta > 0.0) || !(horizon > 0.0) || n_paths == 0)
    throw std::invalid_argument("invalid discretization study parameters");
  const auto coarse_steps = static_cast<std::size_t>(std::llround(horizon / eta));
  const double fine_eta = eta / static_cast<double>(refine);
  const double taus[2] = {tau_low, tau_high};
  const ParameterVector* inits[2] = {&init_low, &init_high};

  double total = 0.0;
  for (std::size_t path = 0; path < n_paths; ++path) {
    Rng path_rng = rng.split(path);
    double sup_dev = 0.0;
    ParameterVector coarse[2] = {init_low, init_high};
    ParameterVector fine[2] = {init_low, init_high};
    for (std::size_t k = 0; k < coarse_steps; ++k) {
      for (int c = 0; c < 2; ++c) {
        const Eigen::Index d = inits[c]->size();
        ParameterVector increment = ParameterVector::Zero(d);
        for (std::size_t j = 0; j < refine; ++j) {
          ParameterVector dw(d);
          for (Eigen::Index i = 0; i < d; ++i) dw[i] = std::sqrt(fine_eta) * path_rng.normal();
          fine[c] = fine[c] - fine_eta * model.gradient(fine[c]) + std::sqrt(2.0 * taus[c]) * dw;
          increment += dw;
        }
        coarse[c] = coarse[c] - eta * model.gradient(coarse[c]) + std::sqrt(2.0 * taus[c]) * increment;
      }
      const double dev = (coarse[0] - fine[0]).squaredNorm() + (coarse[1] - fine[1]).squaredNorm();
      sup_dev = std::max(sup_dev, dev);
    }
    total += sup_dev;
  }
  return total / static_cast<double>(n_paths);
}

}  // namespace mresgld
