#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mresgld/dual.hpp"
#include "mresgld/fidelity.hpp"
#include "mresgld/rng.hpp"
#include "mresgld/sampler.hpp"

namespace mresgld {

// Fully connected network with tanh hidden layers and a linear output. The
// weights live in a flat ParameterVector laid out layer by layer as a
// row-major (fan_out x fan_in) weight block followed by fan_out biases. When
// the inverse slot is enabled one extra scalar (alpha) is appended at the end.
//
// Inputs are multiplied by input_scale before entering the first layer;
// derivatives reported by input_derivatives are with respect to the unscaled
// inputs.
class DenseNetwork {
 public:
  explicit DenseNetwork(std::vector<int> widths = {2, 32, 32, 32, 1}, bool inverse_slot = false,
                        std::vector<double> input_scale = {});

  const std::vector<int>& widths() const { return widths_; }
  const std::vector<double>& input_scale() const { return input_scale_; }
  int input_dim() const { return widths_.front(); }
  std::size_t layer_count() const { return widths_.size() - 1; }
  std::size_t weight_count() const { return weight_count_; }
  std::size_t parameter_count() const { return weight_count_ + (inverse_slot_ ? 1 : 0); }
  bool has_inverse_slot() const { return inverse_slot_; }
  // Offset of layer l's weight block; its biases follow at offset + out * in.
  std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }

  // Gaussian weights with std 1/sqrt(fan_in), zero biases, alpha slot set to
  // alpha_init.
  ParameterVector initialize(Rng& rng, double alpha_init = 0.5) const;

  // Inverse scalar stored in the slot; throws if the network has none.
  double alpha(const ParameterVector& params) const;

  double forward(const ParameterVector& params, const Eigen::VectorXd& input) const;

  // Scalar-generic forward pass for a two-input network; used with dual
  // numbers to differentiate with respect to the inputs.
  template <class T>
  T forward2(const ParameterVector& params, const T& x, const T& t) const;

  void check_parameters(const ParameterVector& params) const;

 private:
  std::vector<int> widths_;
  bool inverse_slot_;
  std::vector<double> input_scale_;
  std::vector<std::size_t> offsets_;
  std::size_t weight_count_ = 0;
};

struct InputDerivatives {
  double u = 0.0;
  double u_x = 0.0;
  double u_xx = 0.0;
  double u_t = 0.0;
  double u_tt = 0.0;
};

// Which derivative families to compute; each requested family costs one
// second-order dual pass.
struct DerivativeRequest {
  bool space = true;
  bool time = true;
};

// Derivatives of any scalar function f(x, t) written generically over the
// scalar type, via nested dual numbers.
template <class F>
InputDerivatives input_derivatives(F&& f, double x, double t, DerivativeRequest req = {}) {
  InputDerivatives out;
  if (req.space || !req.time) {
    const Dual2 r = f(seed_variable(x), seed_constant(t));
    out.u = value(r);
    out.u_x = first(r);
    out.u_xx = second(r);
  }
  if (req.time) {
    const Dual2 r = f(seed_constant(x), seed_variable(t));
    out.u = value(r);
    out.u_t = first(r);
    out.u_tt = second(r);
  }
  return out;
}

InputDerivatives input_derivatives(const DenseNetwork& net, const ParameterVector& params,
                                   double x, double t, DerivativeRequest req = {});

// ---------------------------------------------------------------------------

enum class PdeFamily {
  qgd,       // u_t + alpha u_tt - kappa u_xx = f on [0,1] x [0,T]
  nonlinear  // -u_xx + alpha u^2 = f on [-1,1]
};

// PDE family with its manufactured solution. alpha_true generates the source;
// the residual uses the trainable alpha when the network has an inverse slot.
struct ResidualDefinition {
  PdeFamily family = PdeFamily::qgd;
  double alpha_true = 1.0;
  double kappa = 1.0;
  double t_final = 0.001;  // QGD only

  double exact(double x, double t) const;
  double exact_time_derivative(double x, double t) const;
  double source(double x, double t) const;
  double residual(const InputDerivatives& d, double alpha, double f) const;

  template <class T>
  T exact_generic(const T& x, const T& t) const;

  // Spatial extent of the domain.
  double x_min() const { return family == PdeFamily::qgd ? 0.0 : -1.0; }
  double x_max() const { return 1.0; }
};

// A block of points (columns of a 2 x N matrix holding (x, t)) with target
// values: the source f for the interior block, data values otherwise.
struct DataBlock {
  Eigen::Matrix2Xd points;
  Eigen::VectorXd values;

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  bool empty() const { return points.cols() == 0; }
};

struct CollocationSet {
  DataBlock interior;          // residual points, values = f
  DataBlock boundary;          // Dirichlet data
  DataBlock initial;           // u(x, 0)
  DataBlock initial_velocity;  // u_t(x, 0)
  DataBlock observation;       // sensor data

  void validate() const;
};

struct PinnLossSpec {
  double w1 = 1.0 / 3.0;
  double w2 = 1.0 / 3.0;
  double w3 = 1.0 / 3.0;
  double sigma_u = 0.1;  // initial, initial-velocity and observation data
  double sigma_f = 0.1;  // PDE residual
  double sigma_b = 0.1;  // boundary data
  double prior_std = 1.0;

  void validate() const;
};

// Energy broken into its likelihood factors. Each data term is
// sum r^2 / (2 sigma^2) / N over its block; the prior is |beta|^2 / (2 s^2).
struct PinnEnergyTerms {
  double residual = 0.0;
  double initial = 0.0;
  double initial_velocity = 0.0;
  double boundary = 0.0;
  double observation = 0.0;
  double prior = 0.0;
  // Mean squared errors for the deterministic weighted-loss view.
  double mse_u = 0.0;
  double mse_f = 0.0;
  double mse_b = 0.0;

  double likelihood() const { return residual + initial + initial_velocity + boundary + observation; }
  double total() const { return likelihood() + prior; }
  double weighted_loss(const PinnLossSpec& spec) const {
    return spec.w1 * mse_u + spec.w2 * mse_f + spec.w3 * mse_b;
  }
};

// Raised when a residual or data misfit becomes non-finite.
class PinnError : public std::runtime_error {
 public:
  PinnError(const std::string& what, Eigen::Vector2d point)
      : std::runtime_error(what), point_(point) {}
  const Eigen::Vector2d& point() const { return point_; }

 private:
  Eigen::Vector2d point_;
};

PinnEnergyTerms pinn_energy(const DenseNetwork& net, const ParameterVector& params,
                            const CollocationSet& colloc, const PinnLossSpec& spec,
                            const ResidualDefinition& pde);

// Reverse-mode gradient of pinn_energy(...).total() with respect to every
// entry of params, alpha slot included.
ParameterVector pinn_gradient(const DenseNetwork& net, const ParameterVector& params,
                              const CollocationSet& colloc, const PinnLossSpec& spec,
                              const ResidualDefinition& pde);

// Both at once; the energy comes from the same forward sweep.
std::pair<PinnEnergyTerms, ParameterVector> pinn_energy_and_gradient(
    const DenseNetwork& net, const ParameterVector& params, const CollocationSet& colloc,
    const PinnLossSpec& spec, const ResidualDefinition& pde);

// Network outputs at the columns of `points`.
Eigen::VectorXd predict(const DenseNetwork& net, const ParameterVector& params,
                        const Eigen::Matrix2Xd& points);

// |predicted - exact| / |exact| in the Euclidean norm.
double relative_error(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact);
double relative_error(const DenseNetwork& net, const ParameterVector& params,
                      const ResidualDefinition& pde, const Eigen::Matrix2Xd& grid);

// ---------------------------------------------------------------------------

struct PinnProblem {
  std::string name;
  DenseNetwork network;
  CollocationSet collocation;
  PinnLossSpec loss;
  ResidualDefinition pde;
  double alpha_init = 0.5;
  Eigen::Matrix2Xd evaluation_grid;  // 201 points at the terminal time / over the domain
};

// QGD forward problem: alpha = kappa = 1, T = 0.001, 64 (fine) or 48 (coarse)
// spatial points times 8 time levels including t = 0.
PinnProblem build_qgd_forward(Fidelity fidelity);
// QGD with a trainable alpha and 10 observations at the terminal time.
PinnProblem build_qgd_inverse(Fidelity fidelity);
// -u_xx + alpha u^2 = f on [-1,1] with 30 (fine) or 20 (coarse) interior
// points and 5 sensors; the network sees (x, 0).
PinnProblem build_nonlinear_inverse(Fidelity fidelity);

// EnergyModel adapter used by the samplers.
class PinnEnergyModel : public EnergyModel {
 public:
  PinnEnergyModel(PinnProblem problem, double assigned_sigma);

  double energy(const ParameterVector& params) override;
  ParameterVector gradient(const ParameterVector& params) override;
  Evaluation evaluate(const ParameterVector& params) override;
  double sigma() const override { return assigned_sigma_; }

  const PinnProblem& problem() const { return problem_; }
  PinnEnergyTerms terms(const ParameterVector& params) const;

 private:
  PinnProblem problem_;
  double assigned_sigma_;
};

// RMS of (coarse - fine) energy over n random initial networks.
double calibrate_collocation_sigma(const PinnProblem& fine, const PinnProblem& coarse,
                                   std::size_t n_networks, Rng rng);

// ---------------------------------------------------------------------------

template <class T>
T DenseNetwork::forward2(const ParameterVector& params, const T& x, const T& t) const {
  using std::tanh;
  if (input_dim() != 2) throw std::invalid_argument("forward2 needs a two-input network");
  check_parameters(params);
  std::vector<T> act{x * input_scale_[0], t * input_scale_[1]};
  std::vector<T> next;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const int in = widths_[l], out = widths_[l + 1];
    const double* w = params.data() + offsets_[l];
    const double* b = w + static_cast<std::size_t>(out) * in;
    next.assign(static_cast<std::size_t>(out), T(0.0));
    const bool hidden = l + 1 < layer_count();
    for (int i = 0; i < out; ++i) {
      T z(b[i]);
      for (int j = 0; j < in; ++j) z += act[static_cast<std::size_t>(j)] * w[i * in + j];
      next[static_cast<std::size_t>(i)] = hidden ? tanh(z) : z;
    }
    act.swap(next);
  }
  return act.front();
}

template <class T>
T ResidualDefinition::exact_generic(const T& x, const T& t) const {
  using std::exp;
  using std::sin;
  if (family == PdeFamily::qgd) return sin(x * (2.0 * std::numbers::pi)) * exp(-t);
  return exp(x * x * -2.0);
}

}  // namespace mresgld
