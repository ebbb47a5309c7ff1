#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "mresgld/fem.hpp"
#include "mresgld/fidelity.hpp"
#include "mresgld/rng.hpp"
#include "mresgld/sampler.hpp"

namespace mresgld {

// Source inversion with a flat prior on [0,1]^2 and likelihood
// exp(-|y - F(k)|^2 / obs_sigma^2).
struct InverseProblem {
  SensorSet sensors;
  Eigen::VectorXd observations;
  double obs_sigma = 0.1;
  SourceParams source_shape;  // h and M; x0 is the unknown
  ParabolicProblem fine;      // dx = 1/50
  ParabolicProblem coarse;    // dx = 1/25
  double snap_distance = 0.0;

  void validate() const;
};

// How F(k) is computed. Both produce the same discrete map; `response` uses the
// precomputed adjoint functional, `time_stepping` runs the full solver.
enum class ForwardMode { response, time_stepping };

class ForwardMap {
 public:
  virtual ~ForwardMap() = default;
  virtual Eigen::VectorXd observe(Point2 source_location) = 0;
};

std::unique_ptr<ForwardMap> make_forward_map(const InverseProblem& problem, Fidelity fidelity,
                                             ForwardMode mode);

// Posterior energy U(k) = |y - F(k)|^2 / obs_sigma^2 on the prior box. The
// gradient is a central finite difference with step fd_step (one-sided within
// fd_step of the box edge, counted in one_sided_gradients()).
class PosteriorEnergy : public EnergyModel {
 public:
  PosteriorEnergy(const InverseProblem& problem, Fidelity fidelity, double assigned_sigma,
                  double fd_step = 1e-3, ForwardMode mode = ForwardMode::response);

  double energy(const ParameterVector& k) override;
  ParameterVector gradient(const ParameterVector& k) override;
  double sigma() const override { return assigned_sigma_; }
  bool in_domain(const ParameterVector& k) const override;

  Eigen::VectorXd forward(Point2 k);
  Fidelity fidelity() const { return fidelity_; }
  double fd_step() const { return fd_step_; }
  std::size_t forward_evaluations() const { return forward_evaluations_; }
  std::size_t one_sided_gradients() const { return one_sided_gradients_; }

 private:
  double misfit(Point2 k);

  const InverseProblem* problem_;
  Fidelity fidelity_;
  double assigned_sigma_;
  double fd_step_;
  std::unique_ptr<ForwardMap> forward_;
  std::size_t forward_evaluations_ = 0;
  std::size_t one_sided_gradients_ = 0;
};

// Two sensors at (0.5, 0.3) and (0.5, 0.6) both reading the closed-form value
// at distance 0.2 from the source, which leaves two admissible sources.
InverseProblem make_two_mode_problem(double obs_sigma = 0.1);
// Intersections of the radius-0.2 circles around the two sensors.
std::vector<Point2> two_mode_analytic_modes();

// One sensor at (0.5, 0.3): every source on the radius-0.2 circle around it fits.
InverseProblem make_infinite_mode_problem(double obs_sigma = 0.1);
struct Circle {
  Point2 center;
  double radius = 0.0;
};
Circle infinite_mode_circle();

// Closed-form sensor reading at t_final for a source at distance r.
double closed_form_reading(const SourceParams& shape, double r, double t);

struct ModeDiagnostics {
  std::vector<Point2> samples;
  std::vector<Point2> mode_centers;  // discrete modes, or empty when `circle` is set
  std::optional<Circle> circle;
  double capture_radius = 0.05;
  double burn_in = 0.0;  // fraction of leading samples discarded, in [0, 1)
};

struct CoverageReport {
  std::vector<double> mode_fractions;     // per discrete mode
  std::optional<double> angular_coverage;  // circle case: fraction of 36 bins hit
  std::size_t samples_used = 0;
};

CoverageReport mode_coverage(const ModeDiagnostics& diag);

// RMS of (coarse - fine) posterior energy over `n_sources` uniformly drawn
// source locations.
double calibrate_coarse_sigma(const InverseProblem& problem, std::size_t n_sources, Rng rng);

}  // namespace mresgld
