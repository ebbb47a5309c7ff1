#include "mresgld/inverse.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mresgld {

namespace {

constexpr int kAngularBins = 36;

class ResponseForwardMap final : public ForwardMap {
 public:
  ResponseForwardMap(const ParabolicProblem& prob, const SensorSet& sensors, SourceParams shape)
      : solver_(prob), shape_(shape) {
    for (const auto& s : sensors.locations) responses_.emplace_back(solver_, s);
  }

  Eigen::VectorXd observe(Point2 k) override {
    SourceParams p = shape_;
    p.x0 = k;
    Eigen::VectorXd out(static_cast<Eigen::Index>(responses_.size()));
    for (std::size_t s = 0; s < responses_.size(); ++s)
      out[static_cast<Eigen::Index>(s)] = responses_[s].observe(p);
    return out;
  }

 private:
  HeatSolver solver_;
  SourceParams shape_;
  std::vector<SensorResponse> responses_;
};

class SteppingForwardMap final : public ForwardMap {
 public:
  SteppingForwardMap(const ParabolicProblem& prob, const SensorSet& sensors, SourceParams shape)
      : solver_(prob), sensors_(sensors), shape_(shape) {}

  Eigen::VectorXd observe(Point2 k) override {
    SourceParams p = shape_;
    p.x0 = k;
    return mresgld::observe(solver_.solve(p), sensors_);
  }

 private:
  HeatSolver solver_;
  SensorSet sensors_;
  SourceParams shape_;
};

Point2 to_point(const ParameterVector& k) {
  if (k.size() != 2) throw std::invalid_argument("source parameter vector must have 2 entries");
  return {k[0], k[1]};
}

}  // namespace

void InverseProblem::validate() const {
  if (sensors.locations.empty()) throw std::invalid_argument("inverse problem needs sensors");
  if (static_cast<std::size_t>(observations.size()) != sensors.locations.size())
    throw std::invalid_argument("observation count must equal sensor count");
  if (!(obs_sigma > 0.0)) throw std::invalid_argument("obs_sigma must be positive");
  fine.validate();
  coarse.validate();
}

std::unique_ptr<ForwardMap> make_forward_map(const InverseProblem& problem, Fidelity fidelity,
                                             ForwardMode mode) {
  const ParabolicProblem& prob = fidelity == Fidelity::fine ? problem.fine : problem.coarse;
  if (mode == ForwardMode::response)
    return std::make_unique<ResponseForwardMap>(prob, problem.sensors, problem.source_shape);
  return std::make_unique<SteppingForwardMap>(prob, problem.sensors, problem.source_shape);
}

PosteriorEnergy::PosteriorEnergy(const InverseProblem& problem, Fidelity fidelity,
                                 double assigned_sigma, double fd_step, ForwardMode mode)
    : problem_(&problem),
      fidelity_(fidelity),
      assigned_sigma_(assigned_sigma),
      fd_step_(fd_step),
      forward_(make_forward_map(problem, fidelity, mode)) {
  problem.validate();
  if (!(assigned_sigma >= 0.0)) throw std::invalid_argument("assigned sigma must be non-negative");
  if (!(fd_step > 0.0 && fd_step < 0.25)) throw std::invalid_argument("fd_step must be in (0, 0.25)");
}

bool PosteriorEnergy::in_domain(const ParameterVector& k) const {
  return k.size() == 2 && k[0] >= 0.0 && k[0] <= 1.0 && k[1] >= 0.0 && k[1] <= 1.0;
}

Eigen::VectorXd PosteriorEnergy::forward(Point2 k) {
  ++forward_evaluations_;
  try {
    return forward_->observe(k);
  } catch (const std::exception& e) {
    std::ostringstream msg;
    msg << "forward solve failed at k=(" << k.x << ", " << k.y << "): " << e.what();
    throw std::runtime_error(msg.str());
  }
}

double PosteriorEnergy::misfit(Point2 k) {
  const double s = problem_->obs_sigma;
  return (problem_->observations - forward(k)).squaredNorm() / (s * s);
}

double PosteriorEnergy::energy(const ParameterVector& k) {
  if (!in_domain(k)) return std::numeric_limits<double>::infinity();
  return misfit(to_point(k));
}

ParameterVector PosteriorEnergy::gradient(const ParameterVector& k) {
  const Point2 p = to_point(k);
  ParameterVector g(2);
  std::optional<double> center;
  bool one_sided = false;
  for (int d = 0; d < 2; ++d) {
    const double coord = d == 0 ? p.x : p.y;
    Point2 plus = p, minus = p;
    (d == 0 ? plus.x : plus.y) += fd_step_;
    (d == 0 ? minus.x : minus.y) -= fd_step_;
    const bool can_plus = coord + fd_step_ <= 1.0;
    const bool can_minus = coord - fd_step_ >= 0.0;
    if (can_plus && can_minus) {
      g[d] = (misfit(plus) - misfit(minus)) / (2.0 * fd_step_);
      continue;
    }
    one_sided = true;
    if (!center) center = misfit(p);
    g[d] = can_plus ? (misfit(plus) - *center) / fd_step_ : (*center - misfit(minus)) / fd_step_;
  }
  if (one_sided) ++one_sided_gradients_;
  return g;
}

// ---------------------------------------------------------------------------

double closed_form_reading(const SourceParams& shape, double r, double t) {
  return shape.beta() * std::exp(-r * r / shape.alpha()) * std::exp(-t);
}

namespace {

InverseProblem base_problem(std::vector<Point2> sensors, double obs_sigma) {
  InverseProblem prob;
  prob.obs_sigma = obs_sigma;
  prob.source_shape = SourceParams{};
  prob.fine.dx = 1.0 / 50.0;
  prob.coarse.dx = 1.0 / 25.0;
  prob.fine.source = prob.coarse.source = prob.source_shape;

  SensorSet raw;
  raw.locations = std::move(sensors);
  raw.observation_time = prob.fine.t_final;
  auto [snapped, dist] = snap_to_mesh(raw, prob.fine.cells());
  prob.sensors = snapped;
  prob.snap_distance = dist;

  const double y = closed_form_reading(prob.source_shape, 0.2, prob.fine.t_final);
  prob.observations = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(prob.sensors.locations.size()), y);
  prob.validate();
  return prob;
}

}  // namespace

InverseProblem make_two_mode_problem(double obs_sigma) {
  return base_problem({{0.5, 0.3}, {0.5, 0.6}}, obs_sigma);
}

std::vector<Point2> two_mode_analytic_modes() {
  const double half_gap = 0.15;  // sensors are 0.3 apart
  const double offset = std::sqrt(0.2 * 0.2 - half_gap * half_gap);
  return {{0.5 - offset, 0.45}, {0.5 + offset, 0.45}};
}

InverseProblem make_infinite_mode_problem(double obs_sigma) {
  return base_problem({{0.5, 0.3}}, obs_sigma);
}

Circle infinite_mode_circle() { return {{0.5, 0.3}, 0.2}; }

CoverageReport mode_coverage(const ModeDiagnostics& diag) {
  if (!(diag.burn_in >= 0.0 && diag.burn_in < 1.0))
    throw std::invalid_argument("burn-in fraction must be in [0, 1)");
  if (diag.samples.empty()) throw std::invalid_argument("mode coverage needs samples");
  const auto skip = static_cast<std::size_t>(std::floor(diag.burn_in * diag.samples.size()));
  const std::size_t used = diag.samples.size() - skip;
  if (used < 100) throw std::invalid_argument("mode coverage needs at least 100 post-burn-in samples");

  CoverageReport report;
  report.samples_used = used;
  if (diag.circle) {
    std::vector<bool> hit(kAngularBins, false);
    for (std::size_t i = skip; i < diag.samples.size(); ++i) {
      const Point2 s = diag.samples[i];
      const double r = distance(s, diag.circle->center);
      if (std::abs(r - diag.circle->radius) > diag.capture_radius) continue;
      double angle = std::atan2(s.y - diag.circle->center.y, s.x - diag.circle->center.x);
      if (angle < 0) angle += 2.0 * std::numbers::pi;
      const int bin = std::min(kAngularBins - 1, static_cast<int>(angle / (2.0 * std::numbers::pi) * kAngularBins));
      hit[bin] = true;
    }
    int count = 0;
    for (bool h : hit) count += h ? 1 : 0;
    report.angular_coverage = static_cast<double>(count) / kAngularBins;
    return report;
  }
  for (const Point2& mode : diag.mode_centers) {
    std::size_t n = 0;
    for (std::size_t i = skip; i < diag.samples.size(); ++i)
      if (distance(diag.samples[i], mode) <= diag.capture_radius) ++n;
    report.mode_fractions.push_back(static_cast<double>(n) / used);
  }
  return report;
}

double calibrate_coarse_sigma(const InverseProblem& problem, std::size_t n_sources, Rng rng) {
  if (n_sources == 0) throw std::invalid_argument("calibration needs at least one source");
  PosteriorEnergy fine(problem, Fidelity::fine, 0.0);
  PosteriorEnergy coarse(problem, Fidelity::coarse, 0.0);
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_sources; ++i) {
    ParameterVector k(2);
    k << rng.uniform(), rng.uniform();
    const double gap = coarse.energy(k) - fine.energy(k);
    sum_sq += gap * gap;
  }
  return std::sqrt(sum_sq / static_cast<double>(n_sources));
}

}  // namespace mresgld
