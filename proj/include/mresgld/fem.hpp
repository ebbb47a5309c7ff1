#pragma once

#include <Eigen/Core>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <array>
#include <cmath>
#include <iosfwd>
#include <memory>
#include <utility>
#include <vector>

namespace mresgld {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// Gaussian pollution source of radius h and strength M centred at x0.
struct SourceParams {
  Point2 x0{0.5, 0.5};
  double h = 0.1;
  double M = 1.0;

  double alpha() const { return 2.0 * h * h; }
  double beta() const;
  void validate() const;
};

struct ParabolicProblem {
  SourceParams source;
  double dx = 1.0 / 50.0;
  double dt = 0.0005;
  double t_final = 0.03;

  int cells() const;       // 1 / dx, validated to be integral
  int time_steps() const;  // t_final / dt, validated to be integral
  void validate() const;
};

struct SensorSet {
  std::vector<Point2> locations;
  double observation_time = 0.03;
};

// u(x, t) = beta * exp(-|x - x0|^2 / alpha) * exp(-t)
double exact_solution(const SourceParams& p, Point2 x, double t);

// f = u_t - Laplacian(u) for the exact solution above:
// f = u * (4/alpha - 4 r^2/alpha^2 - 1), r = |x - x0|.
double manufactured_source(const SourceParams& p, Point2 x, double t);

// Uniform grid on [0,1]^2 with `cells` squares per side, each split into two
// right triangles. The diagonal direction is mirrored about x = 0.5 so that a
// mesh with an even cell count is symmetric under x -> 1 - x.
class TriMesh {
 public:
  explicit TriMesh(int cells);

  int cells() const { return cells_; }
  int node_count() const { return (cells_ + 1) * (cells_ + 1); }
  double spacing() const { return 1.0 / cells_; }
  int node(int i, int j) const { return j * (cells_ + 1) + i; }
  Point2 coordinates(int node) const;
  bool on_boundary(int node) const;
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }

  // Nodal weights of the P1 interpolant at p (weights sum to one).
  // Throws std::out_of_range if p is outside the unit square.
  std::vector<std::pair<int, double>> interpolation_weights(Point2 p) const;

 private:
  bool slash_diagonal(int i) const { return 2 * i + 1 < cells_; }

  int cells_;
  std::vector<std::array<int, 3>> triangles_;
};

struct FieldSolution {
  std::shared_ptr<const TriMesh> mesh;
  Eigen::VectorXd values;
  double time = 0.0;

  double value_at(Point2 p) const;
};

// Moves each sensor onto the nearest node of a mesh with `cells` cells per
// side; also returns the largest distance moved.
std::pair<SensorSet, double> snap_to_mesh(const SensorSet& sensors, int cells);

// P1 finite elements in space with consistent mass, backward Euler in time,
// Dirichlet data and initial condition from exact_solution and the load from
// manufactured_source. Mass/stiffness assembly and the CG preconditioner are
// built once; each solve only assembles the load. Not safe for concurrent
// solves on one instance.
class HeatSolver {
 public:
  HeatSolver(int cells, double dt, double t_final, double cg_tolerance = 1e-10);
  explicit HeatSolver(const ParabolicProblem& problem);

  FieldSolution solve(const SourceParams& source) const;

  const std::shared_ptr<const TriMesh>& mesh() const { return mesh_; }
  int time_steps() const { return steps_; }
  double dt() const { return dt_; }
  double t_final() const { return dt_ * steps_; }

  // Linear-algebra access for SensorResponse.
  const Eigen::SparseMatrix<double>& mass() const { return mass_; }
  const Eigen::SparseMatrix<double>& system() const { return system_full_; }
  const std::vector<int>& interior_nodes() const { return interior_; }
  const std::vector<int>& boundary_nodes() const { return boundary_; }
  Eigen::VectorXd solve_interior(const Eigen::VectorXd& rhs,
                                 const Eigen::VectorXd* guess = nullptr) const;

 private:
  using CgSolver = Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                            Eigen::DiagonalPreconditioner<double>>;

  std::shared_ptr<const TriMesh> mesh_;
  double dt_;
  int steps_;
  Eigen::SparseMatrix<double> mass_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::SparseMatrix<double> system_full_;  // mass + dt * stiffness
  Eigen::SparseMatrix<double> system_interior_;
  std::vector<int> interior_;
  std::vector<int> boundary_;
  std::unique_ptr<CgSolver> cg_;
};

FieldSolution solve_forward(const ParabolicProblem& problem);

// Field values at the sensor locations (P1 interpolation; exact nodal value
// when a sensor sits on a node).
Eigen::VectorXd observe(const FieldSolution& solution, const SensorSet& sensors);

// Discrete sensor reading at t_final as a linear functional of the nodal
// initial data u0 and the nodal source profile f0 = f(., 0). Valid because the
// manufactured data scale with exp(-t). Built once per sensor with one adjoint
// CG sweep, it reproduces observe(solver.solve(p)) to solver tolerance at the
// cost of one nodal evaluation pass.
class SensorResponse {
 public:
  SensorResponse(const HeatSolver& solver, Point2 sensor);

  double observe(const SourceParams& source) const;

 private:
  std::shared_ptr<const TriMesh> mesh_;
  Eigen::VectorXd weight_initial_;  // multiplies nodal u(., 0)
  Eigen::VectorXd weight_source_;   // multiplies nodal f(., 0)
};

// CSV of (x, y, u) nodal triples.
void write_field_csv(std::ostream& out, const FieldSolution& solution);

// Relative discrete L2 error of the nodal field against exact_solution.
double nodal_relative_error(const FieldSolution& solution, const SourceParams& source);

}  // namespace mresgld
