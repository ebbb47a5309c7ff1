#include "mresgld/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mresgld/io.hpp"

namespace mresgld {

namespace {

int integral_ratio(double num, double den, const char* what) {
  const double ratio = num / den;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << what << " must be a positive integer, got " << ratio;
    throw std::invalid_argument(msg.str());
  }
  return static_cast<int>(rounded);
}

// Nodal samples of the initial profile u(., 0) and of f(., 0). The Gaussian
// factorises along the axes, so only 2 (n + 1) exponentials are needed.
void nodal_data(const TriMesh& mesh, const SourceParams& p, Eigen::VectorXd& u0,
                Eigen::VectorXd& f0) {
  const int n = mesh.cells();
  const double alpha = p.alpha();
  const double beta = p.beta();
  std::vector<double> ex(n + 1), ey(n + 1), dx2(n + 1), dy2(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double c = static_cast<double>(i) / n;
    dx2[i] = (c - p.x0.x) * (c - p.x0.x);
    dy2[i] = (c - p.x0.y) * (c - p.x0.y);
    ex[i] = std::exp(-dx2[i] / alpha);
    ey[i] = std::exp(-dy2[i] / alpha);
  }
  u0.resize(mesh.node_count());
  f0.resize(mesh.node_count());
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const int k = mesh.node(i, j);
      const double u = beta * ex[i] * ey[j];
      const double r2 = dx2[i] + dy2[j];
      u0[k] = u;
      f0[k] = u * (4.0 / alpha - 4.0 * r2 / (alpha * alpha) - 1.0);
    }
  }
}

Eigen::VectorXd gather(const Eigen::VectorXd& full, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[idx[k]];
  return out;
}

Eigen::VectorXd scatter(const Eigen::VectorXd& part, const std::vector<int>& idx, Eigen::Index n) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = part[static_cast<Eigen::Index>(k)];
  return out;
}

}  // namespace

double SourceParams::beta() const { return M / (2.0 * std::numbers::pi * h * h); }

void SourceParams::validate() const {
  if (!(h > 0.0)) throw std::invalid_argument("source radius h must be positive");
  if (!(M > 0.0)) throw std::invalid_argument("source strength M must be positive");
  if (!(x0.x >= 0.0 && x0.x <= 1.0 && x0.y >= 0.0 && x0.y <= 1.0))
    throw std::invalid_argument("source location must lie in [0,1]^2");
}

int ParabolicProblem::cells() const { return integral_ratio(1.0, dx, "1/dx"); }
int ParabolicProblem::time_steps() const { return integral_ratio(t_final, dt, "t_final/dt"); }

void ParabolicProblem::validate() const {
  source.validate();
  if (!(dx > 0.0) || !(dt > 0.0) || !(t_final > 0.0))
    throw std::invalid_argument("dx, dt and t_final must be positive");
  (void)cells();
  (void)time_steps();
}

double exact_solution(const SourceParams& p, Point2 x, double t) {
  const double dx = x.x - p.x0.x, dy = x.y - p.x0.y;
  return p.beta() * std::exp(-(dx * dx + dy * dy) / p.alpha()) * std::exp(-t);
}

double manufactured_source(const SourceParams& p, Point2 x, double t) {
  const double dx = x.x - p.x0.x, dy = x.y - p.x0.y;
  const double r2 = dx * dx + dy * dy;
  const double a = p.alpha();
  return exact_solution(p, x, t) * (4.0 / a - 4.0 * r2 / (a * a) - 1.0);
}

// ---------------------------------------------------------------------------

TriMesh::TriMesh(int cells) : cells_(cells) {
  if (cells < 1) throw std::invalid_argument("mesh needs at least one cell per side");
  triangles_.reserve(2 * static_cast<std::size_t>(cells) * cells);
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const int n00 = node(i, j), n10 = node(i + 1, j), n01 = node(i, j + 1), n11 = node(i + 1, j + 1);
      if (slash_diagonal(i)) {
        triangles_.push_back({n00, n10, n11});
        triangles_.push_back({n00, n11, n01});
      } else {
        triangles_.push_back({n00, n10, n01});
        triangles_.push_back({n10, n11, n01});
      }
    }
  }
}

Point2 TriMesh::coordinates(int k) const {
  const int i = k % (cells_ + 1), j = k / (cells_ + 1);
  return {static_cast<double>(i) / cells_, static_cast<double>(j) / cells_};
}

bool TriMesh::on_boundary(int k) const {
  const int i = k % (cells_ + 1), j = k / (cells_ + 1);
  return i == 0 || j == 0 || i == cells_ || j == cells_;
}

std::vector<std::pair<int, double>> TriMesh::interpolation_weights(Point2 p) const {
  if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
    std::ostringstream msg;
    msg << "point (" << p.x << ", " << p.y << ") lies outside the mesh";
    throw std::out_of_range(msg.str());
  }
  const double sx = p.x * cells_, sy = p.y * cells_;
  const int i = std::min(static_cast<int>(std::floor(sx)), cells_ - 1);
  const int j = std::min(static_cast<int>(std::floor(sy)), cells_ - 1);
  const double xi = sx - i, eta = sy - j;
  const int n00 = node(i, j), n10 = node(i + 1, j), n01 = node(i, j + 1), n11 = node(i + 1, j + 1);

  if (slash_diagonal(i)) {
    if (xi >= eta) return {{n00, 1.0 - xi}, {n10, xi - eta}, {n11, eta}};
    return {{n00, 1.0 - eta}, {n11, xi}, {n01, eta - xi}};
  }
  if (xi + eta <= 1.0) return {{n00, 1.0 - xi - eta}, {n10, xi}, {n01, eta}};
  return {{n11, xi + eta - 1.0}, {n01, 1.0 - xi}, {n10, 1.0 - eta}};
}

double FieldSolution::value_at(Point2 p) const {
  double v = 0.0;
  for (const auto& [k, w] : mesh->interpolation_weights(p)) v += w * values[k];
  return v;
}

std::pair<SensorSet, double> snap_to_mesh(const SensorSet& sensors, int cells) {
  SensorSet snapped = sensors;
  double worst = 0.0;
  for (auto& loc : snapped.locations) {
    const Point2 orig = loc;
    loc.x = std::clamp(std::round(loc.x * cells), 0.0, static_cast<double>(cells)) / cells;
    loc.y = std::clamp(std::round(loc.y * cells), 0.0, static_cast<double>(cells)) / cells;
    worst = std::max(worst, distance(orig, loc));
  }
  return {snapped, worst};
}

// ---------------------------------------------------------------------------

HeatSolver::HeatSolver(const ParabolicProblem& problem)
    : HeatSolver((problem.validate(), problem.cells()), problem.dt, problem.t_final) {}

HeatSolver::HeatSolver(int cells, double dt, double t_final, double cg_tolerance)
    : mesh_(std::make_shared<TriMesh>(cells)), dt_(dt), steps_(integral_ratio(t_final, dt, "t_final/dt")) {
  const TriMesh& mesh = *mesh_;
  const int n_nodes = mesh.node_count();

  std::vector<Eigen::Triplet<double>> mass_t, stiff_t;
  mass_t.reserve(mesh.triangles().size() * 9);
  stiff_t.reserve(mesh.triangles().size() * 9);
  for (const auto& tri : mesh.triangles()) {
    Point2 p[3];
    for (int a = 0; a < 3; ++a) p[a] = mesh.coordinates(tri[a]);
    const double det = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y);
    const double area = 0.5 * std::abs(det);
    double b[3], c[3];
    for (int a = 0; a < 3; ++a) {
      const Point2& pj = p[(a + 1) % 3];
      const Point2& pk = p[(a + 2) % 3];
      b[a] = (pj.y - pk.y) / det;
      c[a] = (pk.x - pj.x) / det;
    }
    for (int a = 0; a < 3; ++a) {
      for (int bb = 0; bb < 3; ++bb) {
        stiff_t.emplace_back(tri[a], tri[bb], area * (b[a] * b[bb] + c[a] * c[bb]));
        mass_t.emplace_back(tri[a], tri[bb], area / 12.0 * (a == bb ? 2.0 : 1.0));
      }
    }
  }
  mass_.resize(n_nodes, n_nodes);
  stiffness_.resize(n_nodes, n_nodes);
  mass_.setFromTriplets(mass_t.begin(), mass_t.end());
  stiffness_.setFromTriplets(stiff_t.begin(), stiff_t.end());
  system_full_ = mass_ + dt_ * stiffness_;

  std::vector<int> interior_index(n_nodes, -1);
  for (int k = 0; k < n_nodes; ++k) {
    if (mesh.on_boundary(k)) {
      boundary_.push_back(k);
    } else {
      interior_index[k] = static_cast<int>(interior_.size());
      interior_.push_back(k);
    }
  }
  std::vector<Eigen::Triplet<double>> sys_t;
  for (int col = 0; col < system_full_.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(system_full_, col); it; ++it) {
      const int r = interior_index[it.row()], c = interior_index[it.col()];
      if (r >= 0 && c >= 0) sys_t.emplace_back(r, c, it.value());
    }
  }
  const auto n_int = static_cast<Eigen::Index>(interior_.size());
  system_interior_.resize(n_int, n_int);
  system_interior_.setFromTriplets(sys_t.begin(), sys_t.end());

  cg_ = std::make_unique<CgSolver>();
  cg_->setTolerance(cg_tolerance);
  cg_->setMaxIterations(10 * static_cast<Eigen::Index>(n_int) + 100);
  cg_->compute(system_interior_);
  if (cg_->info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "CG setup failed for mesh with " << cells << " cells, dt=" << dt;
    throw std::runtime_error(msg.str());
  }
}

Eigen::VectorXd HeatSolver::solve_interior(const Eigen::VectorXd& rhs, const Eigen::VectorXd* guess) const {
  Eigen::VectorXd x;
  if (guess)
    x = cg_->solveWithGuess(rhs, *guess);
  else
    x = cg_->solve(rhs);
  if (cg_->info() != Eigen::Success || !x.allFinite()) {
    std::ostringstream msg;
    msg << "linear solve failed (mesh " << mesh_->cells() << " cells, dt=" << dt_
        << ", iterations=" << cg_->iterations() << ", residual=" << cg_->error() << ")";
    throw std::runtime_error(msg.str());
  }
  return x;
}

FieldSolution HeatSolver::solve(const SourceParams& source) const {
  source.validate();
  const Eigen::Index n_nodes = mesh_->node_count();
  Eigen::VectorXd u0, f0;
  nodal_data(*mesh_, source, u0, f0);

  Eigen::VectorXd u = u0;
  Eigen::VectorXd u_int = gather(u, interior_);
  Eigen::VectorXd boundary_values = Eigen::VectorXd::Zero(n_nodes);
  for (int n = 1; n <= steps_; ++n) {
    const double decay = std::exp(-n * dt_);
    for (int k : boundary_) boundary_values[k] = u0[k] * decay;
    const Eigen::VectorXd rhs_full = mass_ * (u + (dt_ * decay) * f0) - system_full_ * boundary_values;
    u_int = solve_interior(gather(rhs_full, interior_), &u_int);
    u = scatter(u_int, interior_, n_nodes) + boundary_values;
  }
  return {mesh_, std::move(u), dt_ * steps_};
}

FieldSolution solve_forward(const ParabolicProblem& problem) {
  problem.validate();
  return HeatSolver(problem).solve(problem.source);
}

Eigen::VectorXd observe(const FieldSolution& solution, const SensorSet& sensors) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(sensors.locations.size()));
  for (std::size_t s = 0; s < sensors.locations.size(); ++s)
    out[static_cast<Eigen::Index>(s)] = solution.value_at(sensors.locations[s]);
  return out;
}

// ---------------------------------------------------------------------------

SensorResponse::SensorResponse(const HeatSolver& solver, Point2 sensor) : mesh_(solver.mesh()) {
  const auto& interior = solver.interior_nodes();
  const auto& boundary = solver.boundary_nodes();
  const Eigen::Index n_nodes = mesh_->node_count();
  const int steps = solver.time_steps();
  const double dt = solver.dt();

  Eigen::VectorXd c = Eigen::VectorXd::Zero(n_nodes);
  for (const auto& [k, w] : mesh_->interpolation_weights(sensor)) c[k] += w;

  // mu_N = A^-1 c_I, mu_n = A^-1 M_II mu_{n+1}; the reading is
  // sum_n mu_n . d_n + (M_II mu_1) . u0_I with d_n the step-n data vector.
  Eigen::VectorXd mu = solver.solve_interior(gather(c, interior));
  Eigen::VectorXd sum_prev = Eigen::VectorXd::Zero(mu.size());  // sum mu_n exp(-t_{n-1})
  Eigen::VectorXd sum_cur = Eigen::VectorXd::Zero(mu.size());   // sum mu_n exp(-t_n)
  for (int n = steps; n >= 1; --n) {
    sum_prev += std::exp(-(n - 1) * dt) * mu;
    sum_cur += std::exp(-n * dt) * mu;
    if (n > 1) {
      const Eigen::VectorXd m_mu = gather(solver.mass() * scatter(mu, interior, n_nodes), interior);
      mu = solver.solve_interior(m_mu, &mu);
    }
  }
  const Eigen::VectorXd prev_full = scatter(sum_prev, interior, n_nodes);
  const Eigen::VectorXd cur_full = scatter(sum_cur, interior, n_nodes);
  const Eigen::VectorXd m_mu1 = solver.mass() * scatter(mu, interior, n_nodes);
  const Eigen::VectorXd m_prev = solver.mass() * prev_full;
  const Eigen::VectorXd a_cur = solver.system() * cur_full;

  weight_initial_ = Eigen::VectorXd::Zero(n_nodes);
  for (int k : interior) weight_initial_[k] = m_mu1[k];
  const double final_decay = std::exp(-steps * dt);
  for (int k : boundary) weight_initial_[k] = m_prev[k] - a_cur[k] + c[k] * final_decay;
  weight_source_ = dt * (solver.mass() * cur_full);
}

double SensorResponse::observe(const SourceParams& source) const {
  Eigen::VectorXd u0, f0;
  nodal_data(*mesh_, source, u0, f0);
  return weight_initial_.dot(u0) + weight_source_.dot(f0);
}

void write_field_csv(std::ostream& out, const FieldSolution& solution) {
  out << "x,y,u\n";
  for (int k = 0; k < solution.mesh->node_count(); ++k) {
    const Point2 p = solution.mesh->coordinates(k);
    out << format_real(p.x) << ',' << format_real(p.y) << ',' << format_real(solution.values[k]) << '\n';
  }
}

double nodal_relative_error(const FieldSolution& solution, const SourceParams& source) {
  double num = 0.0, den = 0.0;
  for (int k = 0; k < solution.mesh->node_count(); ++k) {
    const double exact = exact_solution(source, solution.mesh->coordinates(k), solution.time);
    const double diff = solution.values[k] - exact;
    num += diff * diff;
    den += exact * exact;
  }
  return std::sqrt(num / den);
}

}  // namespace mresgld
