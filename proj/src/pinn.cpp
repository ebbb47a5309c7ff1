#include "mresgld/pinn.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace mresgld {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMatrix>;
using Weights = Eigen::Map<RowMatrix>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Activations of one layer together with their first and second derivatives
// along x and along t, one column per point.
struct Jet {
  Eigen::MatrixXd v, x, xx, t, tt;
};

struct Channels {
  bool space = false;
  bool time = false;
};

// Everything the reverse sweep needs from the forward sweep.
struct JetTape {
  Channels ch;
  std::vector<Jet> act;  // act[0] is the (scaled) input, act[l + 1] the output of layer l
  std::vector<Jet> pre;  // pre-activation derivative channels of each hidden layer
};

JetTape jet_forward(const DenseNetwork& net, const ParameterVector& p, const Eigen::Matrix2Xd& pts,
                    Channels ch) {
  const Eigen::Index n = pts.cols();
  JetTape tape;
  tape.ch = ch;
  const auto& scale = net.input_scale();
  Jet in;
  in.v.resize(2, n);
  in.v.row(0) = pts.row(0) * scale[0];
  in.v.row(1) = pts.row(1) * scale[1];
  if (ch.space) {
    in.x = Eigen::MatrixXd::Zero(2, n);
    in.x.row(0).setConstant(scale[0]);
    in.xx = Eigen::MatrixXd::Zero(2, n);
  }
  if (ch.time) {
    in.t = Eigen::MatrixXd::Zero(2, n);
    in.t.row(1).setConstant(scale[1]);
    in.tt = Eigen::MatrixXd::Zero(2, n);
  }
  tape.act.push_back(std::move(in));

  const std::size_t layers = net.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const int fan_in = net.widths()[l], fan_out = net.widths()[l + 1];
    const ConstWeights w(p.data() + net.layer_offset(l), fan_out, fan_in);
    const Eigen::Map<const Eigen::VectorXd> b(p.data() + net.layer_offset(l) + fan_out * fan_in, fan_out);
    const Jet& a = tape.act.back();
    Jet z;
    z.v = (w * a.v).colwise() + b;
    if (ch.space) {
      z.x = w * a.x;
      z.xx = w * a.xx;
    }
    if (ch.time) {
      z.t = w * a.t;
      z.tt = w * a.tt;
    }
    if (l + 1 == layers) {
      tape.act.push_back(std::move(z));
      break;
    }
    Jet h;
    h.v = z.v.array().tanh().matrix();
    const Eigen::ArrayXXd s1 = 1.0 - h.v.array().square();
    const Eigen::ArrayXXd s2 = -2.0 * h.v.array() * s1;
    if (ch.space) {
      h.x = (s1 * z.x.array()).matrix();
      h.xx = (s2 * z.x.array().square() + s1 * z.xx.array()).matrix();
    }
    if (ch.time) {
      h.t = (s1 * z.t.array()).matrix();
      h.tt = (s2 * z.t.array().square() + s1 * z.tt.array()).matrix();
    }
    z.v.resize(0, 0);
    tape.pre.push_back(std::move(z));
    tape.act.push_back(std::move(h));
  }
  return tape;
}

// Cotangents of the network output channels (1 x N rows).
struct OutputCotangent {
  Eigen::RowVectorXd v, x, xx, t, tt;
};

void jet_backward(const DenseNetwork& net, const ParameterVector& p, const JetTape& tape,
                  const OutputCotangent& g_out, ParameterVector& grad) {
  const Channels ch = tape.ch;
  const std::size_t layers = net.layer_count();
  const Eigen::Index n = tape.act.front().v.cols();
  auto row_or_zero = [n](const Eigen::RowVectorXd& r) {
    return r.size() == n ? Eigen::MatrixXd(r) : Eigen::MatrixXd(Eigen::MatrixXd::Zero(1, n));
  };
  Jet gz;  // cotangent of the current layer's pre-activation channels
  gz.v = row_or_zero(g_out.v);
  if (ch.space) {
    gz.x = row_or_zero(g_out.x);
    gz.xx = row_or_zero(g_out.xx);
  }
  if (ch.time) {
    gz.t = row_or_zero(g_out.t);
    gz.tt = row_or_zero(g_out.tt);
  }

  for (std::size_t l = layers; l-- > 0;) {
    const int fan_in = net.widths()[l], fan_out = net.widths()[l + 1];
    const std::size_t off = net.layer_offset(l);
    const ConstWeights w(p.data() + off, fan_out, fan_in);
    Weights gw(grad.data() + off, fan_out, fan_in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + off + fan_out * fan_in, fan_out);
    const Jet& a = tape.act[l];

    gw.noalias() += gz.v * a.v.transpose();
    if (ch.space) {
      gw.noalias() += gz.x * a.x.transpose();
      gw.noalias() += gz.xx * a.xx.transpose();
    }
    if (ch.time) {
      gw.noalias() += gz.t * a.t.transpose();
      gw.noalias() += gz.tt * a.tt.transpose();
    }
    gb += gz.v.rowwise().sum();
    if (l == 0) break;

    // Cotangent of the previous layer's activations.
    Jet ga;
    ga.v = w.transpose() * gz.v;
    if (ch.space) {
      ga.x = w.transpose() * gz.x;
      ga.xx = w.transpose() * gz.xx;
    }
    if (ch.time) {
      ga.t = w.transpose() * gz.t;
      ga.tt = w.transpose() * gz.tt;
    }

    // Back through h = tanh(z) and its derivative channels.
    const Jet& z = tape.pre[l - 1];
    const Eigen::ArrayXXd h = a.v.array();
    const Eigen::ArrayXXd s1 = 1.0 - h.square();
    const Eigen::ArrayXXd s2 = -2.0 * h * s1;
    Eigen::ArrayXXd g_s1 = Eigen::ArrayXXd::Zero(h.rows(), h.cols());
    Eigen::ArrayXXd g_s2 = Eigen::ArrayXXd::Zero(h.rows(), h.cols());
    Jet next;
    if (ch.space) {
      const Eigen::ArrayXXd zx = z.x.array();
      next.x = (s1 * ga.x.array() + 2.0 * s2 * zx * ga.xx.array()).matrix();
      next.xx = (s1 * ga.xx.array()).matrix();
      g_s1 += ga.x.array() * zx + ga.xx.array() * z.xx.array();
      g_s2 += ga.xx.array() * zx.square();
    }
    if (ch.time) {
      const Eigen::ArrayXXd zt = z.t.array();
      next.t = (s1 * ga.t.array() + 2.0 * s2 * zt * ga.tt.array()).matrix();
      next.tt = (s1 * ga.tt.array()).matrix();
      g_s1 += ga.t.array() * zt + ga.tt.array() * z.tt.array();
      g_s2 += ga.tt.array() * zt.square();
    }
    const Eigen::ArrayXXd g_h = ga.v.array() - 2.0 * h * g_s1 + (6.0 * h.square() - 2.0) * g_s2;
    next.v = (g_h * s1).matrix();
    gz = std::move(next);
  }
}

void check_block(const DataBlock& b, const char* name) {
  if (b.points.cols() != b.values.size()) {
    std::ostringstream msg;
    msg << name << " block has " << b.points.cols() << " points but " << b.values.size() << " values";
    throw std::invalid_argument(msg.str());
  }
}

void check_finite(const Eigen::RowVectorXd& r, const Eigen::Matrix2Xd& pts, const char* what) {
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!std::isfinite(r[i])) {
      std::ostringstream msg;
      msg << "non-finite " << what << " at (" << pts(0, i) << ", " << pts(1, i) << ")";
      throw PinnError(msg.str(), pts.col(i));
    }
  }
}

double current_alpha(const DenseNetwork& net, const ParameterVector& p, const ResidualDefinition& pde) {
  return net.has_inverse_slot() ? net.alpha(p) : pde.alpha_true;
}

// Adds a value-data term sum (u - y)^2 / (2 sigma^2 N); returns its energy and,
// when grad is given, accumulates its parameter gradient.
double value_term(const DenseNetwork& net, const ParameterVector& p, const DataBlock& block,
                  double sigma, const char* what, double* mse, ParameterVector* grad) {
  if (block.empty()) return 0.0;
  const double n = static_cast<double>(block.size());
  const JetTape tape = jet_forward(net, p, block.points, {});
  const Eigen::RowVectorXd r = tape.act.back().v.row(0) - block.values.transpose();
  check_finite(r, block.points, what);
  if (mse) *mse += r.squaredNorm();
  if (grad) {
    OutputCotangent g;
    g.v = r / (sigma * sigma * n);
    jet_backward(net, p, tape, g, *grad);
  }
  return r.squaredNorm() / (2.0 * sigma * sigma * n);
}

PinnEnergyTerms evaluate_terms(const DenseNetwork& net, const ParameterVector& p,
                               const CollocationSet& c, const PinnLossSpec& spec,
                               const ResidualDefinition& pde, ParameterVector* grad) {
  net.check_parameters(p);
  PinnEnergyTerms e;
  if (grad) *grad = ParameterVector::Zero(p.size());
  const double alpha = current_alpha(net, p, pde);

  if (!c.interior.empty()) {
    const double n = static_cast<double>(c.interior.size());
    const bool qgd = pde.family == PdeFamily::qgd;
    const JetTape tape = jet_forward(net, p, c.interior.points, {true, qgd});
    const Jet& out = tape.act.back();
    const Eigen::RowVectorXd f = c.interior.values.transpose();
    Eigen::RowVectorXd r;
    if (qgd)
      r = out.t.row(0) + alpha * out.tt.row(0) - pde.kappa * out.xx.row(0) - f;
    else
      r = -out.xx.row(0) + alpha * out.v.row(0).array().square().matrix() - f;
    check_finite(r, c.interior.points, "PDE residual");
    const double s2 = spec.sigma_f * spec.sigma_f;
    e.residual = r.squaredNorm() / (2.0 * s2 * n);
    e.mse_f = r.squaredNorm() / n;
    if (grad) {
      const Eigen::RowVectorXd dr = r / (s2 * n);
      OutputCotangent g;
      if (qgd) {
        g.xx = -pde.kappa * dr;
        g.t = dr;
        g.tt = alpha * dr;
      } else {
        g.xx = -dr;
        g.v = (2.0 * alpha * out.v.row(0).array() * dr.array()).matrix();
      }
      jet_backward(net, p, tape, g, *grad);
      if (net.has_inverse_slot()) {
        const Eigen::RowVectorXd dr_dalpha =
            qgd ? Eigen::RowVectorXd(out.tt.row(0)) : Eigen::RowVectorXd(out.v.row(0).array().square().matrix());
        (*grad)[p.size() - 1] += dr.dot(dr_dalpha);
      }
    }
  }

  double sq_u = 0.0, sq_b = 0.0;
  std::size_t n_u = 0;
  e.initial = value_term(net, p, c.initial, spec.sigma_u, "initial misfit", &sq_u, grad);
  n_u += c.initial.size();
  e.observation = value_term(net, p, c.observation, spec.sigma_u, "observation misfit", &sq_u, grad);
  n_u += c.observation.size();
  e.boundary = value_term(net, p, c.boundary, spec.sigma_b, "boundary misfit", &sq_b, grad);

  if (!c.initial_velocity.empty()) {
    const double n = static_cast<double>(c.initial_velocity.size());
    const JetTape tape = jet_forward(net, p, c.initial_velocity.points, {false, true});
    const Eigen::RowVectorXd r = tape.act.back().t.row(0) - c.initial_velocity.values.transpose();
    check_finite(r, c.initial_velocity.points, "initial velocity misfit");
    const double s2 = spec.sigma_u * spec.sigma_u;
    e.initial_velocity = r.squaredNorm() / (2.0 * s2 * n);
    sq_u += r.squaredNorm();
    n_u += c.initial_velocity.size();
    if (grad) {
      OutputCotangent g;
      g.t = r / (s2 * n);
      jet_backward(net, p, tape, g, *grad);
    }
  }
  e.mse_u = n_u ? sq_u / static_cast<double>(n_u) : 0.0;
  e.mse_b = c.boundary.empty() ? 0.0 : sq_b / static_cast<double>(c.boundary.size());

  const double ps2 = spec.prior_std * spec.prior_std;
  e.prior = p.squaredNorm() / (2.0 * ps2);
  if (grad) *grad += p / ps2;
  return e;
}

Eigen::Matrix2Xd line_points(double x0, double x1, int n, double t, bool include_ends) {
  Eigen::Matrix2Xd pts(2, n);
  for (int i = 0; i < n; ++i) {
    const double s = include_ends ? static_cast<double>(i) / (n - 1) : static_cast<double>(i + 1) / (n + 1);
    pts(0, i) = x0 + (x1 - x0) * s;
    pts(1, i) = t;
  }
  return pts;
}

DataBlock block_from(const Eigen::Matrix2Xd& pts, const std::function<double(double, double)>& fn) {
  DataBlock b;
  b.points = pts;
  b.values.resize(pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) b.values[i] = fn(pts(0, i), pts(1, i));
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------

DenseNetwork::DenseNetwork(std::vector<int> widths, bool inverse_slot, std::vector<double> input_scale)
    : widths_(std::move(widths)), inverse_slot_(inverse_slot), input_scale_(std::move(input_scale)) {
  if (widths_.size() < 2) throw std::invalid_argument("network needs at least an input and an output layer");
  for (int w : widths_)
    if (w < 1) throw std::invalid_argument("layer widths must be positive");
  if (widths_.back() != 1) throw std::invalid_argument("network output must be scalar");
  if (input_scale_.empty()) input_scale_.assign(static_cast<std::size_t>(widths_.front()), 1.0);
  if (static_cast<int>(input_scale_.size()) != widths_.front())
    throw std::invalid_argument("input_scale length must equal the input width");
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(widths_[l] + 1) * static_cast<std::size_t>(widths_[l + 1]);
  }
  weight_count_ = off;
}

ParameterVector DenseNetwork::initialize(Rng& rng, double alpha_init) const {
  ParameterVector p = ParameterVector::Zero(static_cast<Eigen::Index>(parameter_count()));
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const int in = widths_[l], out = widths_[l + 1];
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    for (int k = 0; k < in * out; ++k) p[static_cast<Eigen::Index>(offsets_[l]) + k] = sd * rng.normal();
  }
  if (inverse_slot_) p[p.size() - 1] = alpha_init;
  return p;
}

double DenseNetwork::alpha(const ParameterVector& params) const {
  if (!inverse_slot_) throw std::logic_error("network has no inverse slot");
  check_parameters(params);
  return params[params.size() - 1];
}

void DenseNetwork::check_parameters(const ParameterVector& params) const {
  if (static_cast<std::size_t>(params.size()) != parameter_count()) {
    std::ostringstream msg;
    msg << "parameter vector has " << params.size() << " entries, network expects " << parameter_count();
    throw std::invalid_argument(msg.str());
  }
}

double DenseNetwork::forward(const ParameterVector& params, const Eigen::VectorXd& input) const {
  if (input.size() != input_dim()) {
    std::ostringstream msg;
    msg << "input has dimension " << input.size() << ", network expects " << input_dim();
    throw std::invalid_argument(msg.str());
  }
  check_parameters(params);
  Eigen::VectorXd a = input.cwiseProduct(Eigen::Map<const Eigen::VectorXd>(input_scale_.data(), input_dim()));
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const int in = widths_[l], out = widths_[l + 1];
    const ConstWeights w(params.data() + offsets_[l], out, in);
    const Eigen::Map<const Eigen::VectorXd> b(params.data() + offsets_[l] + out * in, out);
    Eigen::VectorXd z = w * a + b;
    a = l + 1 < layer_count() ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  return a[0];
}

InputDerivatives input_derivatives(const DenseNetwork& net, const ParameterVector& params, double x,
                                   double t, DerivativeRequest req) {
  return input_derivatives([&](const Dual2& xs, const Dual2& ts) { return net.forward2(params, xs, ts); },
                           x, t, req);
}

// ---------------------------------------------------------------------------

double ResidualDefinition::exact(double x, double t) const { return exact_generic(x, t); }

double ResidualDefinition::exact_time_derivative(double x, double t) const {
  return family == PdeFamily::qgd ? -exact(x, t) : 0.0;
}

double ResidualDefinition::source(double x, double t) const {
  const double u = exact(x, t);
  if (family == PdeFamily::qgd) return (-1.0 + alpha_true + kappa * kTwoPi * kTwoPi) * u;
  return -u * (16.0 * x * x - 4.0) + alpha_true * u * u;
}

double ResidualDefinition::residual(const InputDerivatives& d, double alpha, double f) const {
  if (family == PdeFamily::qgd) return d.u_t + alpha * d.u_tt - kappa * d.u_xx - f;
  return -d.u_xx + alpha * d.u * d.u - f;
}

void CollocationSet::validate() const {
  check_block(interior, "interior");
  check_block(boundary, "boundary");
  check_block(initial, "initial");
  check_block(initial_velocity, "initial velocity");
  check_block(observation, "observation");
  if (interior.empty()) throw std::invalid_argument("collocation set needs interior points");
}

void PinnLossSpec::validate() const {
  if (!(w1 > 0 && w2 > 0 && w3 > 0)) throw std::invalid_argument("loss weights must be positive");
  if (std::abs(w1 + w2 + w3 - 1.0) > 1e-12) throw std::invalid_argument("loss weights must sum to 1");
  if (!(sigma_u > 0 && sigma_f > 0 && sigma_b > 0 && prior_std > 0))
    throw std::invalid_argument("noise standard deviations must be positive");
}

PinnEnergyTerms pinn_energy(const DenseNetwork& net, const ParameterVector& params,
                            const CollocationSet& colloc, const PinnLossSpec& spec,
                            const ResidualDefinition& pde) {
  return evaluate_terms(net, params, colloc, spec, pde, nullptr);
}

ParameterVector pinn_gradient(const DenseNetwork& net, const ParameterVector& params,
                              const CollocationSet& colloc, const PinnLossSpec& spec,
                              const ResidualDefinition& pde) {
  ParameterVector g;
  evaluate_terms(net, params, colloc, spec, pde, &g);
  return g;
}

std::pair<PinnEnergyTerms, ParameterVector> pinn_energy_and_gradient(
    const DenseNetwork& net, const ParameterVector& params, const CollocationSet& colloc,
    const PinnLossSpec& spec, const ResidualDefinition& pde) {
  ParameterVector g;
  PinnEnergyTerms e = evaluate_terms(net, params, colloc, spec, pde, &g);
  return {e, std::move(g)};
}

Eigen::VectorXd predict(const DenseNetwork& net, const ParameterVector& params,
                        const Eigen::Matrix2Xd& points) {
  net.check_parameters(params);
  if (points.cols() == 0) return {};
  return jet_forward(net, params, points, {}).act.back().v.row(0).transpose();
}

double relative_error(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact) {
  if (predicted.size() != exact.size()) throw std::invalid_argument("prediction and exact sizes differ");
  if (exact.size() == 0) throw std::invalid_argument("evaluation grid is empty");
  const double norm = exact.norm();
  if (norm == 0.0) throw std::invalid_argument("exact solution has zero norm on the grid");
  return (predicted - exact).norm() / norm;
}

double relative_error(const DenseNetwork& net, const ParameterVector& params,
                      const ResidualDefinition& pde, const Eigen::Matrix2Xd& grid) {
  Eigen::VectorXd exact(grid.cols());
  for (Eigen::Index i = 0; i < grid.cols(); ++i) exact[i] = pde.exact(grid(0, i), grid(1, i));
  return relative_error(predict(net, params, grid), exact);
}

// ---------------------------------------------------------------------------

PinnProblem build_qgd_forward(Fidelity fidelity) {
  PinnProblem prob;
  prob.name = "qgd_forward";
  prob.pde.family = PdeFamily::qgd;
  prob.pde.alpha_true = 1.0;
  prob.pde.kappa = 1.0;
  prob.pde.t_final = 0.001;
  prob.network = DenseNetwork({2, 32, 32, 32, 1}, false);
  const ResidualDefinition pde = prob.pde;

  const int nx = fidelity == Fidelity::fine ? 64 : 48;
  constexpr int kTimeLevels = 8;
  Eigen::Matrix2Xd interior(2, nx * kTimeLevels), boundary(2, 2 * kTimeLevels);
  for (int k = 0; k < kTimeLevels; ++k) {
    const double t = pde.t_final * k / (kTimeLevels - 1);
    interior.middleCols(k * nx, nx) = line_points(0.0, 1.0, nx, t, false);
    boundary.col(2 * k) << 0.0, t;
    boundary.col(2 * k + 1) << 1.0, t;
  }
  const Eigen::Matrix2Xd initial = line_points(0.0, 1.0, nx, 0.0, false);
  auto& c = prob.collocation;
  c.interior = block_from(interior, [pde](double x, double t) { return pde.source(x, t); });
  c.boundary = block_from(boundary, [pde](double x, double t) { return pde.exact(x, t); });
  c.initial = block_from(initial, [pde](double x, double t) { return pde.exact(x, t); });
  c.initial_velocity = block_from(initial, [pde](double x, double t) { return pde.exact_time_derivative(x, t); });
  c.validate();
  prob.evaluation_grid = line_points(0.0, 1.0, 201, pde.t_final, true);
  return prob;
}

PinnProblem build_qgd_inverse(Fidelity fidelity) {
  PinnProblem prob = build_qgd_forward(fidelity);
  prob.name = "qgd_inverse";
  prob.network = DenseNetwork({2, 32, 32, 32, 1}, true);
  const ResidualDefinition pde = prob.pde;
  prob.collocation.observation = block_from(line_points(0.05, 0.95, 10, pde.t_final, true),
                                            [pde](double x, double t) { return pde.exact(x, t); });
  prob.collocation.validate();
  return prob;
}

PinnProblem build_nonlinear_inverse(Fidelity fidelity) {
  PinnProblem prob;
  prob.name = "nonlinear_inverse";
  prob.pde.family = PdeFamily::nonlinear;
  prob.pde.alpha_true = 0.7;
  prob.network = DenseNetwork({2, 32, 32, 32, 1}, true);
  const ResidualDefinition pde = prob.pde;

  const int nx = fidelity == Fidelity::fine ? 30 : 20;
  Eigen::Matrix2Xd boundary(2, 2);
  boundary << -1.0, 1.0, 0.0, 0.0;
  auto& c = prob.collocation;
  c.interior = block_from(line_points(-1.0, 1.0, nx, 0.0, false), [pde](double x, double t) { return pde.source(x, t); });
  c.boundary = block_from(boundary, [pde](double x, double t) { return pde.exact(x, t); });
  c.observation = block_from(line_points(-0.8, 0.8, 5, 0.0, true), [pde](double x, double t) { return pde.exact(x, t); });
  c.validate();
  prob.evaluation_grid = line_points(-1.0, 1.0, 201, 0.0, true);
  return prob;
}

// ---------------------------------------------------------------------------

PinnEnergyModel::PinnEnergyModel(PinnProblem problem, double assigned_sigma)
    : problem_(std::move(problem)), assigned_sigma_(assigned_sigma) {
  problem_.loss.validate();
  problem_.collocation.validate();
  if (!(assigned_sigma >= 0.0)) throw std::invalid_argument("assigned sigma must be non-negative");
}

double PinnEnergyModel::energy(const ParameterVector& params) { return terms(params).total(); }

ParameterVector PinnEnergyModel::gradient(const ParameterVector& params) {
  return pinn_gradient(problem_.network, params, problem_.collocation, problem_.loss, problem_.pde);
}

Evaluation PinnEnergyModel::evaluate(const ParameterVector& params) {
  auto [e, g] = pinn_energy_and_gradient(problem_.network, params, problem_.collocation, problem_.loss,
                                         problem_.pde);
  return {e.total(), std::move(g)};
}

PinnEnergyTerms PinnEnergyModel::terms(const ParameterVector& params) const {
  return pinn_energy(problem_.network, params, problem_.collocation, problem_.loss, problem_.pde);
}

double calibrate_collocation_sigma(const PinnProblem& fine, const PinnProblem& coarse,
                                   std::size_t n_networks, Rng rng) {
  if (n_networks == 0) throw std::invalid_argument("calibration needs at least one network");
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_networks; ++i) {
    const ParameterVector p = fine.network.initialize(rng, fine.alpha_init);
    const double gap = pinn_energy(coarse.network, p, coarse.collocation, coarse.loss, coarse.pde).total() -
                       pinn_energy(fine.network, p, fine.collocation, fine.loss, fine.pde).total();
    sum_sq += gap * gap;
  }
  return std::sqrt(sum_sq / static_cast<double>(n_networks));
}

}  // namespace mresgld
