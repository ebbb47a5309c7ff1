#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mresgld/pinn.hpp"

using namespace mresgld;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Five-point central difference of the total energy along coordinate i.
double fd_energy(const PinnProblem& p, ParameterVector params, Eigen::Index i, double h) {
  auto e = [&](double shift) {
    ParameterVector q = params;
    q[i] += shift;
    return pinn_energy(p.network, q, p.collocation, p.loss, p.pde).total();
  };
  return (-e(2 * h) + 8 * e(h) - 8 * e(-h) + e(-2 * h)) / (12 * h);
}

double max_gradient_error(const PinnProblem& p, std::uint64_t seed, bool include_alpha) {
  Rng rng(seed);
  const ParameterVector params = p.network.initialize(rng, 0.8);
  const ParameterVector g = pinn_gradient(p.network, params, p.collocation, p.loss, p.pde);
  double worst = 0.0;
  Rng pick(seed + 100);
  for (int k = 0; k < 20; ++k) {
    Eigen::Index i = static_cast<Eigen::Index>(pick.uniform() * static_cast<double>(p.network.weight_count()));
    if (include_alpha && k == 0) i = static_cast<Eigen::Index>(p.network.parameter_count() - 1);
    const double fd = fd_energy(p, params, i, 1e-4);
    worst = std::max(worst, std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-2}));
  }
  return worst;
}

}  // namespace

TEST_CASE("network layout") {
  const DenseNetwork net;
  CHECK(net.weight_count() == 3 * 32 + 33 * 32 + 33 * 32 + 33);
  CHECK(net.parameter_count() == 2241);
  const DenseNetwork inv({2, 32, 32, 32, 1}, true);
  CHECK(inv.parameter_count() == 2242);
  Rng rng(1);
  const ParameterVector p = inv.initialize(rng, 0.5);
  CHECK(inv.alpha(p) == 0.5);
  CHECK_THROWS(net.alpha(p));
  CHECK_THROWS(net.forward(ParameterVector::Zero(2241), Eigen::VectorXd::Zero(3)));
}

TEST_CASE("zero parameters give zero output") {
  const DenseNetwork net;
  Eigen::VectorXd in(2);
  in << 0.3, -4.0;
  CHECK(net.forward(ParameterVector::Zero(2241), in) == 0.0);
}

TEST_CASE("single hidden unit by hand") {
  const DenseNetwork net({1, 1, 1});
  ParameterVector p(4);
  p << 0.7, -0.2, 1.5, 0.3;  // w, b, v, c
  Eigen::VectorXd in(1);
  in << 0.9;
  CHECK(net.forward(p, in) == doctest::Approx(std::tanh(0.7 * 0.9 - 0.2) * 1.5 + 0.3).epsilon(1e-15));
}

TEST_CASE("hidden-unit permutation leaves the output unchanged") {
  const DenseNetwork net({2, 4, 1});
  Rng rng(3);
  const ParameterVector p = net.initialize(rng);
  // Layout: W1 (4x2), b1 (4), W2 (1x4), b2 (1). Swap hidden units 0 and 2.
  ParameterVector q = p;
  auto swap = [&](int a, int b) { std::swap(q[a], q[b]); };
  swap(0, 4);
  swap(1, 5);
  swap(8, 10);
  swap(12, 14);
  Eigen::VectorXd in(2);
  in << 0.4, -0.7;
  CHECK(net.forward(q, in) == doctest::Approx(net.forward(p, in)).epsilon(1e-14));
  CHECK(q != p);
}

TEST_CASE("network input derivatives") {
  // Linear network: u = w . x + c.
  const DenseNetwork lin({2, 1});
  ParameterVector p(3);
  p << 2.5, -1.0, 0.4;
  const InputDerivatives d = input_derivatives(lin, p, 0.3, 0.2);
  CHECK(d.u_x == 2.5);
  CHECK(d.u_xx == 0.0);
  CHECK(d.u_t == -1.0);

  const DenseNetwork net;
  Rng rng(4);
  const ParameterVector q = net.initialize(rng);
  const double x = 0.31, t = 0.4, h = 1e-4;
  auto u = [&](double a, double b) { return net.forward2(q, a, b); };
  const InputDerivatives r = input_derivatives(net, q, x, t);
  const double fd_xx = (u(x + h, t) - 2 * u(x, t) + u(x - h, t)) / (h * h);
  const double fd_tt = (u(x, t + h) - 2 * u(x, t) + u(x, t - h)) / (h * h);
  CHECK(std::abs(r.u_xx - fd_xx) <= 1e-5 * std::max(1.0, std::abs(r.u_xx)));
  CHECK(std::abs(r.u_tt - fd_tt) <= 1e-5 * std::max(1.0, std::abs(r.u_tt)));
  CHECK(r.u == doctest::Approx(u(x, t)).epsilon(1e-14));
}

TEST_CASE("manufactured solutions have zero residual") {
  for (PdeFamily fam : {PdeFamily::qgd, PdeFamily::nonlinear}) {
    ResidualDefinition pde;
    pde.family = fam;
    pde.alpha_true = fam == PdeFamily::qgd ? 1.0 : 0.7;
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      const double x = pde.x_min() + (pde.x_max() - pde.x_min()) * rng.uniform();
      const double t = fam == PdeFamily::qgd ? pde.t_final * rng.uniform() : 0.0;
      const auto d = input_derivatives([&](const auto& a, const auto& b) { return pde.exact_generic(a, b); }, x, t);
      CHECK(std::abs(pde.residual(d, pde.alpha_true, pde.source(x, t))) < 1e-10);
    }
  }
}

TEST_CASE("derived sources") {
  ResidualDefinition qgd;
  for (double x : {0.1, 0.37, 0.8})
    CHECK(qgd.source(x, 0.0005) / qgd.exact(x, 0.0005) == doctest::Approx(kTwoPi * kTwoPi));
  CHECK(qgd.exact_time_derivative(0.2, 0.0) == doctest::Approx(-qgd.exact(0.2, 0.0)));
  ResidualDefinition nl;
  nl.family = PdeFamily::nonlinear;
  nl.alpha_true = 0.7;
  CHECK(nl.source(0.0, 0.0) == doctest::Approx(4.7));
  CHECK(nl.source(0.43, 0.0) == doctest::Approx(nl.source(-0.43, 0.0)));
}

TEST_CASE("problem builders") {
  const PinnProblem f = build_qgd_forward(Fidelity::fine);
  const PinnProblem c = build_qgd_forward(Fidelity::coarse);
  CHECK(f.collocation.interior.size() == 64 * 8);
  CHECK(c.collocation.interior.size() == 48 * 8);
  CHECK(f.collocation.boundary.values.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(f.collocation.initial_velocity.values.isApprox(-f.collocation.initial.values));
  CHECK(f.evaluation_grid.cols() == 201);
  CHECK_FALSE(f.network.has_inverse_slot());

  const PinnProblem qi = build_qgd_inverse(Fidelity::fine);
  CHECK(qi.network.has_inverse_slot());
  REQUIRE(qi.collocation.observation.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto col = qi.collocation.observation.points.col(static_cast<Eigen::Index>(i));
    CHECK(qi.collocation.observation.values[static_cast<Eigen::Index>(i)] ==
          doctest::Approx(std::sin(kTwoPi * col[0]) * std::exp(-col[1])));
  }

  const PinnProblem nf = build_nonlinear_inverse(Fidelity::fine);
  const PinnProblem nc = build_nonlinear_inverse(Fidelity::coarse);
  CHECK(nf.collocation.interior.size() == 30);
  CHECK(nc.collocation.interior.size() == 20);
  CHECK(nf.collocation.observation.size() == 5);
  CHECK(nf.collocation.interior.points.row(0).minCoeff() > -1.0);
  CHECK(nf.collocation.interior.points.row(0).maxCoeff() < 1.0);
}

TEST_CASE("energy scaling and a single-point toy") {
  PinnProblem p = build_qgd_forward(Fidelity::coarse);
  Rng rng(6);
  const ParameterVector params = p.network.initialize(rng);
  const PinnEnergyTerms a = pinn_energy(p.network, params, p.collocation, p.loss, p.pde);
  p.loss.sigma_u *= 2;
  p.loss.sigma_f *= 2;
  p.loss.sigma_b *= 2;
  const PinnEnergyTerms b = pinn_energy(p.network, params, p.collocation, p.loss, p.pde);
  CHECK(b.likelihood() == doctest::Approx(a.likelihood() / 4).epsilon(1e-12));
  CHECK(b.prior == a.prior);
  CHECK(a.prior == doctest::Approx(0.5 * params.squaredNorm()));

  CollocationSet one;
  one.interior.points = Eigen::Matrix2Xd(2, 1);
  one.interior.points << 0.3, 0.0005;
  one.interior.values = Eigen::VectorXd::Constant(1, 2.0);
  const DenseNetwork net;
  const ParameterVector zero = ParameterVector::Zero(2241);
  PinnLossSpec spec;
  const PinnEnergyTerms t = pinn_energy(net, zero, one, spec, ResidualDefinition{});
  // Zero network: residual = -f = -2.
  CHECK(t.residual == doctest::Approx(4.0 / (2 * 0.01)));
  CHECK(t.prior == 0.0);
}

TEST_CASE("reverse-mode gradient matches finite differences") {
  CHECK(max_gradient_error(build_qgd_forward(Fidelity::coarse), 11, false) < 1e-5);
  CHECK(max_gradient_error(build_qgd_inverse(Fidelity::coarse), 12, true) < 1e-5);
  CHECK(max_gradient_error(build_nonlinear_inverse(Fidelity::coarse), 13, true) < 1e-5);
}

TEST_CASE("alpha gradient by the chain rule") {
  const PinnProblem p = build_qgd_inverse(Fidelity::coarse);
  Rng rng(7);
  const ParameterVector params = p.network.initialize(rng, 0.6);
  const ParameterVector g = pinn_gradient(p.network, params, p.collocation, p.loss, p.pde);
  const auto& pts = p.collocation.interior.points;
  double expect = 0.0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const InputDerivatives d = input_derivatives(p.network, params, pts(0, i), pts(1, i));
    const double r = p.pde.residual(d, 0.6, p.collocation.interior.values[i]);
    expect += 2 * r * d.u_tt / (2 * p.loss.sigma_f * p.loss.sigma_f);
  }
  expect /= static_cast<double>(pts.cols());
  expect += 0.6;  // prior
  CHECK(g[g.size() - 1] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("relative error") {
  Eigen::VectorXd exact(4), pred(4);
  exact << 1, -2, 3, 0.5;
  CHECK(relative_error(exact, exact) == 0.0);
  CHECK(relative_error(2 * exact, exact) == doctest::Approx(1.0));
  pred = exact.array() + 0.1;
  CHECK(relative_error(pred, exact) == doctest::Approx(0.1 * 2 / exact.norm()));
  CHECK_THROWS(relative_error(exact, Eigen::VectorXd::Zero(4)));
}

TEST_CASE("energy model adapter and calibration") {
  const PinnProblem fine = build_nonlinear_inverse(Fidelity::fine);
  const PinnProblem coarse = build_nonlinear_inverse(Fidelity::coarse);
  PinnEnergyModel m(fine, 0.2);
  Rng rng(8);
  const ParameterVector p = fine.network.initialize(rng);
  const Evaluation ev = m.evaluate(p);
  CHECK(ev.energy == doctest::Approx(m.energy(p)));
  CHECK(ev.gradient.isApprox(m.gradient(p)));
  CHECK(m.sigma() == 0.2);
  const double s = calibrate_collocation_sigma(fine, coarse, 5, Rng(9));
  CHECK(s > 0.0);
}

TEST_CASE("non-finite residual reports the point") {
  const PinnProblem p = build_nonlinear_inverse(Fidelity::coarse);
  ParameterVector params = ParameterVector::Zero(static_cast<Eigen::Index>(p.network.parameter_count()));
  params[params.size() - 2] = std::numeric_limits<double>::infinity();  // output bias
  CHECK_THROWS_AS(pinn_energy(p.network, params, p.collocation, p.loss, p.pde), PinnError);
}
