#include <doctest.h>

#include <cmath>
#include <limits>

#include "mresgld/sampler.hpp"

using namespace mresgld;

namespace {

// U(x) = |x|^2 / 2, exact.
struct Quadratic : EnergyModel {
  double upper = std::numeric_limits<double>::infinity();
  double energy(const ParameterVector& x) override { return 0.5 * x.squaredNorm(); }
  ParameterVector gradient(const ParameterVector& x) override { return x; }
  double sigma() const override { return 0.0; }
  bool in_domain(const ParameterVector& x) const override { return x.maxCoeff() < upper; }
};

struct Broken : EnergyModel {
  double energy(const ParameterVector&) override { return 0.0; }
  ParameterVector gradient(const ParameterVector& x) override {
    return ParameterVector::Constant(x.size(), std::nan(""));
  }
  double sigma() const override { return 0.0; }
};

ParameterVector vec(std::initializer_list<double> v) {
  ParameterVector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

}  // namespace

TEST_CASE("zero temperature is gradient descent") {
  Quadratic model;
  Rng rng(1);
  ChainConfig cfg{0.0, 0.1, 0.0, {}};
  ChainState s = make_chain_state(vec({1.0}), model);
  s = sgld_step(std::move(s), cfg, model, rng);
  CHECK(s.position[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.step_count == 1);
  CHECK(s.last_energy == doctest::Approx(0.405));

  ChainState q = make_chain_state(vec({0.3, -2.0, 5.0}), model);
  for (int k = 0; k < 5; ++k) q = sgld_step(std::move(q), cfg, model, rng);
  for (Eigen::Index i = 0; i < 3; ++i)
    CHECK(q.position[i] == doctest::Approx(std::pow(0.9, 5) * vec({0.3, -2.0, 5.0})[i]).epsilon(1e-14));
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS((ChainConfig{-1.0, 0.1, 0.0, {}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ChainConfig{1.0, 0.0, 0.0, {}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ChainConfig{1.0, 0.1, -0.5, {}}.validate()), std::invalid_argument);
  CHECK_NOTHROW((ChainConfig{0.0, 0.1, 0.0, {}}.validate()));

  Quadratic model;
  Rng rng(2);
  CHECK_THROWS_WITH(run_chain(vec({0.0}), ChainConfig{}, model, 0, rng), "n_steps must be positive");
}

TEST_CASE("step schedule hook") {
  ChainConfig cfg{1.0, 0.1, 0.0, [](std::size_t k, double base) { return base / static_cast<double>(k + 1); }};
  CHECK(cfg.step_at(0) == doctest::Approx(0.1));
  CHECK(cfg.step_at(3) == doctest::Approx(0.025));
  CHECK(ChainConfig{}.step_at(100) == ChainConfig{}.step_size);
}

TEST_CASE("proposals outside the domain are rejected") {
  Quadratic model;
  model.upper = 1.0;
  Rng rng(3);
  // Pure descent from -1 with eta = 3 jumps to +2, outside the box.
  ChainConfig cfg{0.0, 3.0, 0.0, {}};
  ChainState s = make_chain_state(vec({-1.0}), model);
  s = sgld_step(std::move(s), cfg, model, rng);
  CHECK(s.position[0] == -1.0);
  CHECK(s.rejected_steps == 1);
  CHECK(s.step_count == 1);
}

TEST_CASE("non-finite gradient raises with the position") {
  Broken model;
  Rng rng(4);
  ChainState s;
  s.position = vec({0.25, 0.5});
  try {
    (void)sgld_step(s, ChainConfig{}, model, rng);
    FAIL("expected SamplerError");
  } catch (const SamplerError& e) {
    CHECK(e.position()[1] == 0.5);
  }
}

TEST_CASE("same seed gives the same trajectory") {
  Quadratic model;
  ChainConfig cfg{0.5, 0.05, 0.0, {}};
  Rng a(9), b(9), c(10);
  const Trajectory ta = run_chain(vec({1.0, 1.0}), cfg, model, 200, a, 7);
  const Trajectory tb = run_chain(vec({1.0, 1.0}), cfg, model, 200, b, 7);
  const Trajectory tc = run_chain(vec({1.0, 1.0}), cfg, model, 200, c, 7);
  REQUIRE(ta.snapshots.size() == 200 / 7);
  CHECK(ta.snapshots.back().position == tb.snapshots.back().position);
  CHECK(ta.snapshots.back().position != tc.snapshots.back().position);
  CHECK(ta.snapshots.front().step_count == 7);
}

TEST_CASE("stationary variance of a Gaussian") {
  Quadratic model;
  const double tau = 0.5;
  ChainConfig cfg{tau, 0.01, 0.0, {}};
  Rng rng(5);
  const Trajectory t = run_chain(vec({0.0}), cfg, model, 200000, rng, 10);
  double s2 = 0;
  std::size_t n = 0;
  for (std::size_t i = 1000; i < t.snapshots.size(); ++i, ++n) s2 += t.snapshots[i].position[0] * t.snapshots[i].position[0];
  // Euler bias: the chain's variance is tau / (1 - eta / 2).
  CHECK(s2 / static_cast<double>(n) == doctest::Approx(tau / (1 - 0.005)).epsilon(0.05));
}
