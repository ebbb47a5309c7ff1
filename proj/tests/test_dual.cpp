#include <doctest.h>

#include <cmath>

#include "mresgld/dual.hpp"
#include "mresgld/pinn.hpp"

using namespace mresgld;

TEST_CASE("second-order duals of elementary functions") {
  const double x = 0.37;
  const Dual2 t = tanh(seed_variable(x));
  const double th = std::tanh(x);
  CHECK(value(t) == doctest::Approx(th).epsilon(1e-15));
  CHECK(first(t) == doctest::Approx(1 - th * th).epsilon(1e-14));
  CHECK(std::abs(second(t) - (-2 * th * (1 - th * th))) < 1e-12);

  const Dual2 s = sin(seed_variable(x) * 3.0);
  CHECK(second(s) == doctest::Approx(-9 * std::sin(3 * x)));
  const Dual2 e = exp(seed_variable(x) * seed_variable(x));
  CHECK(second(e) == doctest::Approx((2 + 4 * x * x) * std::exp(x * x)));
  const Dual2 q = 1.0 / (seed_variable(x) + 1.0);
  CHECK(second(q) == doctest::Approx(2 / std::pow(1 + x, 3)));
}

TEST_CASE("constants carry no derivative") {
  const Dual2 c = seed_constant(2.0) * seed_variable(1.5);
  CHECK(value(c) == 3.0);
  CHECK(first(c) == 2.0);
  CHECK(second(c) == 0.0);
}

TEST_CASE("generic input derivatives of a closed form") {
  auto f = [](const auto& x, const auto& t) { return sin(x) * exp(t * -2.0); };
  const InputDerivatives d = input_derivatives(f, 0.3, 0.1);
  CHECK(d.u == doctest::Approx(std::sin(0.3) * std::exp(-0.2)));
  CHECK(d.u_xx == doctest::Approx(-d.u));
  CHECK(d.u_t == doctest::Approx(-2 * d.u));
  CHECK(d.u_tt == doctest::Approx(4 * d.u));
  const InputDerivatives only_space = input_derivatives(f, 0.3, 0.1, {true, false});
  CHECK(only_space.u_t == 0.0);
}
