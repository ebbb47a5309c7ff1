#pragma once

#include <cmath>

namespace mresgld {

// Forward-mode dual number v + d*eps with eps^2 = 0. Nesting Dual<Dual<double>>
// carries first and second derivatives along one seeded direction.
template <class T>
struct Dual {
  T v{};
  T d{};

  Dual() = default;
  Dual(double value) : v(value), d(0.0) {}  // NOLINT(google-explicit-constructor)
  Dual(T value, T derivative) : v(value), d(derivative) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
};

template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.v + b.v, a.d + b.d}; }
template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.v - b.v, a.d - b.d}; }
template <class T>
Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}

template <class T>
Dual<T> operator+(const Dual<T>& a, double s) { return {a.v + s, a.d}; }
template <class T>
Dual<T> operator+(double s, const Dual<T>& a) { return {a.v + s, a.d}; }
template <class T>
Dual<T> operator-(const Dual<T>& a, double s) { return {a.v - s, a.d}; }
template <class T>
Dual<T> operator-(double s, const Dual<T>& a) { return {s - a.v, -a.d}; }
template <class T>
Dual<T> operator*(const Dual<T>& a, double s) { return {a.v * s, a.d * s}; }
template <class T>
Dual<T> operator*(double s, const Dual<T>& a) { return {a.v * s, a.d * s}; }
template <class T>
Dual<T> operator/(const Dual<T>& a, double s) { return {a.v / s, a.d / s}; }
template <class T>
Dual<T> operator/(double s, const Dual<T>& a) { return {s / a.v, -(s * a.d) / (a.v * a.v)}; }

template <class T>
Dual<T> tanh(const Dual<T>& a) {
  using std::tanh;
  const T th = tanh(a.v);
  return {th, (1.0 - th * th) * a.d};
}

template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  const T e = exp(a.v);
  return {e, e * a.d};
}

template <class T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {sin(a.v), cos(a.v) * a.d};
}

template <class T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {cos(a.v), -(sin(a.v) * a.d)};
}

using Dual2 = Dual<Dual<double>>;

// Seeds a second-order variable: value x, unit first derivative.
inline Dual2 seed_variable(double x) { return Dual2(Dual<double>(x, 1.0), Dual<double>(1.0, 0.0)); }
inline Dual2 seed_constant(double x) { return Dual2(x); }

inline double value(const Dual2& a) { return a.v.v; }
inline double first(const Dual2& a) { return a.v.d; }
inline double second(const Dual2& a) { return a.d.d; }

}  // namespace mresgld
