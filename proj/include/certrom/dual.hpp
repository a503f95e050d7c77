// SPDX-License-Identifier: Apache-2.0
//
// Nested forward-mode dual numbers. Dual<Dual<double>> carries a mixed
// second derivative, Dual<Dual<Dual<double>>> a third one. Coefficient
// functions are written once as generic callables and instantiated with
// these types to obtain exact partial derivatives.

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace certrom {

template <class T>
struct Dual {
  T re{};
  T eps{};

  Dual() = default;
  Dual(double v) : re(v), eps(0.0) {}  // NOLINT: implicit lift of constants
  Dual(T r, T e) : re(std::move(r)), eps(std::move(e)) {}
};

template <class T> struct is_dual : std::false_type {};
template <class T> struct is_dual<Dual<T>> : std::true_type {};

template <class T> Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.re + b.re, a.eps + b.eps}; }
template <class T> Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.re - b.re, a.eps - b.eps}; }
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.re, -a.eps}; }
template <class T> Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) { return {a.re * b.re, a.re * b.eps + a.eps * b.re}; }
template <class T> Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T inv = T(1.0) / b.re;
  return {a.re * inv, (a.eps - a.re * inv * b.eps) * inv};
}

template <class T> Dual<T> operator+(const Dual<T>& a, double b) { return {a.re + b, a.eps}; }
template <class T> Dual<T> operator+(double a, const Dual<T>& b) { return {a + b.re, b.eps}; }
template <class T> Dual<T> operator-(const Dual<T>& a, double b) { return {a.re - b, a.eps}; }
template <class T> Dual<T> operator-(double a, const Dual<T>& b) { return {a - b.re, -b.eps}; }
template <class T> Dual<T> operator*(const Dual<T>& a, double b) { return {a.re * b, a.eps * b}; }
template <class T> Dual<T> operator*(double a, const Dual<T>& b) { return {a * b.re, a * b.eps}; }
template <class T> Dual<T> operator/(const Dual<T>& a, double b) { return {a.re / b, a.eps / b}; }
template <class T> Dual<T> operator/(double a, const Dual<T>& b) { return Dual<T>(a) / b; }

template <class T> Dual<T> sin(const Dual<T>& a) {
  using std::cos, std::sin;
  return {sin(a.re), cos(a.re) * a.eps};
}
template <class T> Dual<T> cos(const Dual<T>& a) {
  using std::cos, std::sin;
  return {cos(a.re), -(sin(a.re) * a.eps)};
}
template <class T> Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T s = sqrt(a.re);
  return {s, a.eps / (2.0 * s)};
}

/// Innermost scalar value of a (possibly nested) dual.
inline double primal(double v) { return v; }
template <class T> double primal(const Dual<T>& v) { return primal(v.re); }

using D1 = Dual<double>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;

namespace detail {

// Variable vector where nesting level k (outermost = 0) is seeded in the
// direction dirs[k].
template <class T>
T seed_variable(double value, int var, std::span<const int> dirs) {
  if constexpr (std::is_same_v<T, double>) {
    return value;
  } else {
    using Inner = decltype(T{}.re);
    // Outermost perturbation is dirs[0]; inner levels use the remaining ones.
    Inner re = seed_variable<Inner>(value, var, dirs.subspan(1));
    Inner eps = Inner(dirs[0] == var ? 1.0 : 0.0);
    return T{re, eps};
  }
}

template <class T>
double extract_derivative(const T& v) {
  if constexpr (std::is_same_v<T, double>) {
    return v;
  } else {
    return extract_derivative(v.eps);
  }
}

}  // namespace detail

}  // namespace certrom
