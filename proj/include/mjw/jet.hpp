#pragma once

// Second-order forward-mode jets: value, gradient and Hessian with respect to
// N independent variables. Used to get exact first and second derivatives of
// the Hamiltonians (right-hand sides and their Jacobians for the variational
// equations) without hand-deriving them for every symbol model.

#include <array>
#include <cmath>

namespace mjw {

template <int N>
struct Jet {
  double v = 0.0;
  std::array<double, N> g{};
  std::array<double, N * N> h{};

  Jet() = default;
  Jet(double value) : v(value) {}  // NOLINT: constants promote implicitly

  static Jet variable(double value, int index) {
    Jet j(value);
    j.g[index] = 1.0;
    return j;
  }

  double hess(int i, int k) const { return h[i * N + k]; }
};

namespace jet_detail {

// Composition with a scalar function f given f(v), f'(v), f''(v).
template <int N>
Jet<N> chain(const Jet<N>& a, double f0, double f1, double f2) {
  Jet<N> r;
  r.v = f0;
  for (int i = 0; i < N; ++i) r.g[i] = f1 * a.g[i];
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k) r.h[i * N + k] = f1 * a.h[i * N + k] + f2 * a.g[i] * a.g[k];
  return r;
}

}  // namespace jet_detail

template <int N>
Jet<N> operator+(const Jet<N>& a, const Jet<N>& b) {
  Jet<N> r;
  r.v = a.v + b.v;
  for (int i = 0; i < N; ++i) r.g[i] = a.g[i] + b.g[i];
  for (int i = 0; i < N * N; ++i) r.h[i] = a.h[i] + b.h[i];
  return r;
}

template <int N>
Jet<N> operator-(const Jet<N>& a) {
  Jet<N> r;
  r.v = -a.v;
  for (int i = 0; i < N; ++i) r.g[i] = -a.g[i];
  for (int i = 0; i < N * N; ++i) r.h[i] = -a.h[i];
  return r;
}

template <int N>
Jet<N> operator-(const Jet<N>& a, const Jet<N>& b) {
  Jet<N> r;
  r.v = a.v - b.v;
  for (int i = 0; i < N; ++i) r.g[i] = a.g[i] - b.g[i];
  for (int i = 0; i < N * N; ++i) r.h[i] = a.h[i] - b.h[i];
  return r;
}

template <int N>
Jet<N> operator*(const Jet<N>& a, const Jet<N>& b) {
  Jet<N> r;
  r.v = a.v * b.v;
  for (int i = 0; i < N; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k)
      r.h[i * N + k] = a.h[i * N + k] * b.v + a.v * b.h[i * N + k] + a.g[i] * b.g[k] + a.g[k] * b.g[i];
  return r;
}

template <int N>
Jet<N> operator*(double s, Jet<N> a) {
  a.v *= s;
  for (auto& x : a.g) x *= s;
  for (auto& x : a.h) x *= s;
  return a;
}

template <int N>
Jet<N> operator*(const Jet<N>& a, double s) {
  return s * a;
}

template <int N>
Jet<N> operator+(Jet<N> a, double s) {
  a.v += s;
  return a;
}

template <int N>
Jet<N> operator+(double s, Jet<N> a) {
  a.v += s;
  return a;
}

template <int N>
Jet<N> operator-(Jet<N> a, double s) {
  a.v -= s;
  return a;
}

template <int N>
Jet<N> operator-(double s, const Jet<N>& a) {
  return (-a) + s;
}

template <int N>
Jet<N> inverse(const Jet<N>& a) {
  const double iv = 1.0 / a.v;
  return jet_detail::chain(a, iv, -iv * iv, 2.0 * iv * iv * iv);
}

template <int N>
Jet<N> operator/(const Jet<N>& a, const Jet<N>& b) {
  return a * inverse(b);
}

template <int N>
Jet<N> operator/(const Jet<N>& a, double s) {
  return (1.0 / s) * a;
}

template <int N>
Jet<N> operator/(double s, const Jet<N>& a) {
  return s * inverse(a);
}

template <int N>
Jet<N> sqrt(const Jet<N>& a) {
  const double s = std::sqrt(a.v);
  return jet_detail::chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

template <int N>
Jet<N> exp(const Jet<N>& a) {
  const double e = std::exp(a.v);
  return jet_detail::chain(a, e, e, e);
}

template <int N>
Jet<N> log(const Jet<N>& a) {
  return jet_detail::chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v));
}

template <int N>
Jet<N> tanh(const Jet<N>& a) {
  const double t = std::tanh(a.v);
  const double d1 = 1.0 - t * t;
  return jet_detail::chain(a, t, d1, -2.0 * t * d1);
}

template <int N>
Jet<N> pow(const Jet<N>& a, double e) {
  const double p = std::pow(a.v, e);
  return jet_detail::chain(a, p, e * p / a.v, e * (e - 1.0) * p / (a.v * a.v));
}

template <int N>
Jet<N> square(const Jet<N>& a) {
  return jet_detail::chain(a, a.v * a.v, 2.0 * a.v, 2.0);
}

inline double square(double a) { return a * a; }

inline double value_of(double a) { return a; }
template <int N>
double value_of(const Jet<N>& a) {
  return a.v;
}

// Embeds a jet in fewer variables into a larger variable space; variable i of
// the source becomes variable offset+i of the target.
template <int M, int N>
Jet<M> lift(const Jet<N>& a, int offset = 0) {
  static_assert(M >= N);
  Jet<M> r(a.v);
  for (int i = 0; i < N; ++i) r.g[offset + i] = a.g[i];
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k) r.h[(offset + i) * M + offset + k] = a.h[i * N + k];
  return r;
}

// First-order jet of the partial derivative d/dx_k of a scalar known to second
// order. The Hessian of the result is unknown and left at zero; only use the
// value and gradient of what is computed from it.
template <int M, int N>
Jet<M> partial_as_jet(const Jet<N>& a, int k, int offset = 0) {
  Jet<M> r(a.g[k]);
  for (int i = 0; i < N; ++i) r.g[offset + i] = a.h[k * N + i];
  return r;
}

}  // namespace mjw
