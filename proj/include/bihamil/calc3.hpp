#pragma once

#include <cfloat>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "bihamil/error.hpp"
#include "bihamil/expr.hpp"
#include "bihamil/vec3.hpp"

namespace bihamil {

/// Central-difference step for a second-order stencil at p.
inline double default_fd_step(const Vec3& p) { return std::cbrt(DBL_EPSILON) * std::max(1.0, norm(p)); }

namespace detail {

inline double checked_step(std::optional<double> h) {
  if (h && !(*h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  return h.value_or(0.0);
}

}  // namespace detail

/// Scalar field defined by a computation; differentiated by central
/// differences. An unset step means default_fd_step(p).
class DerivedScalar {
 public:
  explicit DerivedScalar(std::function<double(const Vec3&)> fn, std::optional<double> step = std::nullopt)
      : fn_(std::move(fn)), step_(detail::checked_step(step)) {}

  double operator()(const Vec3& p) const { return fn_(p); }
  double step_at(const Vec3& p) const { return step_ > 0.0 ? step_ : default_fd_step(p); }

 private:
  std::function<double(const Vec3&)> fn_;
  double step_;
};

class DerivedVector {
 public:
  explicit DerivedVector(std::function<Vec3(const Vec3&)> fn, std::optional<double> step = std::nullopt)
      : fn_(std::move(fn)), step_(detail::checked_step(step)) {}

  Vec3 operator()(const Vec3& p) const { return fn_(p); }
  double step_at(const Vec3& p) const { return step_ > 0.0 ? step_ : default_fd_step(p); }

 private:
  std::function<Vec3(const Vec3&)> fn_;
  double step_;
};

/// Field handles: analytic fields differentiate exactly through Jet2,
/// derived ones by central differences.
using ScalarField = std::variant<ExprAst, DerivedScalar>;
using VectorField = std::variant<VectorFieldSpec, DerivedVector>;

/// Partial derivatives of fn at p by second-order central differences.
/// R only needs R - R and R * double.
template <class Fn>
auto central_partials(const Fn& fn, const Vec3& p, double h) {
  using R = std::invoke_result_t<const Fn&, const Vec3&>;
  std::array<R, 3> d{};
  for (std::size_t j = 0; j < 3; ++j) {
    Vec3 plus = p, minus = p;
    plus[j] += h;
    minus[j] -= h;
    // Use the actually representable spacing.
    const double span = plus[j] - minus[j];
    d[j] = (fn(plus) - fn(minus)) * (1.0 / span);
  }
  return d;
}

inline Vec3 curl_from_jacobian(const Mat3& jac) {
  // jac[i][j] = ∂_j F_i
  return {jac[2][1] - jac[1][2], jac[0][2] - jac[2][0], jac[1][0] - jac[0][1]};
}

inline double value(const ScalarField& f, const Vec3& p) {
  return std::visit(
      [&](const auto& h) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(h)>, ExprAst>) {
          return evaluate(h, p);
        } else {
          return h(p);
        }
      },
      f);
}

inline Vec3 value(const VectorField& f, const Vec3& p) {
  return std::visit(
      [&](const auto& h) -> Vec3 {
        if constexpr (std::is_same_v<std::decay_t<decltype(h)>, VectorFieldSpec>) {
          return evaluate(h, p);
        } else {
          return h(p);
        }
      },
      f);
}

inline Vec3 gradient(const ScalarField& f, const Vec3& p) {
  if (const auto* e = std::get_if<ExprAst>(&f)) return eval_jet2(*e, p).gradient;
  const auto& d = std::get<DerivedScalar>(f);
  const auto g = central_partials(d, p, d.step_at(p));
  return {g[0], g[1], g[2]};
}

/// jac[i][j] = ∂_j F_i
inline Mat3 jacobian(const VectorField& f, const Vec3& p) {
  Mat3 jac{};
  if (const auto* spec = std::get_if<VectorFieldSpec>(&f)) {
    const auto jets = eval_jet2(*spec, p);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) jac[i][j] = jets[i].gradient[j];
    return jac;
  }
  const auto& d = std::get<DerivedVector>(f);
  const auto cols = central_partials(d, p, d.step_at(p));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) jac[i][j] = cols[j][i];
  return jac;
}

inline Vec3 curl(const VectorField& f, const Vec3& p) { return curl_from_jacobian(jacobian(f, p)); }

inline double directional_derivative(const ScalarField& f, const Vec3& p, const Vec3& d) {
  if (std::abs(norm(d) - 1.0) > 1e-12) throw InvalidArgument("direction must be a unit vector");
  return dot(d, gradient(f, p));
}

/// Fornberg weights for the first derivative at x0 from samples at xs.
inline std::vector<double> fd_weights(double x0, std::span<const double> xs) {
  const std::size_t n = xs.size();
  // c[j][k]: weight of xs[j] for derivative order k (k = 0, 1).
  std::vector<std::array<double, 2>> c(n, {0.0, 0.0});
  double c1 = 1.0;
  double c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min<std::size_t>(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) c[i][k] = c1 * (double(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - double(k) * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) w[j] = c[j][1];
  return w;
}

/// First derivative of sampled values at index i using the 5 nearest samples
/// (centred where possible). Requires at least 5 samples.
inline double five_point_derivative(std::span<const double> s, std::span<const double> f, std::size_t i) {
  const std::size_t n = s.size();
  std::size_t lo = i >= 2 ? i - 2 : 0;
  if (lo + 5 > n) lo = n - 5;
  const auto w = fd_weights(s[i], s.subspan(lo, 5));
  double d = 0.0;
  for (std::size_t k = 0; k < 5; ++k) d += w[k] * f[lo + k];
  return d;
}

/// Derivative at 0 of g along a straight line, from g(±δ), g(±2δ).
template <class G>
double five_point_line_derivative(const G& g, double delta) {
  return (-g(2.0 * delta) + 8.0 * g(delta) - 8.0 * g(-delta) + g(-2.0 * delta)) / (12.0 * delta);
}

/// Point k (k = 0, 1, ...) of the Halton sequence in bases 2, 3, 5 mapped into
/// the box [lo, hi].
inline Vec3 halton_point(std::size_t k, const Vec3& lo, const Vec3& hi) {
  auto radical_inverse = [](std::size_t i, std::size_t base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
      f /= double(base);
      r += f * double(i % base);
      i /= base;
    }
    return r;
  };
  const std::size_t i = k + 1;  // skip the origin
  Vec3 u{radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5)};
  return {lo[0] + u[0] * (hi[0] - lo[0]), lo[1] + u[1] * (hi[1] - lo[1]), lo[2] + u[2] * (hi[2] - lo[2])};
}

}  // namespace bihamil
