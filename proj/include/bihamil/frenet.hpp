#pragma once

#include <cmath>

#include "bihamil/calc3.hpp"
#include "bihamil/error.hpp"
#include "bihamil/expr.hpp"
#include "bihamil/vec3.hpp"

namespace bihamil {

/// Degeneracy thresholds. ε_v scales with the point: eps_v_scale·(1 + ‖p‖).
struct FrameOptions {
  double eps_v_scale{1e-10};
  double eps_deg{1e-8};
  double fd_step{0.0};  // 0: default_fd_step(p)

  double eps_v(const Vec3& p) const { return eps_v_scale * (1.0 + norm(p)); }
  double step_at(const Vec3& p) const { return fd_step > 0.0 ? fd_step : default_fd_step(p); }
};

/// Serret-Frenet triad of a vector field at a point.
struct Frame {
  Vec3 t, n, b;
  double normal_magnitude{0.0};  // ‖t×(∇×t)‖ before normalization
  double speed{0.0};             // ‖v‖
  Vec3 curl_t;                   // ∇×t, exact
};

/// Pointwise helicity densities of the triad.
struct HelicityDensities {
  double omega_t{0.0};
  double omega_n{0.0};
  double omega_b{0.0};
  double n_curl_b{0.0};
  double b_curl_n{0.0};

  double omega_nb() const { return n_curl_b + b_curl_n; }
};

/// Everything the streamline integrators need at one point.
struct PointGeometry {
  Frame frame;
  HelicityDensities helicities;
  double speed_log_deriv{0.0};  // ∂_s ln‖v‖
};

namespace detail {

struct TangentData {
  Vec3 v;
  double speed;
  Vec3 t;
  Mat3 grad_v;  // grad_v[i][j] = ∂_j v_i
  Mat3 grad_t;  // grad_t[i][j] = ∂_j t_i
};

inline TangentData tangent_data(const VectorFieldSpec& field, const Vec3& p, const FrameOptions& opts) {
  const auto jets = eval_jet2(field, p);
  TangentData d;
  d.v = {jets[0].value, jets[1].value, jets[2].value};
  d.speed = norm(d.v);
  const double eps_v = opts.eps_v(p);
  if (!(d.speed >= eps_v)) throw DegeneracyError({DegeneracyKind::ZeroVelocity, d.speed, eps_v});
  d.t = d.v / d.speed;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) d.grad_v[i][j] = jets[i].gradient[j];
  for (std::size_t j = 0; j < 3; ++j) {
    const double t_dot_dv = d.t[0] * d.grad_v[0][j] + d.t[1] * d.grad_v[1][j] + d.t[2] * d.grad_v[2][j];
    for (std::size_t i = 0; i < 3; ++i) d.grad_t[i][j] = (d.grad_v[i][j] - d.t[i] * t_dot_dv) / d.speed;
  }
  return d;
}

struct NormalBinormal {
  Vec3 n, b;

  friend NormalBinormal operator-(const NormalBinormal& a, const NormalBinormal& c) { return {a.n - c.n, a.b - c.b}; }
  friend NormalBinormal operator*(const NormalBinormal& a, double s) { return {a.n * s, a.b * s}; }
};

}  // namespace detail

/// Unit tangent only; cheaper than frame_at and valid on straight streamlines.
inline Vec3 unit_tangent(const VectorFieldSpec& v, const Vec3& p, const FrameOptions& opts = {}) {
  const Vec3 val = evaluate(v, p);
  const double speed = norm(val);
  const double eps_v = opts.eps_v(p);
  if (!(speed >= eps_v)) throw DegeneracyError({DegeneracyKind::ZeroVelocity, speed, eps_v});
  return val / speed;
}

/// t = v/‖v‖, n = t×(∇×t)/‖t×(∇×t)‖, b = t×n.
///
/// Throws DegeneracyError when ‖v‖ < ε_v (ZeroVelocity) or ‖t×(∇×t)‖ < ε_deg.
/// The latter is reported as CurlEigenvector when ∇×t itself is not small
/// (Beltrami alignment, ∇×t = λt with λ = t·(∇×t)), else VanishingNormal.
inline Frame frame_at(const VectorFieldSpec& v, const Vec3& p, const FrameOptions& opts = {}) {
  const auto d = detail::tangent_data(v, p, opts);
  Frame f;
  f.speed = d.speed;
  f.t = d.t;
  f.curl_t = curl_from_jacobian(d.grad_t);
  const Vec3 w = cross(f.t, f.curl_t);
  f.normal_magnitude = norm(w);
  if (!(f.normal_magnitude >= opts.eps_deg)) {
    const bool beltrami = norm(f.curl_t) >= opts.eps_deg;
    throw DegeneracyError(
        {beltrami ? DegeneracyKind::CurlEigenvector : DegeneracyKind::VanishingNormal, f.normal_magnitude, opts.eps_deg});
  }
  f.n = w / f.normal_magnitude;
  f.b = cross(f.t, f.n);
  return f;
}

/// t·∇ ln‖v‖, from the exact Jacobian of v.
inline double speed_log_deriv(const VectorFieldSpec& v, const Vec3& p, const FrameOptions& opts = {}) {
  const auto d = detail::tangent_data(v, p, opts);
  double acc = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) acc += d.t[j] * d.v[i] * d.grad_v[i][j];
  return acc / (d.speed * d.speed);
}

/// Frame, helicity densities and ∂_s ln‖v‖ at p. The curls of n and b come
/// from central differences of frame_at; Ω_t uses the exact ∇×t.
inline PointGeometry geometry_at(const VectorFieldSpec& v, const Vec3& p, const FrameOptions& opts = {}) {
  PointGeometry g;
  g.frame = frame_at(v, p, opts);
  g.speed_log_deriv = speed_log_deriv(v, p, opts);

  const auto nb = [&](const Vec3& q) {
    const Frame f = frame_at(v, q, opts);
    return detail::NormalBinormal{f.n, f.b};
  };
  const auto partials = central_partials(nb, p, opts.step_at(p));
  Mat3 jn{}, jb{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      jn[i][j] = partials[j].n[i];
      jb[i][j] = partials[j].b[i];
    }
  }
  const Vec3 curl_n = curl_from_jacobian(jn);
  const Vec3 curl_b = curl_from_jacobian(jb);
  const Frame& f = g.frame;
  g.helicities.omega_t = dot(f.t, f.curl_t);
  g.helicities.omega_n = dot(f.n, curl_n);
  g.helicities.omega_b = dot(f.b, curl_b);
  g.helicities.n_curl_b = dot(f.n, curl_b);
  g.helicities.b_curl_n = dot(f.b, curl_n);
  return g;
}

inline HelicityDensities helicities_at(const VectorFieldSpec& v, const Vec3& p, const FrameOptions& opts = {}) {
  return geometry_at(v, p, opts).helicities;
}

/// The frame vectors as derived field handles (for curls and residuals).
inline DerivedVector frame_field(const VectorFieldSpec& v, int which, const FrameOptions& opts = {}) {
  return DerivedVector(
      [v, which, opts](const Vec3& q) {
        const Frame f = frame_at(v, q, opts);
        return which == 0 ? f.t : (which == 1 ? f.n : f.b);
      },
      opts.fd_step > 0.0 ? std::optional<double>(opts.fd_step) : std::nullopt);
}

}  // namespace bihamil
