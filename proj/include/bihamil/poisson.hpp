#pragma once

// Poisson vectors in 3D and the residuals of their identities: Jacobi
// J·(∇×J) = 0, Hamilton v = J×∇H, compatibility, Nambu form. Also the
// streamline construction of J = α(n + μb) and of a compatible pair.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bihamil/calc3.hpp"
#include "bihamil/error.hpp"
#include "bihamil/expr.hpp"
#include "bihamil/frenet.hpp"
#include "bihamil/riccati.hpp"

namespace bihamil {

/// Skew matrix Ω^{jk} = ½ ε^{jki} J_i of a Poisson vector.
struct PoissonMatrix {
  Mat3 m{};

  static PoissonMatrix from_vector(const Vec3& j) {
    PoissonMatrix p;
    p.m[0][1] = 0.5 * j[2];
    p.m[1][0] = -0.5 * j[2];
    p.m[1][2] = 0.5 * j[0];
    p.m[2][1] = -0.5 * j[0];
    p.m[2][0] = 0.5 * j[1];
    p.m[0][2] = -0.5 * j[1];
    return p;
  }

  /// J_i = ε_ijk Ω^{jk}
  Vec3 to_vector() const { return {m[1][2] - m[2][1], m[2][0] - m[0][2], m[0][1] - m[1][0]}; }

  /// Contraction of dH into the first slot, 2 Ω^{jk} ∂_j H; equals J×∇H.
  Vec3 act(const Vec3& grad_h) const {
    Vec3 r;
    for (std::size_t k = 0; k < 3; ++k)
      r[k] = 2.0 * (m[0][k] * grad_h[0] + m[1][k] * grad_h[1] + m[2][k] * grad_h[2]);
    return r;
  }
};

// ---------------------------------------------------------------------------
// Pointwise residuals
// ---------------------------------------------------------------------------

/// J·(∇×J)
inline double jacobi_residual(const VectorField& j, const Vec3& p) { return dot(value(j, p), curl(j, p)); }

/// J = αn + βb written through the frame.
struct FrameExpansion {
  VectorFieldSpec v;
  ExprAst alpha;
  ExprAst beta;
  FrameOptions frame{};
};

/// (β∇α − α∇β)·t + α²Ω_n + β²Ω_b + αβΩ_nb
inline double jacobi_residual(const FrameExpansion& fe, const Vec3& p) {
  const PointGeometry g = geometry_at(fe.v, p, fe.frame);
  const Jet2 a = eval_jet2(fe.alpha, p);
  const Jet2 b = eval_jet2(fe.beta, p);
  const Vec3 ga{a.gradient[0], a.gradient[1], a.gradient[2]};
  const Vec3 gb{b.gradient[0], b.gradient[1], b.gradient[2]};
  const auto& h = g.helicities;
  return dot(b.value * ga - a.value * gb, g.frame.t) + a.value * a.value * h.omega_n +
         b.value * b.value * h.omega_b + a.value * b.value * h.omega_nb();
}

/// The field αn + βb as a derived handle, for the direct residual.
inline DerivedVector frame_combination(const FrameExpansion& fe) {
  return DerivedVector(
      [fe](const Vec3& q) {
        const Frame f = frame_at(fe.v, q, fe.frame);
        return evaluate(fe.alpha, q) * f.n + evaluate(fe.beta, q) * f.b;
      },
      fe.frame.fd_step > 0.0 ? std::optional<double>(fe.frame.fd_step) : std::nullopt);
}

/// f·J, analytic when J is.
inline VectorField scale_field(const VectorField& j, const ExprAst& f) {
  if (const auto* spec = std::get_if<VectorFieldSpec>(&j))
    return VectorFieldSpec{{f * (*spec)[0], f * (*spec)[1], f * (*spec)[2]}};
  const auto& d = std::get<DerivedVector>(j);
  return DerivedVector([d, f](const Vec3& q) { return evaluate(f, q) * d(q); });
}

struct InvarianceRatio {
  double lhs{0.0};  // jacobi_residual(f·J)
  double rhs{0.0};  // f² jacobi_residual(J)
};

inline InvarianceRatio invariance_ratio(const VectorField& j, const ExprAst& f, const Vec3& p) {
  const double fp = evaluate(f, p);
  if (fp == 0.0) throw InvalidArgument("scaling function vanishes at the point");
  return {jacobi_residual(scale_field(j, f), p), fp * fp * jacobi_residual(j, p)};
}

struct HamiltonResidual {
  Vec3 vec_residual;  // v − J×∇H
  double j_dot_v{0.0};
  double grad_h_dot_v{0.0};
};

inline HamiltonResidual hamilton_residual(const VectorField& j, const ScalarField& h, const VectorFieldSpec& v,
                                          const Vec3& p) {
  const Vec3 vp = evaluate(v, p);
  const Vec3 jp = value(j, p);
  const Vec3 gh = gradient(h, p);
  return {vp - cross(jp, gh), dot(jp, vp), dot(gh, vp)};
}

/// J1·(∇×J2) + J2·(∇×J1); with c, (J1×J2)·∇c − (J1·(∇×J2) + J2·(∇×J1))·c.
inline double compatibility_residual(const VectorField& j1, const VectorField& j2, const Vec3& p,
                                     const std::optional<ScalarField>& c = std::nullopt) {
  const Vec3 a = value(j1, p), b = value(j2, p);
  const double sym = dot(a, curl(j2, p)) + dot(b, curl(j1, p));
  if (!c) return sym;
  return dot(cross(a, b), gradient(*c, p)) - sym * value(*c, p);
}

class DegenerateGradients : public AbortedError {
 public:
  DegenerateGradients(double magnitude, double eps)
      : AbortedError("|grad H1 x grad H2| = " + detail::num(magnitude) + " below " + detail::num(eps)) {}
};

struct NambuResidual {
  double psi{0.0};
  double residual{0.0};
};

/// v against ψ ∇H1×∇H2 with ψ the least-squares factor.
inline NambuResidual nambu_residual(const VectorFieldSpec& v, const ScalarField& h1, const ScalarField& h2,
                                    const Vec3& p, double eps = 1e-10) {
  const Vec3 w = cross(gradient(h1, p), gradient(h2, p));
  const double w2 = dot(w, w);
  if (!(std::sqrt(w2) > eps)) throw DegenerateGradients(std::sqrt(w2), eps);
  const Vec3 vp = evaluate(v, p);
  const double psi = dot(vp, w) / w2;
  return {psi, norm(vp - psi * w)};
}

// ---------------------------------------------------------------------------
// Streamline construction
// ---------------------------------------------------------------------------

enum class TrackKind { Riccati, FrameNormal, FrameBinormal };

inline std::string_view to_string(TrackKind k) {
  switch (k) {
    case TrackKind::Riccati: return "riccati";
    case TrackKind::FrameNormal: return "n";
    case TrackKind::FrameBinormal: return "b";
  }
  return "?";
}

/// A Poisson vector along a streamline. `base.alpha` holds the positive scale
/// of the active chart: α in J = α(n + μb), β in J = β(b − ηn).
struct PoissonTrack {
  TrackKind kind{TrackKind::Riccati};
  RiccatiTrack base;
  std::vector<Vec3> j;
};

/// ∂_s ln‖J‖ for J ∝ q n + p b, p² + q² = 1, honouring the drop flags. In
/// the μ chart it is the rate ∂_s ln α = ∂_s ln‖v‖ − n·(∇×b) − μΩ_b plus the
/// change of the normalization √(1 + μ²).
inline double amplitude_rate(const PointGeometry& g, const ProjectiveMu& m, const RiccatiOptions& opts) {
  const RiccatiCoefficients c = riccati_coefficients(g.helicities, opts);
  return g.speed_log_deriv - g.helicities.n_curl_b + m.p * m.q * (c.omega_n - c.omega_b) + m.p * m.p * c.omega_nb;
}

namespace detail {

inline double initial_log_amplitude(double alpha0, const ProjectiveMu& m0) {
  if (!(alpha0 > 0.0)) throw InvalidArgument("alpha0 must be positive");
  return std::log(alpha0) + 0.5 * std::log1p(m0.coordinate() * m0.coordinate());
}

inline void assemble(PoissonTrack& pt) {
  auto& b = pt.base;
  const std::size_t n = b.streamline.samples.size();
  b.alpha.resize(n);
  pt.j.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ProjectiveMu& m = b.mu_states[i];
    const Frame& f = b.streamline.samples[i].geometry.frame;
    const double rho = std::exp(b.log_amplitude[i]);
    if (m.chart == Chart::Mu) {
      b.alpha[i] = rho * std::abs(m.q);
      pt.j[i] = b.alpha[i] * (f.n + m.mu() * f.b);
    } else {
      b.alpha[i] = rho * std::abs(m.p);
      pt.j[i] = b.alpha[i] * (f.b - m.eta() * f.n);
    }
  }
}

inline PoissonTrack riccati_poisson_track(RiccatiTrack t) {
  PoissonTrack pt{TrackKind::Riccati, std::move(t), {}};
  assemble(pt);
  return pt;
}

}  // namespace detail

/// Fixes the amplitude of each Riccati solution along a shared streamline so
/// that J is a Poisson vector for v.
inline std::vector<PoissonTrack> integrate_alpha_bundle(const VectorFieldSpec& v, const Vec3& seed,
                                                        std::span<const ProjectiveMu> mu0, double s_max,
                                                        std::span<const double> alpha0,
                                                        const RiccatiOptions& opts = {}) {
  if (alpha0.size() != mu0.size()) throw InvalidArgument("one alpha0 per track required");
  std::vector<double> l0;
  for (std::size_t k = 0; k < mu0.size(); ++k) l0.push_back(detail::initial_log_amplitude(alpha0[k], mu0[k]));
  auto rate = [opts](const PointGeometry& g, const ProjectiveMu& m) { return amplitude_rate(g, m, opts); };
  auto tracks = integrate_riccati_bundle(v, seed, mu0, s_max, opts, rate, l0);
  std::vector<PoissonTrack> out;
  for (auto& t : tracks) out.push_back(detail::riccati_poisson_track(std::move(t)));
  return out;
}

/// Re-runs the track's integration with α co-integrated on the same grid.
inline PoissonTrack integrate_alpha(const VectorFieldSpec& v, const RiccatiTrack& track, double alpha0) {
  const double a0[1] = {alpha0};
  return integrate_alpha_bundle(v, track.streamline.seed, std::span<const ProjectiveMu>(&track.initial, 1),
                                track.streamline.s_max, a0, track.options)
      .front();
}

/// J = n (or b) with unit scale on an existing streamline.
inline PoissonTrack frame_track(const Streamline& line, TrackKind kind, const RiccatiOptions& opts = {}) {
  if (kind == TrackKind::Riccati) throw InvalidArgument("frame_track needs a frame kind");
  PoissonTrack pt;
  pt.kind = kind;
  pt.base.streamline = line;
  pt.base.options = opts;
  pt.base.initial = kind == TrackKind::FrameNormal ? ProjectiveMu::from_mu(0.0) : ProjectiveMu::from_eta(0.0);
  pt.base.mu_states.assign(line.samples.size(), pt.base.initial);
  pt.base.log_amplitude.assign(line.samples.size(), 0.0);
  detail::assemble(pt);
  return pt;
}

class MismatchedStreamlines : public InvalidArgument {
 public:
  MismatchedStreamlines() : InvalidArgument("tracks do not share streamline samples") {}
};

struct CompatibilityProfile {
  std::vector<double> residual;  // per sample, NaN where not evaluated
  double max_abs{0.0};
  std::string form;  // which expression was evaluated, for reports
};

namespace detail {

inline bool same_samples(const Streamline& a, const Streamline& b) {
  if (a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    if (a.samples[i].s != b.samples[i].s || !(a.samples[i].x == b.samples[i].x)) return false;
  return true;
}

// Stencil derivative of f at i from samples lo..lo+4.
inline double stencil(std::span<const double> s, std::size_t i, const std::array<double, 5>& f, std::size_t lo) {
  const auto w = fd_weights(s[i], s.subspan(lo, 5));
  double d = 0.0;
  for (std::size_t k = 0; k < 5; ++k) d += w[k] * f[k];
  return d;
}

inline bool window_in(const RiccatiTrack& t, std::size_t lo, Chart c) {
  for (std::size_t k = lo; k < lo + 5; ++k)
    if (t.mu_states[k].chart != c) return false;
  return true;
}

}  // namespace detail

/// Compatibility of two Poisson tracks on shared samples, per interior sample.
///
///   Riccati/Riccati:  ∂_s ln(α2/α1) − (μ1 − μ2)Ω_b  (η chart: ∂_s ln(β2/β1) − (η1 − η2)Ω_n,
///                     mixed charts: the same multiplied through by q1q2)
///   Riccati/b:        ∂_s ln α + Ω_nb
///   Riccati/n:        ∂_s ln β − Ω_nb
///   n/b:              Ω_nb
inline CompatibilityProfile pair_compatibility_residual(const PoissonTrack& t1, const PoissonTrack& t2) {
  if (!detail::same_samples(t1.base.streamline, t2.base.streamline)) throw MismatchedStreamlines();
  const auto& smp = t1.base.streamline.samples;
  const std::size_t n = smp.size();
  CompatibilityProfile out;
  out.residual.assign(n, std::numeric_limits<double>::quiet_NaN());

  const bool frame1 = t1.kind != TrackKind::Riccati, frame2 = t2.kind != TrackKind::Riccati;
  if (frame1 && frame2) {
    if (t1.kind == t2.kind) {
      out.form = "identical";
      std::fill(out.residual.begin(), out.residual.end(), 0.0);
    } else {
      out.form = "omega_nb";
      for (std::size_t i = 0; i < n; ++i) {
        out.residual[i] = smp[i].geometry.helicities.omega_nb();
        out.max_abs = std::max(out.max_abs, std::abs(out.residual[i]));
      }
    }
    return out;
  }
  if (n < 5) return out;
  const std::vector<double> s = t1.base.streamline.arclengths();

  // Riccati track first.
  const PoissonTrack& r = frame1 ? t2 : t1;
  const PoissonTrack& o = frame1 ? t1 : t2;
  const double swap_sign = frame1 ? -1.0 : 1.0;

  for (std::size_t i = 2; i + 2 < n; ++i) {
    const std::size_t lo = i - 2;
    const auto& h = smp[i].geometry.helicities;
    std::array<double, 5> f{};
    double res = 0.0;
    const RiccatiTrack& a = r.base;
    if (o.kind == TrackKind::Riccati) {
      const RiccatiTrack& b = o.base;
      if (detail::window_in(a, lo, Chart::Mu) && detail::window_in(b, lo, Chart::Mu)) {
        for (std::size_t k = 0; k < 5; ++k) f[k] = std::log(b.alpha[lo + k]) - std::log(a.alpha[lo + k]);
        res = detail::stencil(s, i, f, lo) - (a.mu_states[i].mu() - b.mu_states[i].mu()) * h.omega_b;
      } else if (detail::window_in(a, lo, Chart::Eta) && detail::window_in(b, lo, Chart::Eta)) {
        for (std::size_t k = 0; k < 5; ++k) f[k] = std::log(b.alpha[lo + k]) - std::log(a.alpha[lo + k]);
        res = detail::stencil(s, i, f, lo) - (a.mu_states[i].eta() - b.mu_states[i].eta()) * h.omega_n;
      } else {
        std::array<double, 5> qa{}, qb{};
        for (std::size_t k = 0; k < 5; ++k) {
          f[k] = b.log_amplitude[lo + k] - a.log_amplitude[lo + k];
          qa[k] = a.mu_states[lo + k].q;
          qb[k] = b.mu_states[lo + k].q;
        }
        const ProjectiveMu& ma = a.mu_states[i];
        const ProjectiveMu& mb = b.mu_states[i];
        res = ma.q * mb.q * detail::stencil(s, i, f, lo) + ma.q * detail::stencil(s, i, qb, lo) -
              mb.q * detail::stencil(s, i, qa, lo) - (ma.p * mb.q - mb.p * ma.q) * h.omega_b;
      }
      res *= swap_sign;
    } else if (o.kind == TrackKind::FrameBinormal) {
      if (detail::window_in(a, lo, Chart::Mu)) {
        for (std::size_t k = 0; k < 5; ++k) f[k] = std::log(a.alpha[lo + k]);
        res = detail::stencil(s, i, f, lo) + h.omega_nb();
      } else {
        std::array<double, 5> q{};
        for (std::size_t k = 0; k < 5; ++k) {
          f[k] = a.log_amplitude[lo + k];
          q[k] = a.mu_states[lo + k].q;
        }
        const double qi = a.mu_states[i].q;
        res = qi * detail::stencil(s, i, f, lo) + detail::stencil(s, i, q, lo) + qi * h.omega_nb();
      }
    } else {
      if (detail::window_in(a, lo, Chart::Eta)) {
        for (std::size_t k = 0; k < 5; ++k) f[k] = std::log(a.alpha[lo + k]);
        res = detail::stencil(s, i, f, lo) - h.omega_nb();
      } else {
        std::array<double, 5> p{};
        for (std::size_t k = 0; k < 5; ++k) {
          f[k] = a.log_amplitude[lo + k];
          p[k] = a.mu_states[lo + k].p;
        }
        const double pi = a.mu_states[i].p;
        res = pi * detail::stencil(s, i, f, lo) + detail::stencil(s, i, p, lo) - pi * h.omega_nb();
      }
    }
    out.residual[i] = res;
    out.max_abs = std::max(out.max_abs, std::abs(res));
  }
  if (o.kind == TrackKind::Riccati) {
    out.form = "riccati-pair";
  } else {
    out.form = o.kind == TrackKind::FrameBinormal ? "log-alpha+omega_nb" : "log-beta-omega_nb";
  }
  return out;
}

enum class CaseTag { GenericTwoRiccati, OmegaBZero, OmegaNZero, BothZero };

inline std::string_view to_string(CaseTag c) {
  switch (c) {
    case CaseTag::GenericTwoRiccati: return "GenericTwoRiccati";
    case CaseTag::OmegaBZero: return "OmegaBZero";
    case CaseTag::OmegaNZero: return "OmegaNZero";
    case CaseTag::BothZero: return "BothZero";
  }
  return "?";
}

struct ConstructOptions {
  RiccatiOptions riccati;
  double eps_omega{1e-7};
  double mu0_1{0.0};
  double mu0_2{1.0};
  double alpha0{1.0};
};

struct BiHamiltonianResult {
  CaseTag case_tag{CaseTag::BothZero};
  // A measured max |Ω| fell within a factor 10 of eps_omega; such values
  // count as nonzero.
  bool ambiguous{false};
  double max_omega_n{0.0};
  double max_omega_b{0.0};
  double max_omega_nb{0.0};
  PoissonTrack track1, track2;
  CompatibilityProfile compat;
  double compat_residual_max{0.0};
  std::optional<RiccatiResidualSummary> riccati1, riccati2;
};

/// Two compatible Poisson vectors along the streamline through `seed`.
inline BiHamiltonianResult construct_bihamiltonian(const VectorFieldSpec& v, const Vec3& seed, double s_max,
                                                   const ConstructOptions& opts = {}) {
  if (opts.mu0_1 == opts.mu0_2) throw InvalidArgument("the two initial mu values must differ");
  BiHamiltonianResult r;
  const Streamline line = integrate_streamline(v, seed, s_max, opts.riccati);
  for (const auto& smp : line.samples) {
    const auto& h = smp.geometry.helicities;
    r.max_omega_n = std::max(r.max_omega_n, std::abs(h.omega_n));
    r.max_omega_b = std::max(r.max_omega_b, std::abs(h.omega_b));
    r.max_omega_nb = std::max(r.max_omega_nb, std::abs(h.omega_nb()));
  }
  const double eps = opts.eps_omega;
  auto classify = [&](double m) {
    if (m >= eps / 10.0 && m <= eps * 10.0) r.ambiguous = true;
    return m < eps / 10.0;
  };
  const bool small_n = classify(r.max_omega_n);
  const bool small_b = classify(r.max_omega_b);

  if (!small_n && !small_b) {
    r.case_tag = CaseTag::GenericTwoRiccati;
    const ProjectiveMu mu0[2] = {ProjectiveMu::from_mu(opts.mu0_1), ProjectiveMu::from_mu(opts.mu0_2)};
    const double a0[2] = {opts.alpha0, opts.alpha0};
    auto tracks = integrate_alpha_bundle(v, seed, mu0, s_max, a0, opts.riccati);
    r.track1 = std::move(tracks[0]);
    r.track2 = std::move(tracks[1]);
    r.riccati1 = riccati_residual(r.track1.base);
    r.riccati2 = riccati_residual(r.track2.base);
  } else if (small_b && !small_n) {
    r.case_tag = CaseTag::OmegaBZero;
    RiccatiOptions ro = opts.riccati;
    ro.drop_omega_b = true;
    const ProjectiveMu mu0 = ProjectiveMu::from_mu(opts.mu0_1);
    const double a0[1] = {opts.alpha0};
    r.track1 = integrate_alpha_bundle(v, seed, std::span<const ProjectiveMu>(&mu0, 1), s_max, a0, ro).front();
    r.track2 = frame_track(r.track1.base.streamline, TrackKind::FrameBinormal, ro);
    r.riccati1 = riccati_residual(r.track1.base);
  } else if (small_n && !small_b) {
    r.case_tag = CaseTag::OmegaNZero;
    RiccatiOptions ro = opts.riccati;
    ro.drop_omega_n = true;
    const ProjectiveMu eta0 = ProjectiveMu::from_eta(opts.mu0_1);
    const double a0[1] = {opts.alpha0};
    r.track1 = integrate_alpha_bundle(v, seed, std::span<const ProjectiveMu>(&eta0, 1), s_max, a0, ro).front();
    r.track2 = frame_track(r.track1.base.streamline, TrackKind::FrameNormal, ro);
    r.riccati1 = riccati_residual(r.track1.base);
  } else {
    r.case_tag = CaseTag::BothZero;
    r.track1 = frame_track(line, TrackKind::FrameNormal, opts.riccati);
    r.track2 = frame_track(line, TrackKind::FrameBinormal, opts.riccati);
  }
  r.compat = pair_compatibility_residual(r.track1, r.track2);
  r.compat_residual_max = r.compat.max_abs;
  return r;
}

}  // namespace bihamil
