#pragma once

// Streamlines in arclength and the Riccati equation for μ along them.
//
// μ is carried as a point (p : q) of the projective line, μ = p/q and
// η = −q/p = −1/μ. The integrator advances the affine coordinate of the
// active chart,
//
//   MuChart:  ∂_s μ = Ω_n + μ Ω_nb + μ² Ω_b
//   EtaChart: ∂_s η = Ω_b − η Ω_nb + η² Ω_n
//
// and flips chart whenever that coordinate exceeds `chart_switch` in
// magnitude, so poles of μ are ordinary points of the flow.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bihamil/calc3.hpp"
#include "bihamil/error.hpp"
#include "bihamil/expr.hpp"
#include "bihamil/frenet.hpp"
#include "bihamil/ode.hpp"

namespace bihamil {

struct StreamlineSample {
  double s{0.0};
  Vec3 x;
  PointGeometry geometry;  // frame (incl. speed), helicities, ∂_s ln‖v‖
};

struct Streamline {
  Vec3 seed;
  double s_max{0.0};
  std::vector<StreamlineSample> samples;

  std::vector<double> arclengths() const {
    std::vector<double> s;
    s.reserve(samples.size());
    for (const auto& smp : samples) s.push_back(smp.s);
    return s;
  }
};

/// The frame degenerated during an integration. The samples accepted before
/// that point are kept in partial().
class DegenerateFrameEncountered : public DegeneracyError {
 public:
  DegenerateFrameEncountered(double s, const DegeneracyReport& r, Streamline partial)
      : DegeneracyError(r), s_(s), partial_(std::move(partial)) {
    message_ = "degenerate frame encountered at s = " + detail::num(s) + ": " + DegeneracyError::what();
  }

  const char* what() const noexcept override { return message_.c_str(); }
  double s() const noexcept { return s_; }
  const Streamline& partial() const noexcept { return partial_; }

 private:
  double s_;
  Streamline partial_;
  std::string message_;
};

class NoValidChart : public Error {
 public:
  explicit NoValidChart(double s) : Error("projective state left both charts at s = " + detail::num(s)) {}
};

class OmegaBTooSmall : public AbortedError {
 public:
  OmegaBTooSmall(double s, double omega_b, double floor)
      : AbortedError("|Omega_b| = " + detail::num(std::abs(omega_b)) + " below floor " + detail::num(floor) +
                     " at s = " + detail::num(s)),
        s_(s) {}
  double s() const noexcept { return s_; }

 private:
  double s_;
};

enum class Chart { Mu, Eta };

inline std::string_view to_string(Chart c) { return c == Chart::Mu ? "mu" : "eta"; }

/// Homogeneous μ-state with p² + q² = 1.
struct ProjectiveMu {
  double p{0.0};
  double q{1.0};
  Chart chart{Chart::Mu};

  static ProjectiveMu from_mu(double mu) {
    const double r = std::hypot(mu, 1.0);
    return {mu / r, 1.0 / r, Chart::Mu};
  }
  static ProjectiveMu from_eta(double eta) {
    const double r = std::hypot(eta, 1.0);
    return {1.0 / r, -eta / r, Chart::Eta};
  }
  static ProjectiveMu from_coordinate(double w, Chart c) { return c == Chart::Mu ? from_mu(w) : from_eta(w); }

  double mu() const { return q != 0.0 ? p / q : std::numeric_limits<double>::infinity(); }
  double eta() const { return p != 0.0 ? -q / p : std::numeric_limits<double>::infinity(); }
  double coordinate() const { return chart == Chart::Mu ? mu() : eta(); }
  double coordinate(Chart c) const { return c == Chart::Mu ? mu() : eta(); }
};

struct RiccatiOptions {
  IntegratorOptions integrator;
  FrameOptions frame;
  double chart_switch{2.0};
  // Remove the Ω_b (resp. Ω_n) term, leaving the linear equation used when
  // that helicity vanishes along the streamline.
  bool drop_omega_b{false};
  bool drop_omega_n{false};
};

struct RiccatiCoefficients {
  double omega_n{0.0};
  double omega_nb{0.0};
  double omega_b{0.0};
};

inline RiccatiCoefficients riccati_coefficients(const HelicityDensities& h, const RiccatiOptions& opts) {
  return {opts.drop_omega_n ? 0.0 : h.omega_n, h.omega_nb(), opts.drop_omega_b ? 0.0 : h.omega_b};
}

inline double riccati_rhs(const RiccatiCoefficients& c, Chart chart, double w) {
  return chart == Chart::Mu ? c.omega_n + w * c.omega_nb + w * w * c.omega_b
                            : c.omega_b - w * c.omega_nb + w * w * c.omega_n;
}

struct RiccatiTrack {
  Streamline streamline;
  ProjectiveMu initial;
  std::vector<ProjectiveMu> mu_states;  // one per sample; sign of (p, q) kept continuous
  std::vector<double> chart_switches;   // s values
  std::vector<double> log_amplitude;    // ln‖J‖, only when an amplitude rate was co-integrated
  std::vector<double> alpha;            // filled by integrate_alpha
  RiccatiOptions options;
};

/// d(ln‖J‖)/ds for J = ρ(q n + p b), evaluated at stage points.
using AmplitudeRate = std::function<double(const PointGeometry&, const ProjectiveMu&)>;

namespace detail {

inline StreamlineSample make_sample(const VectorFieldSpec& v, double s, const Vec3& x, const FrameOptions& fopts) {
  return {s, x, geometry_at(v, x, fopts)};
}

inline Vec3 state_point(const std::vector<double>& y) { return {y[0], y[1], y[2]}; }

// Runs `body`, converting frame degeneracies into DegenerateFrameEncountered
// that carries the partial streamline.
template <class Body>
void with_partial_track(const Streamline& partial, const double& s_reached, double dir, Body&& body) {
  try {
    body();
  } catch (const DegenerateFrameEncountered&) {
    throw;
  } catch (const DegeneracyError& e) {
    throw DegenerateFrameEncountered(dir * s_reached, e.report(), partial);
  }
}

}  // namespace detail

/// Integrates dx/ds = t(x) from the seed, sampling frame and helicities on
/// the output grid.
inline Streamline integrate_streamline(const VectorFieldSpec& v, const Vec3& seed, double s_max,
                                       const RiccatiOptions& opts = {}) {
  Streamline line;
  line.seed = seed;
  line.s_max = s_max;
  const double dir = opts.integrator.backward ? -1.0 : 1.0;
  double s_reached = 0.0;
  detail::with_partial_track(line, s_reached, dir, [&] {
    (void)geometry_at(v, seed, opts.frame);
    integrate_on_grid(
        [&](double, const std::vector<double>& y, std::vector<double>& dy) {
          const Vec3 t = unit_tangent(v, detail::state_point(y), opts.frame);
          for (std::size_t i = 0; i < 3; ++i) dy[i] = dir * t[i];
        },
        std::vector<double>{seed[0], seed[1], seed[2]}, s_max, opts.integrator,
        [](double, std::vector<double>&) { return false; },
        [&](double s, const std::vector<double>& y) {
          line.samples.push_back(detail::make_sample(v, dir * s, detail::state_point(y), opts.frame));
        },
        s_reached);
  });
  return line;
}

/// Co-integrates several Riccati solutions along one streamline so that they
/// share samples. With `rate`, each track also carries ln‖J‖ starting from
/// log_amplitude0[k].
inline std::vector<RiccatiTrack> integrate_riccati_bundle(const VectorFieldSpec& v, const Vec3& seed,
                                                          std::span<const ProjectiveMu> initial, double s_max,
                                                          const RiccatiOptions& opts = {},
                                                          const AmplitudeRate& rate = nullptr,
                                                          std::span<const double> log_amplitude0 = {}) {
  if (!(opts.chart_switch >= 1.0)) throw InvalidArgument("chart switch threshold must be >= 1");
  const std::size_t m = initial.size();
  const bool with_amp = static_cast<bool>(rate);
  if (with_amp && log_amplitude0.size() != m) throw InvalidArgument("one initial amplitude per track required");
  const double dir = opts.integrator.backward ? -1.0 : 1.0;

  std::vector<Chart> charts(m);
  std::vector<double> y{seed[0], seed[1], seed[2]};
  for (std::size_t k = 0; k < m; ++k) {
    charts[k] = initial[k].chart;
    double w = initial[k].coordinate();
    if (!std::isfinite(w)) throw InvalidArgument("initial projective state is not finite in its chart");
    // Start in the chart where the coordinate is bounded.
    if (std::abs(w) > opts.chart_switch) {
      w = -1.0 / w;
      charts[k] = charts[k] == Chart::Mu ? Chart::Eta : Chart::Mu;
    }
    y.push_back(w);
  }
  if (with_amp)
    for (std::size_t k = 0; k < m; ++k) y.push_back(log_amplitude0[k]);

  std::vector<RiccatiTrack> tracks(m);
  for (std::size_t k = 0; k < m; ++k) {
    tracks[k].initial = initial[k];
    tracks[k].options = opts;
  }
  Streamline line;
  line.seed = seed;
  line.s_max = s_max;

  double s_reached = 0.0;
  detail::with_partial_track(line, s_reached, dir, [&] {
    integrate_on_grid(
        [&](double, const std::vector<double>& st, std::vector<double>& dy) {
          const PointGeometry g = geometry_at(v, detail::state_point(st), opts.frame);
          for (std::size_t i = 0; i < 3; ++i) dy[i] = dir * g.frame.t[i];
          const RiccatiCoefficients c = riccati_coefficients(g.helicities, opts);
          for (std::size_t k = 0; k < m; ++k) {
            const double w = st[3 + k];
            dy[3 + k] = dir * riccati_rhs(c, charts[k], w);
            if (with_amp) dy[3 + m + k] = dir * rate(g, ProjectiveMu::from_coordinate(w, charts[k]));
          }
        },
        y, s_max, opts.integrator,
        [&](double s, std::vector<double>& st) {
          bool changed = false;
          for (std::size_t k = 0; k < m; ++k) {
            double& w = st[3 + k];
            if (!std::isfinite(w)) throw NoValidChart(dir * s);
            if (std::abs(w) > opts.chart_switch) {
              w = -1.0 / w;
              charts[k] = charts[k] == Chart::Mu ? Chart::Eta : Chart::Mu;
              tracks[k].chart_switches.push_back(dir * s);
              changed = true;
            }
          }
          return changed;
        },
        [&](double s, const std::vector<double>& st) {
          line.samples.push_back(detail::make_sample(v, dir * s, detail::state_point(st), opts.frame));
          for (std::size_t k = 0; k < m; ++k) {
            ProjectiveMu pm = ProjectiveMu::from_coordinate(st[3 + k], charts[k]);
            auto& states = tracks[k].mu_states;
            if (!states.empty() && pm.p * states.back().p + pm.q * states.back().q < 0.0) {
              pm.p = -pm.p;
              pm.q = -pm.q;
            }
            states.push_back(pm);
            if (with_amp) tracks[k].log_amplitude.push_back(st[3 + m + k]);
          }
        },
        s_reached);
  });
  for (auto& t : tracks) t.streamline = line;
  return tracks;
}

inline RiccatiTrack integrate_riccati(const VectorFieldSpec& v, const Vec3& seed, const ProjectiveMu& mu0,
                                      double s_max, const RiccatiOptions& opts = {}) {
  return integrate_riccati_bundle(v, seed, std::span<const ProjectiveMu>(&mu0, 1), s_max, opts).front();
}

// ---------------------------------------------------------------------------
// Linear second-order form
//   u'' − (Ω_b'/Ω_b + Ω_nb) u' + Ω_n Ω_b u = 0,   μ = −u' / (Ω_b u)
// ---------------------------------------------------------------------------

struct LinearOptions {
  RiccatiOptions riccati;
  double omega_b_floor{1e-6};  // 0 disables the check
  double eps_u{1e-12};
  double stencil_step{1e-2};   // arclength spacing of the ∂_s Ω_b stencil
};

struct LinearTrack {
  Streamline streamline;
  std::vector<double> u, du;
  std::vector<double> mu_reconstructed;  // NaN where |u| <= eps_u
  std::vector<bool> u_zero_crossing;     // μ has a pole in (s_{i-1}, s_i]
  std::vector<double> d_omega_b;         // ∂_s Ω_b at the samples
};

/// ∂_s Ω_b at x: five-point stencil along the tangent line through x,
/// which has the same first derivative as the streamline.
inline double omega_b_arclength_derivative(const VectorFieldSpec& v, const Vec3& x, const Vec3& t, double step,
                                           const FrameOptions& fopts) {
  return five_point_line_derivative(
      [&](double sigma) { return helicities_at(v, x + sigma * t, fopts).omega_b; }, step);
}

inline LinearTrack integrate_linear_pair(const VectorFieldSpec& v, const Vec3& seed, double u0, double du0,
                                         double s_max, const LinearOptions& opts = {}) {
  const RiccatiOptions& ro = opts.riccati;
  const double dir = ro.integrator.backward ? -1.0 : 1.0;
  LinearTrack track;
  track.streamline.seed = seed;
  track.streamline.s_max = s_max;

  struct Coeffs {
    PointGeometry g;
    double d_omega_b;
    double damping;  // Ω_b'/Ω_b + Ω_nb
    double stiffness;  // Ω_n Ω_b
  };
  auto coeffs = [&](double s, const Vec3& x) {
    Coeffs c{geometry_at(v, x, ro.frame), 0.0, 0.0, 0.0};
    const auto& h = c.g.helicities;
    if (opts.omega_b_floor > 0.0 && !(std::abs(h.omega_b) >= opts.omega_b_floor))
      throw OmegaBTooSmall(dir * s, h.omega_b, opts.omega_b_floor);
    c.d_omega_b = dir * omega_b_arclength_derivative(v, x, c.g.frame.t, opts.stencil_step, ro.frame);
    c.damping = (c.d_omega_b == 0.0 ? 0.0 : c.d_omega_b / h.omega_b) + h.omega_nb();
    c.stiffness = h.omega_n * h.omega_b;
    return c;
  };

  double s_reached = 0.0;
  detail::with_partial_track(track.streamline, s_reached, dir, [&] {
    integrate_on_grid(
        [&](double s, const std::vector<double>& y, std::vector<double>& dy) {
          const Coeffs c = coeffs(s, detail::state_point(y));
          const double up = y[4];
          const double upp = c.damping * up - c.stiffness * y[3];
          for (std::size_t i = 0; i < 3; ++i) dy[i] = dir * c.g.frame.t[i];
          dy[3] = dir * up;
          dy[4] = dir * upp;
        },
        std::vector<double>{seed[0], seed[1], seed[2], u0, du0}, s_max, ro.integrator,
        [](double, std::vector<double>&) { return false; },
        [&](double s, const std::vector<double>& y) {
          const Vec3 x = detail::state_point(y);
          const Coeffs c = coeffs(s, x);
          track.streamline.samples.push_back({dir * s, x, c.g});
          const double u = y[3], du = y[4];
          track.u.push_back(u);
          track.du.push_back(du);
          track.d_omega_b.push_back(c.d_omega_b);
          const double ob = c.g.helicities.omega_b;
          track.mu_reconstructed.push_back(std::abs(u) > opts.eps_u && ob != 0.0
                                               ? -(du / u) / ob
                                               : std::numeric_limits<double>::quiet_NaN());
          const bool crossed = std::abs(u) <= opts.eps_u ||
                               (track.u.size() > 1 && std::signbit(u) != std::signbit(track.u[track.u.size() - 2]));
          track.u_zero_crossing.push_back(crossed);
        },
        s_reached);
  });
  return track;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct RiccatiResidualSummary {
  std::vector<double> residual;  // per sample, NaN where not evaluated
  double max_abs{0.0};
  double worst_ratio{0.0};  // max |residual| / max(1e-6, 1e-4·|RHS|)
  std::size_t checked{0};
};

/// Five-point estimate of ∂_s (chart coordinate) minus the Riccati RHS at
/// interior samples, in the chart active at each sample.
inline RiccatiResidualSummary riccati_residual(const RiccatiTrack& track) {
  const auto& smp = track.streamline.samples;
  const std::size_t n = smp.size();
  RiccatiResidualSummary out;
  out.residual.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (n < 5) return out;
  const std::vector<double> s = track.streamline.arclengths();
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const Chart chart = track.mu_states[i].chart;
    double w[5];
    bool ok = true;
    for (std::size_t k = 0; k < 5; ++k) {
      w[k] = track.mu_states[i - 2 + k].coordinate(chart);
      if (!std::isfinite(w[k]) || std::abs(w[k]) > 1e6) ok = false;
    }
    if (!ok) continue;
    const auto wts = fd_weights(s[i], std::span<const double>(s).subspan(i - 2, 5));
    double deriv = 0.0;
    for (std::size_t k = 0; k < 5; ++k) deriv += wts[k] * w[k];
    const double rhs = riccati_rhs(riccati_coefficients(smp[i].geometry.helicities, track.options), chart, w[2]);
    const double r = deriv - rhs;
    out.residual[i] = r;
    out.max_abs = std::max(out.max_abs, std::abs(r));
    out.worst_ratio = std::max(out.worst_ratio, std::abs(r) / std::max(1e-6, 1e-4 * std::abs(rhs)));
    ++out.checked;
  }
  return out;
}

/// Cross-ratio of four projective points, (a,c)(b,d) / ((a,d)(b,c)) with
/// (i,j) = p_i q_j − p_j q_i; chart independent.
inline double cross_ratio(const ProjectiveMu& a, const ProjectiveMu& b, const ProjectiveMu& c, const ProjectiveMu& d) {
  auto br = [](const ProjectiveMu& i, const ProjectiveMu& j) { return i.p * j.q - j.p * i.q; };
  return br(a, c) * br(b, d) / (br(a, d) * br(b, c));
}

/// max_s |CR(s) − CR(0)| over four tracks sharing one streamline.
inline double cross_ratio_drift(std::span<const RiccatiTrack> tracks) {
  if (tracks.size() != 4) throw InvalidArgument("cross-ratio needs exactly four tracks");
  const std::size_t n = tracks[0].mu_states.size();
  auto at = [&](std::size_t i) {
    return cross_ratio(tracks[0].mu_states[i], tracks[1].mu_states[i], tracks[2].mu_states[i], tracks[3].mu_states[i]);
  };
  const double cr0 = at(0);
  double drift = 0.0;
  for (std::size_t i = 1; i < n; ++i) drift = std::max(drift, std::abs(at(i) - cr0));
  return drift;
}

}  // namespace bihamil
