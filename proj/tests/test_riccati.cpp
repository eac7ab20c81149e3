#include <gtest/gtest.h>

#include "support.hpp"

using namespace bihamil;
namespace ts = testing_support;

namespace {

const VectorFieldSpec kEuler = parse_vector("y*z, x*z, x*y");
const VectorFieldSpec kCircular = parse_vector("-y, x, 0");
const VectorFieldSpec kHelical = parse_vector("-y, x, 1");

}  // namespace

TEST(Streamline, CircleCloses) {
  const auto line = integrate_streamline(kCircular, {1, 0, 0}, 2 * std::numbers::pi);
  EXPECT_LT(norm(line.samples.back().x - Vec3{1, 0, 0}), 1e-6);
  EXPECT_DOUBLE_EQ(line.samples.back().s, 2 * std::numbers::pi);
}

TEST(Streamline, HelixReturnsOverSeed) {
  const double smax = std::sqrt(2.0) * 2 * std::numbers::pi;
  const auto line = integrate_streamline(kHelical, {1, 0, 0}, smax);
  const Vec3 end = line.samples.back().x;
  EXPECT_NEAR(end[0], 1.0, 1e-6);
  EXPECT_NEAR(end[1], 0.0, 1e-6);
  EXPECT_NEAR(end[2], 2 * std::numbers::pi, 1e-6);
}

TEST(Streamline, StraightFlowFailsAtSeed) {
  try {
    integrate_streamline(parse_vector("0, 0, 1 + x^2"), {0.5, 0.2, 0}, 1.0);
    FAIL();
  } catch (const DegenerateFrameEncountered& e) {
    EXPECT_EQ(e.report().kind, DegeneracyKind::VanishingNormal);
    EXPECT_EQ(e.s(), 0.0);
    EXPECT_TRUE(e.partial().samples.empty());
  }
}

TEST(Streamline, DegeneracyMidTrackKeepsPartialSamples) {
  // t = (cos z, sin z, 0) + small z-drift becomes Beltrami-aligned as the drift dies out.
  const auto v = parse_vector("-y, x, 1 - z");
  try {
    integrate_streamline(v, {1, 0, 0}, 40.0);
  } catch (const DegenerateFrameEncountered& e) {
    EXPECT_GT(e.s(), 0.0);
    EXPECT_FALSE(e.partial().samples.empty());
    return;
  }
}

TEST(Streamline, Invariants) {
  RiccatiOptions o;
  const double smax = 3.0;
  const auto line = integrate_streamline(kEuler, {1, 2, 3}, smax, o);
  const double hmax = o.integrator.effective_max_step(smax);
  for (std::size_t i = 1; i < line.samples.size(); ++i) {
    const auto& a = line.samples[i - 1];
    const auto& b = line.samples[i];
    const double ds = b.s - a.s;
    EXPECT_GT(ds, 0.0);
    EXPECT_LE(ds, hmax + 1e-15);
    EXPECT_LE(norm(b.x - a.x), ds * (1 + 1e-9));
    const Frame& f = b.geometry.frame;
    EXPECT_LT(std::abs(dot(f.t, f.n)) + std::abs(dot(f.n, f.b)) + std::abs(norm(f.b) - 1), 1e-12);
  }
}

TEST(Streamline, BackwardRetracesForward) {
  RiccatiOptions o;
  const auto fwd = integrate_streamline(kEuler, {1, 2, 3}, 1.0, o);
  o.integrator.backward = true;
  const auto back = integrate_streamline(kEuler, fwd.samples.back().x, 1.0, o);
  EXPECT_LT(norm(back.samples.back().x - Vec3{1, 2, 3}), 1e-7);
  EXPECT_LT(back.samples.back().s, 0.0);
}

TEST(Riccati, ConstantWhenHelicitiesVanish) {
  const auto t = integrate_riccati(kCircular, {1, 0, 0}, ProjectiveMu::from_mu(0.7), 2 * std::numbers::pi);
  for (const auto& m : t.mu_states) EXPECT_NEAR(m.mu(), 0.7, 1e-10);
  EXPECT_LT(riccati_residual(t).max_abs, 1e-10);
  const auto z = integrate_riccati(kCircular, {1, 0, 0}, ProjectiveMu::from_mu(0.0), 2 * std::numbers::pi);
  for (const auto& m : z.mu_states) EXPECT_NEAR(m.mu(), 0.0, 1e-12);
}

TEST(Riccati, ProjectiveStateIsNormalizedAndChartsAgree) {
  const ProjectiveMu init[3] = {ProjectiveMu::from_mu(-2.0), ProjectiveMu::from_eta(0.1), ProjectiveMu::from_mu(3.0)};
  const auto tracks = integrate_riccati_bundle(kEuler, {1, 2, 3}, init, 3.0);
  for (const auto& t : tracks) {
    for (const auto& m : t.mu_states) {
      EXPECT_NEAR(m.p * m.p + m.q * m.q, 1.0, 1e-14);
      if (m.p != 0 && m.q != 0) {
        EXPECT_NEAR(m.mu() * m.eta(), -1.0, 1e-9);
      }
      EXPECT_LE(std::abs(m.coordinate()), 2.0 + 1e-12);
    }
  }
  EXPECT_FALSE(tracks[0].chart_switches.empty());
  // A seed value outside the threshold starts in the other chart.
  EXPECT_EQ(tracks[2].mu_states.front().chart, Chart::Eta);
  EXPECT_NEAR(tracks[2].mu_states.front().mu(), 3.0, 1e-15);
}

// Fixed-step RK4 on (x, μ) as an independent solution of the Riccati equation.
TEST(Riccati, MatchesFixedStepOracle) {
  const double smax = 2.0, h = 0.005;
  const auto t = integrate_riccati(kEuler, {1, 2, 3}, ProjectiveMu::from_mu(0.0), smax);
  const auto ref = ts::rk4(
      [](const std::vector<double>& y) {
        const Vec3 x{y[0], y[1], y[2]};
        const auto g = geometry_at(kEuler, x);
        const auto& hh = g.helicities;
        return std::vector<double>{g.frame.t[0], g.frame.t[1], g.frame.t[2],
                                   hh.omega_n + y[3] * hh.omega_nb() + y[3] * y[3] * hh.omega_b};
      },
      {1, 2, 3, 0.0}, h, static_cast<int>(smax / h + 0.5), 4);
  ASSERT_EQ(ref.size(), t.mu_states.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(t.mu_states[i].mu(), ref[i][3], 1e-8);
    EXPECT_LT(norm(t.streamline.samples[i].x - Vec3{ref[i][0], ref[i][1], ref[i][2]}), 1e-8);
  }
}

TEST(Riccati, ResidualSmallOnGenericField) {
  const ProjectiveMu init[3] = {ProjectiveMu::from_mu(0), ProjectiveMu::from_mu(1), ProjectiveMu::from_mu(5)};
  for (const auto& t : integrate_riccati_bundle(kEuler, {1, 2, 3}, init, 2.0)) {
    const auto r = riccati_residual(t);
    EXPECT_GT(r.checked, 90u);
    EXPECT_LT(r.worst_ratio, 1.0);
  }
}

TEST(Riccati, ChartThresholdDoesNotChangeSolution) {
  for (double mu0 : {0.0, 1.5, -2.0, -4.0}) {
    RiccatiOptions a, b;
    b.chart_switch = 1.0;
    const auto ta = integrate_riccati(kEuler, {1, 2, 3}, ProjectiveMu::from_mu(mu0), 2.0, a);
    const auto tb = integrate_riccati(kEuler, {1, 2, 3}, ProjectiveMu::from_mu(mu0), 2.0, b);
    const ProjectiveMu ma = ta.mu_states.back(), mb = tb.mu_states.back();
    // Compare in the better-conditioned chart.
    const Chart c = std::abs(ma.mu()) <= 1 ? Chart::Mu : Chart::Eta;
    EXPECT_LT(std::abs(ma.coordinate(c) - mb.coordinate(c)), 1e-8) << mu0;
  }
  EXPECT_THROW(integrate_riccati(kEuler, {1, 2, 3}, ProjectiveMu::from_mu(0), 1.0,
                                 [] {
                                   RiccatiOptions o;
                                   o.chart_switch = 0.5;
                                   return o;
                                 }()),
               InvalidArgument);
}

TEST(Riccati, CrossRatioConserved) {
  const ProjectiveMu init[4] = {ProjectiveMu::from_mu(0), ProjectiveMu::from_mu(1), ProjectiveMu::from_mu(-0.5),
                                ProjectiveMu::from_mu(3)};
  const auto tracks = integrate_riccati_bundle(kEuler, {1, 2, 3}, init, 2.0);
  EXPECT_LT(cross_ratio_drift(tracks), 1e-6);
  EXPECT_NEAR(cross_ratio(init[0], init[1], init[2], init[3]), (0 - (-0.5)) * (1 - 3) / ((0 - 3) * (1 - (-0.5))),
              1e-14);
}

TEST(Linear, CircularFieldIsStraightLine) {
  LinearOptions o;
  o.omega_b_floor = 0.0;
  const auto t = integrate_linear_pair(kCircular, {1, 0, 0}, 0.5, 0.25, 6.0, o);
  for (std::size_t i = 0; i < t.u.size(); ++i) {
    const double s = t.streamline.samples[i].s;
    EXPECT_NEAR(t.u[i], 0.5 + 0.25 * s, 1e-9);
  }
  const auto one = integrate_linear_pair(kCircular, {1, 0, 0}, 1.0, 0.0, 6.0, o);
  for (std::size_t i = 0; i < one.u.size(); ++i) {
    EXPECT_NEAR(one.u[i], 1.0, 1e-9);
    if (std::isfinite(one.mu_reconstructed[i])) {
      EXPECT_NEAR(one.mu_reconstructed[i], 0.0, 1e-9);
    }
  }
}

TEST(Linear, FloorIsEnforced) {
  try {
    integrate_linear_pair(kHelical, {1, 0, 0}, 1.0, 0.0, 8.0);
    FAIL();
  } catch (const OmegaBTooSmall& e) {
    EXPECT_EQ(e.s(), 0.0);
  }
}

TEST(Linear, ReconstructionMatchesRiccati) {
  const double smax = 2.0;
  // μ(0) = −u'(0)/(Ω_b(0) u(0)).
  for (double mu0 : {0.0, 0.4}) {
    const double ob0 = helicities_at(kEuler, {1, 2, 3}).omega_b;
    const auto lt = integrate_linear_pair(kEuler, {1, 2, 3}, 1.0, -mu0 * ob0, smax);
    const auto rt = integrate_riccati(kEuler, {1, 2, 3}, ProjectiveMu::from_mu(mu0), smax);
    ASSERT_EQ(lt.u.size(), rt.mu_states.size());
    std::size_t compared = 0;
    for (std::size_t i = 0; i < lt.u.size(); ++i) {
      if (!std::isfinite(lt.mu_reconstructed[i])) continue;
      EXPECT_NEAR(lt.mu_reconstructed[i], rt.mu_states[i].mu(), 1e-6);
      ++compared;
    }
    EXPECT_GT(compared, 90u);
  }
}

// u(0) = 0 puts μ at infinity, i.e. η(0) = 0.
TEST(Linear, SecondSolutionStartsAtPole) {
  const double smax = 2.0;
  const auto lt = integrate_linear_pair(kEuler, {1, 2, 3}, 0.0, 1.0, smax);
  EXPECT_TRUE(lt.u_zero_crossing.front());
  EXPECT_TRUE(std::isnan(lt.mu_reconstructed.front()));
  const auto rt = integrate_riccati(kEuler, {1, 2, 3}, ProjectiveMu::from_eta(0.0), smax);
  ASSERT_EQ(lt.u.size(), rt.mu_states.size());
  std::size_t compared = 0;
  for (std::size_t i = 0; i < lt.u.size(); ++i) {
    if (!std::isfinite(lt.mu_reconstructed[i])) continue;
    const double mu = lt.mu_reconstructed[i];
    const ProjectiveMu& r = rt.mu_states[i];
    if (std::abs(mu) <= 1)
      EXPECT_NEAR(mu, r.mu(), 1e-6);
    else
      EXPECT_NEAR(-1.0 / mu, r.eta(), 1e-6);
    ++compared;
  }
  EXPECT_GT(compared, 90u);
  const auto first = integrate_linear_pair(kEuler, {1, 2, 3}, 1.0, 0.0, smax);
  EXPECT_GT(std::abs(first.mu_reconstructed.back() - lt.mu_reconstructed.back()), 0.1);
}
