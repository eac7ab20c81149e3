#include <gtest/gtest.h>

#include "support.hpp"

using namespace bihamil;
namespace ts = testing_support;

namespace {

double orthonormality_error(const Frame& f) {
  return std::max({std::abs(norm(f.t) - 1), std::abs(norm(f.n) - 1), std::abs(norm(f.b) - 1), std::abs(dot(f.t, f.n)),
                   std::abs(dot(f.t, f.b)), std::abs(dot(f.n, f.b))});
}

DegeneracyKind kind_at(const VectorFieldSpec& v, const Vec3& p) {
  try {
    frame_at(v, p);
  } catch (const DegeneracyError& e) {
    return e.report().kind;
  }
  ADD_FAILURE() << "no degeneracy raised";
  return DegeneracyKind::ZeroVelocity;
}

}  // namespace

TEST(Frame, CircleAtUnitPoint) {
  const Frame f = frame_at(parse_vector("-y, x, 0"), {1, 0, 0});
  EXPECT_LT(norm(f.t - Vec3{0, 1, 0}), 1e-15);
  EXPECT_LT(norm(f.n - Vec3{1, 0, 0}), 1e-15);
  EXPECT_LT(norm(f.b - Vec3{0, 0, -1}), 1e-15);
  EXPECT_DOUBLE_EQ(f.speed, 1.0);
}

TEST(Frame, Degeneracies) {
  EXPECT_EQ(kind_at(parse_vector("1, 0, 0"), {0, 0, 0}), DegeneracyKind::VanishingNormal);
  EXPECT_EQ(kind_at(parse_vector("-y, x, 0"), {0, 0, 0}), DegeneracyKind::ZeroVelocity);
  EXPECT_EQ(kind_at(parse_vector("0, 0, 1 + x^2"), {0.3, 0.1, 0}), DegeneracyKind::VanishingNormal);
  // ∇×t = −t for t = (cos z, sin z, 0).
  EXPECT_EQ(kind_at(parse_vector("cos(z), sin(z), 0"), {0.4, -1, 0.7}), DegeneracyKind::CurlEigenvector);
  // Thresholds are configurable.
  FrameOptions loose;
  loose.eps_v_scale = 10.0;
  EXPECT_THROW(frame_at(parse_vector("-y, x, 0"), {1, 0, 0}, loose), DegeneracyError);
}

TEST(Frame, InvariantsAtRandomPoints) {
  for (const char* src : {"-y, x, 1", "y*z, x*z, x*y", "sin(y) + z, x^2 - z, 1 + x*y"}) {
    const auto v = parse_vector(src);
    for (int k = 0; k < 200; ++k) {
      const Vec3 p = ts::random_point();
      Frame f;
      try {
        f = frame_at(v, p);
      } catch (const DegeneracyError&) {
        continue;
      }
      EXPECT_LT(orthonormality_error(f), 1e-12) << src;
      EXPECT_LT(norm(cross(f.t, f.n) - f.b), 1e-12) << src;
      EXPECT_LT(norm(cross(f.n, f.b) - f.t), 1e-12) << src;
      EXPECT_NEAR(dot(cross(f.t, f.n), f.b), 1.0, 1e-12);
    }
  }
}

TEST(Frame, ConformalRobustness) {
  const auto v = parse_vector("y*z, x*z, x*y");
  for (const char* g : {"2", "1 + x^2", "exp(y - z)", "3 + sin(x*y*z)"}) {
    const auto gv = parse_vector("(" + std::string(g) + ")*(y*z), (" + g + ")*(x*z), (" + g + ")*(x*y)");
    for (int k = 0; k < 20; ++k) {
      const Vec3 p = ts::random_point();
      const Frame a = frame_at(v, p), b = frame_at(gv, p);
      for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(a.t[i], b.t[i], 1e-10);
        EXPECT_NEAR(a.n[i], b.n[i], 1e-10);
        EXPECT_NEAR(a.b[i], b.b[i], 1e-10);
      }
    }
  }
}

// Along a streamline t turns towards −n: ∂_s t = −κn with κ = ‖t×(∇×t)‖.
TEST(Frame, TangentTurnsAlongMinusNormal) {
  const auto v = parse_vector("y*z, x*z, x*y");
  for (int k = 0; k < 30; ++k) {
    const Vec3 p = ts::random_point(0.3, 2);
    const Frame f = frame_at(v, p);
    Vec3 ds;
    for (std::size_t i = 0; i < 3; ++i)
      ds[i] = ts::richardson_derivative([&](double s) { return unit_tangent(v, p + s * f.t)[i]; }, 1e-3);
    EXPECT_LT(norm(ds + f.normal_magnitude * f.n), 1e-8 * (1 + f.normal_magnitude));
  }
}

TEST(Frame, GradientDecomposition) {
  const auto v = parse_vector("-y, x, 1");
  for (int k = 0; k < 5; ++k) {
    const ScalarField f = parse_scalar(ts::random_smooth_scalar());
    const Vec3 p = ts::random_point(0.5, 1.5);
    const Frame fr = frame_at(v, p);
    auto along = [&](const Vec3& d) {
      return ts::richardson_derivative([&](double s) { return value(f, p + s * d); }, 1e-3);
    };
    const Vec3 g = gradient(f, p);
    const Vec3 recomposed = along(fr.t) * fr.t + along(fr.n) * fr.n + along(fr.b) * fr.b;
    EXPECT_LT(norm(recomposed - g), 1e-8 * std::max(1.0, norm(g)));
  }
}

TEST(Helicity, HelicalField) {
  const auto v = parse_vector("-y, x, 1");
  const auto h = helicities_at(v, {1, 0, 0});
  EXPECT_NEAR(h.omega_t, 1.0, 1e-12);
  EXPECT_NEAR(h.omega_n, 0.0, 1e-8);
  EXPECT_NEAR(h.omega_b, 0.0, 1e-8);
  EXPECT_NEAR(h.omega_nb(), 0.0, 1e-8);
  // Ω_t = 2/(r² + 1) off the unit circle.
  const auto h2 = helicities_at(v, {0.5, 1.5, -0.3});
  EXPECT_NEAR(h2.omega_t, 2.0 / (0.25 + 2.25 + 1), 1e-12);
}

TEST(Helicity, CircularFieldAllVanish) {
  const auto h = helicities_at(parse_vector("-y, x, 0"), {1, 0, 0});
  for (double d : {h.omega_t, h.omega_n, h.omega_b, h.n_curl_b, h.b_curl_n}) EXPECT_NEAR(d, 0.0, 1e-8);
}

TEST(Helicity, AgreesWithFourthOrderOracle) {
  for (const char* src : {"y*z, x*z, x*y", "sin(y) + z, x^2 - z, 1 + x*y", "-y + 0.3*z, x, 1 + 0.2*x*y"}) {
    const auto v = parse_vector(src);
    for (int k = 0; k < 20; ++k) {
      const Vec3 p = ts::random_point(0.3, 1.8);
      HelicityDensities a, b;
      try {
        // Near κ = 0 the normal turns like 1/κ and no difference stencil is accurate.
        if (frame_at(v, p).normal_magnitude < 0.05) continue;
        a = helicities_at(v, p);
        b = ts::helicities_oracle(v, p);
      } catch (const DegeneracyError&) {
        continue;
      }
      EXPECT_NEAR(a.omega_n, b.omega_n, 1e-6 * (1 + std::abs(b.omega_n))) << src;
      EXPECT_NEAR(a.omega_b, b.omega_b, 1e-6 * (1 + std::abs(b.omega_b))) << src;
      EXPECT_NEAR(a.n_curl_b, b.n_curl_b, 1e-6 * (1 + std::abs(b.n_curl_b))) << src;
      EXPECT_NEAR(a.b_curl_n, b.b_curl_n, 1e-6 * (1 + std::abs(b.b_curl_n))) << src;
    }
  }
}

// Ω_t through the frame identity ∇×t = Ω_t t − κ b (κ = ‖t×(∇×t)‖).
TEST(Helicity, CurlOfTangentDecomposes) {
  const auto v = parse_vector("y*z, x*z, x*y");
  for (int k = 0; k < 20; ++k) {
    const Vec3 p = ts::random_point(0.3, 2);
    const Frame f = frame_at(v, p);
    const auto h = helicities_at(v, p);
    const Vec3 c = h.omega_t * f.t - f.normal_magnitude * f.b;
    EXPECT_LT(norm(c - f.curl_t), 1e-12 * (1 + norm(f.curl_t)));
    const Vec3 fd = curl(frame_field(v, 0), p);
    EXPECT_LT(norm(fd - f.curl_t), 1e-7 * (1 + norm(f.curl_t)));
  }
}

TEST(Helicity, SpeedLogDerivative) {
  const auto v = parse_vector("y*z, x*z, x*y");
  for (int k = 0; k < 20; ++k) {
    const Vec3 p = ts::random_point(0.3, 2);
    const Vec3 t = unit_tangent(v, p);
    const double fd =
        ts::richardson_derivative([&](double s) { return std::log(norm(evaluate(v, p + s * t))); }, 1e-3);
    EXPECT_NEAR(speed_log_deriv(v, p), fd, 1e-9 * (1 + std::abs(fd)));
  }
}
