#include <gtest/gtest.h>

#include <optional>

#include "support.hpp"

using namespace bihamil;
namespace ts = testing_support;

namespace {

Jet2 fd_jet(const ExprAst& e, const Vec3& p, double h = 1e-5) {
  Jet2 j;
  j.value = evaluate(e, p);
  auto f = [&](double dx, double dy, double dz) { return evaluate(e, {p[0] + dx, p[1] + dy, p[2] + dz}); };
  auto unit = [&](std::size_t i, double s) {
    Vec3 d;
    d[i] = s;
    return d;
  };
  for (std::size_t i = 0; i < 3; ++i) {
    const Vec3 a = unit(i, h);
    j.gradient[i] = (f(a[0], a[1], a[2]) - f(-a[0], -a[1], -a[2])) / (2 * h);
  }
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = i; k < 3; ++k) {
      const Vec3 a = unit(i, h), b = unit(k, h);
      const Vec3 pp = a + b, pm = a - b;
      j.upper[Jet2::slot(i, k)] =
          (f(pp[0], pp[1], pp[2]) - f(pm[0], pm[1], pm[2]) - f(-pm[0], -pm[1], -pm[2]) + f(-pp[0], -pp[1], -pp[2])) /
          (4 * h * h);
    }
  return j;
}

}  // namespace

TEST(Parse, EulerTopField) {
  const auto v = parse_vector("y*z, x*z, x*y");
  const Vec3 p{1, 2, 3};
  const Vec3 val = evaluate(v, p);
  EXPECT_EQ(val, (Vec3{6, 3, 2}));
  // v = ∇H1 × ∇H2 with H1 = (x²−y²)/2, H2 = (y²−z²)/2.
  for (int k = 0; k < 20; ++k) {
    const Vec3 q = ts::random_point();
    const Vec3 w = cross(Vec3{q[0], -q[1], 0}, Vec3{0, q[1], -q[2]});
    EXPECT_NEAR(norm(evaluate(v, q) - w), 0.0, 1e-14);
  }
}

TEST(Parse, ZeroConstant) {
  const auto e = parse_scalar("0");
  EXPECT_TRUE(e.is_constant());
  EXPECT_EQ(evaluate(e, {1, 2, 3}), 0.0);
  const auto v = parse_field("0", Arity::Scalar);
  EXPECT_TRUE(std::holds_alternative<ExprAst>(v));
}

TEST(Parse, TrailingOperatorReportsOffset) {
  try {
    parse_scalar("x +");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 3u);
    EXPECT_NE(e.detail().find("expected"), std::string::npos);
  }
}

TEST(Parse, Errors) {
  EXPECT_THROW(parse_scalar("x^y"), ParseError);
  EXPECT_THROW(parse_scalar("w + 1"), ParseError);
  EXPECT_THROW(parse_scalar("sin x"), ParseError);
  EXPECT_THROW(parse_scalar("(x"), ParseError);
  EXPECT_THROW(parse_scalar("x y"), ParseError);
  EXPECT_THROW(parse_vector("x, y"), ParseError);
  EXPECT_THROW(parse_vector("x, y, z, 1"), ParseError);
  EXPECT_THROW(parse_scalar(""), ParseError);
  try {
    parse_scalar("1 + foo(x)");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
    EXPECT_NE(e.detail().find("sin"), std::string::npos);
  }
}

TEST(Parse, PrecedenceAndAssociativity) {
  const Vec3 p{2, 3, 0.5};
  EXPECT_DOUBLE_EQ(evaluate(parse_scalar("-x^2"), p), -4.0);
  EXPECT_DOUBLE_EQ(evaluate(parse_scalar("2^3^2"), p), 512.0);
  EXPECT_DOUBLE_EQ(evaluate(parse_scalar("x - y - 1"), p), -2.0);
  EXPECT_DOUBLE_EQ(evaluate(parse_scalar("x / y / 2"), p), 2.0 / 3.0 / 2.0);
  EXPECT_DOUBLE_EQ(evaluate(parse_scalar("x + y * z"), p), 3.5);
  EXPECT_DOUBLE_EQ(evaluate(parse_scalar("x^-1"), p), 0.5);
  EXPECT_DOUBLE_EQ(evaluate(parse_scalar("2*pi"), p), 2 * std::numbers::pi);
  EXPECT_DOUBLE_EQ(evaluate(parse_scalar("1e-1 + 2.5E1"), p), 25.1);
}

TEST(Parse, PrintParseFixpoint) {
  for (int k = 0; k < 300; ++k) {
    const std::string src = ts::random_expression(4);
    const ExprAst a = parse_scalar(src);
    const ExprAst b = parse_scalar(a.to_string());
    EXPECT_EQ(a, b) << src << " -> " << a.to_string();
    EXPECT_EQ(b.to_string(), a.to_string());
    const Vec3 p = ts::random_point(-1, 1);
    // Random trees may leave the domain (exp overflow); then both must fail.
    std::optional<double> va, vb;
    try {
      va = evaluate(a, p);
    } catch (const DomainError&) {
    }
    try {
      vb = evaluate(b, p);
    } catch (const DomainError&) {
    }
    EXPECT_EQ(va, vb) << src;
  }
}

TEST(Eval, BitIdenticalRepeats) {
  const auto e = parse_scalar("sin(x*y) + exp(z)/(1 + x^2) - tanh(y)^3");
  const Vec3 p{0.3, -1.2, 0.7};
  const Jet2 a = eval_jet2(e, p), b = eval_jet2(e, p);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.gradient, b.gradient);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_EQ(evaluate(e, p), a.value);
}

TEST(Jet, MonomialExample) {
  const Jet2 j = eval_jet2(parse_scalar("x^2*y"), {1, 1, 1});
  EXPECT_DOUBLE_EQ(j.value, 1.0);
  EXPECT_EQ(j.gradient, (Vec3{2, 1, 0}));
  const Mat3 expect{{{2, 2, 0}, {2, 0, 0}, {0, 0, 0}}};
  EXPECT_EQ(j.hessian(), expect);
  const Jet2 fd = fd_jet(parse_scalar("x^2*y"), {1, 1, 1});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(j.gradient[i], fd.gradient[i], 1e-8);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(j.hessian(i, k), fd.hessian(i, k), 1e-5);
  }
}

TEST(Jet, TrivialCases) {
  const Jet2 a = eval_jet2(parse_scalar("x"), {5, 0, 0});
  EXPECT_EQ(a.value, 5.0);
  EXPECT_EQ(a.gradient, (Vec3{1, 0, 0}));
  for (double h : a.upper) EXPECT_EQ(h, 0.0);
  const Jet2 b = eval_jet2(parse_scalar("y*z"), {1, 2, 3});
  EXPECT_EQ(b.value, 6.0);
  EXPECT_EQ(b.gradient, (Vec3{0, 3, 2}));
}

// Polynomials: exact term-wise derivatives as the oracle.
TEST(Jet, RandomPolynomialsMatchTermwiseCalculus) {
  for (int k = 0; k < 200; ++k) {
    const ts::Poly p = ts::Poly::random(4, 5);
    const ExprAst e = parse_scalar(p.dsl());
    const Vec3 q = ts::random_point();
    const Jet2 j = eval_jet2(e, q);
    const double scale = 1.0 + std::abs(p(q));
    EXPECT_NEAR(j.value, p(q), 1e-12 * scale);
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(j.gradient[i], p.d(i)(q), 1e-11 * (1 + std::abs(p.d(i)(q)))) << p.dsl();
      for (int m = 0; m < 3; ++m)
        EXPECT_NEAR(j.hessian(i, m), p.d(i).d(m)(q), 1e-11 * (1 + std::abs(p.d(i).d(m)(q)))) << p.dsl();
    }
  }
}

// Transcendental expressions: central differences as the oracle.
TEST(Jet, SmoothExpressionsMatchFiniteDifferences) {
  for (int k = 0; k < 50; ++k) {
    const ExprAst e = parse_scalar(ts::random_smooth_scalar());
    const Vec3 q = ts::random_point(-1, 1);
    const Jet2 j = eval_jet2(e, q);
    const Jet2 fd = fd_jet(e, q);
    const double s = 1.0 + std::abs(j.value);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(j.gradient[i], fd.gradient[i], 1e-7 * s) << e.to_string();
      for (std::size_t m = 0; m < 3; ++m) EXPECT_NEAR(j.hessian(i, m), fd.hessian(i, m), 1e-4 * s) << e.to_string();
    }
  }
}

TEST(Jet, EveryFunctionAgainstFiniteDifferences) {
  for (const char* src : {"sin(x*y)", "cos(x+z)", "tan(0.3*x)", "exp(y-z)", "ln(2+x^2)", "sqrt(1+y^2)",
                          "tanh(x*z)", "abs(x-3)", "(1+x^2)^-1.5", "x/(2+y^2)"}) {
    const ExprAst e = parse_scalar(src);
    const Vec3 q{0.4, -0.7, 1.1};
    const Jet2 j = eval_jet2(e, q), fd = fd_jet(e, q);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(j.gradient[i], fd.gradient[i], 1e-8) << src;
      for (std::size_t m = 0; m < 3; ++m) EXPECT_NEAR(j.hessian(i, m), fd.hessian(i, m), 1e-4) << src;
    }
  }
}

TEST(Jet, HessianSymmetric) {
  const ExprAst e = parse_scalar("sin(x*y*z) + x^3*y - exp(x*z)");
  const Mat3 h = eval_jet2(e, {0.2, 0.5, -0.9}).hessian();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(h[i][k], h[k][i]);
}

TEST(Eval, DomainErrorsNameTheNode) {
  try {
    evaluate(parse_scalar("1 + sqrt(x - 2)"), {1, 0, 0});
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(e.node().find("sqrt"), std::string::npos);
  }
  EXPECT_THROW(evaluate(parse_scalar("ln(x)"), {0, 0, 0}), DomainError);
  EXPECT_THROW(evaluate(parse_scalar("1/x"), {0, 0, 0}), DomainError);
  EXPECT_THROW(eval_jet2(parse_scalar("ln(-1 - y^2)"), {0, 0, 0}), DomainError);
  EXPECT_THROW(evaluate(parse_scalar("exp(x)"), {1000, 0, 0}), DomainError);
}

TEST(Differentiate, MatchesJetGradient) {
  int checked = 0;
  for (int k = 0; k < 60; ++k) {
    const ExprAst e = parse_scalar(k % 2 ? ts::random_smooth_scalar() : ts::random_expression(3));
    const Vec3 q = ts::random_point(-1, 1);
    const VectorFieldSpec g = gradient_field(e);
    Jet2 j;
    std::array<Jet2, 3> gj;
    // Skip overflow and kinks of abs, where one side legitimately fails.
    try {
      j = eval_jet2(e, q);
      gj = eval_jet2(g, q);
    } catch (const DomainError&) {
      continue;
    }
    ++checked;
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(gj[i].value, j.gradient[i], 1e-10 * (1 + std::abs(j.gradient[i]))) << e.to_string();
      for (std::size_t m = 0; m < 3; ++m)
        EXPECT_NEAR(gj[i].gradient[m], j.hessian(i, m), 1e-9 * (1 + std::abs(j.hessian(i, m)))) << e.to_string();
    }
  }
  EXPECT_GT(checked, 45);
}
