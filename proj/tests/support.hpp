#pragma once

// Test-only oracles and generators. Nothing here calls the library's
// differentiation code: polynomials are differentiated term by term, ODEs are
// integrated with a fixed-step RK4, derivatives of arbitrary callables come
// from Richardson-extrapolated central differences.

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bihamil/bihamil.hpp"

namespace testing_support {

using bihamil::Vec3;

inline std::mt19937_64& rng(std::uint64_t seed = 0) {
  static std::mt19937_64 g(0x5eed1234u);
  if (seed) g.seed(seed);
  return g;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }
inline int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng()); }

inline Vec3 random_point(double lo = -2.0, double hi = 2.0) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  std::string s = os.str();
  return v < 0 ? "(" + s + ")" : s;
}

/// Sparse polynomial in x, y, z with exact term-wise calculus.
struct Poly {
  std::map<std::array<int, 3>, double> terms;

  static Poly random(int max_degree, int n_terms) {
    Poly p;
    for (int k = 0; k < n_terms; ++k) {
      std::array<int, 3> e{};
      int budget = uniform_int(0, max_degree);
      for (int i = 0; i < 3 && budget > 0; ++i) {
        e[i] = uniform_int(0, budget);
        budget -= e[i];
      }
      p.terms[e] += std::round(uniform(-3.0, 3.0) * 4.0) / 4.0;
    }
    return p;
  }

  double operator()(const Vec3& p) const {
    double s = 0.0;
    for (const auto& [e, c] : terms) s += c * std::pow(p[0], e[0]) * std::pow(p[1], e[1]) * std::pow(p[2], e[2]);
    return s;
  }

  Poly d(int var) const {
    Poly r;
    for (const auto& [e, c] : terms) {
      if (e[var] == 0) continue;
      auto f = e;
      f[var] -= 1;
      r.terms[f] += c * e[var];
    }
    return r;
  }

  std::string dsl() const {
    if (terms.empty()) return "0";
    std::string s;
    for (const auto& [e, c] : terms) {
      if (!s.empty()) s += " + ";
      s += num(c);
      const char* v = "xyz";
      for (int i = 0; i < 3; ++i)
        if (e[i] > 0) s += std::string("*") + v[i] + (e[i] > 1 ? "^" + std::to_string(e[i]) : "");
    }
    return s;
  }
};

/// Random smooth scalar with no domain restrictions on R³.
inline std::string random_smooth_scalar() {
  static const char* wraps[] = {"sin", "cos", "tanh", "exp"};
  std::string s = Poly::random(3, 3).dsl();
  const int n = uniform_int(1, 2);
  for (int k = 0; k < n; ++k) {
    const std::string w = wraps[uniform_int(0, 3)];
    const std::string arg = w == "exp" ? "0.3*(" + Poly::random(2, 2).dsl() + ")" : Poly::random(2, 3).dsl();
    s += " + " + num(uniform(-2.0, 2.0)) + "*" + w + "(" + arg + ")";
  }
  return s;
}

/// Random expression over the whole grammar (for printer/parser tests).
inline std::string random_expression(int depth) {
  if (depth == 0 || uniform_int(0, 3) == 0) {
    switch (uniform_int(0, 3)) {
      case 0: return "x";
      case 1: return "y";
      case 2: return "z";
      default: return std::to_string(uniform_int(0, 9)) + "." + std::to_string(uniform_int(0, 99));
    }
  }
  switch (uniform_int(0, 7)) {
    case 0: return "(" + random_expression(depth - 1) + " + " + random_expression(depth - 1) + ")";
    case 1: return random_expression(depth - 1) + " - " + random_expression(depth - 1);
    case 2: return random_expression(depth - 1) + " * " + random_expression(depth - 1);
    case 3: return random_expression(depth - 1) + " / (2 + (" + random_expression(depth - 1) + ")^2)";
    case 4: return "-" + random_expression(depth - 1);
    case 5: return "(" + random_expression(depth - 1) + ")^" + std::to_string(uniform_int(1, 3));
    case 6: {
      static const char* f[] = {"sin", "cos", "tanh", "exp", "abs"};
      return std::string(f[uniform_int(0, 4)]) + "(" + random_expression(depth - 1) + ")";
    }
    default: return "(1.5 + (" + random_expression(depth - 1) + ")^2)^-1";
  }
}

/// Richardson-extrapolated central first derivative of g at 0.
inline double richardson_derivative(const std::function<double(double)>& g, double h) {
  auto c = [&](double hh) { return (g(hh) - g(-hh)) / (2.0 * hh); };
  const double d1 = c(h), d2 = c(h / 2.0), d3 = c(h / 4.0);
  const double r1 = (4.0 * d2 - d1) / 3.0, r2 = (4.0 * d3 - d2) / 3.0;
  return (16.0 * r2 - r1) / 15.0;
}

/// Helicity densities from a fourth-order stencil over unit-step frames,
/// independent of the library's curl path.
inline bihamil::HelicityDensities helicities_oracle(const bihamil::VectorFieldSpec& v, const Vec3& p, double h = 2e-4) {
  auto nb = [&](const Vec3& q) {
    const auto f = bihamil::frame_at(v, q);
    return std::array<Vec3, 2>{f.n, f.b};
  };
  std::array<std::array<Vec3, 2>, 3> d{};  // d[j][k] = ∂_j (n or b)
  for (int j = 0; j < 3; ++j) {
    auto at = [&](double s) {
      Vec3 q = p;
      q[j] += s;
      return nb(q);
    };
    const auto a2 = at(2 * h), a1 = at(h), m1 = at(-h), m2 = at(-2 * h);
    for (int k = 0; k < 2; ++k) d[j][k] = (-1.0 * a2[k] + 8.0 * a1[k] - 8.0 * m1[k] + m2[k]) / (12.0 * h);
  }
  auto curl = [&](int k) {
    return Vec3{d[1][k][2] - d[2][k][1], d[2][k][0] - d[0][k][2], d[0][k][1] - d[1][k][0]};
  };
  const auto f = bihamil::frame_at(v, p);
  const Vec3 cn = curl(0), cb = curl(1);
  bihamil::HelicityDensities out;
  out.omega_t = bihamil::dot(f.t, f.curl_t);
  out.omega_n = bihamil::dot(f.n, cn);
  out.omega_b = bihamil::dot(f.b, cb);
  out.n_curl_b = bihamil::dot(f.n, cb);
  out.b_curl_n = bihamil::dot(f.b, cn);
  return out;
}

/// Classical RK4 with fixed step for y' = f(y); returns the state at each
/// multiple of `every` steps.
inline std::vector<std::vector<double>> rk4(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                                            std::vector<double> y, double h, int steps, int every) {
  std::vector<std::vector<double>> out{y};
  auto axpy = [](const std::vector<double>& a, double s, const std::vector<double>& b) {
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
    return r;
  };
  for (int k = 1; k <= steps; ++k) {
    const auto k1 = f(y);
    const auto k2 = f(axpy(y, h / 2, k1));
    const auto k3 = f(axpy(y, h / 2, k2));
    const auto k4 = f(axpy(y, h, k3));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    if (k % every == 0) out.push_back(y);
  }
  return out;
}

}  // namespace testing_support
