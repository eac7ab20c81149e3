#pragma once

// Dormand-Prince 5(4) integrator with an output grid. Internal steps are
// adaptive; they are clipped so that every grid point s_k = k·Δ (and the end
// point) is hit exactly, and samples are reported only there.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bihamil/error.hpp"

namespace bihamil {

class StepSizeUnderflow : public Error {
 public:
  explicit StepSizeUnderflow(double s)
      : Error("step size underflow at s = " + detail::num(s)), s_(s) {}
  double s() const noexcept { return s_; }

 private:
  double s_;
};

struct IntegratorOptions {
  double rtol{1e-9};
  double atol{1e-9};
  double max_step{0.0};     // 0: 0.05·s_max
  double sample_step{0.02}; // output grid spacing, capped by max_step
  double min_step{1e-12};
  std::size_t max_steps{2'000'000};
  bool backward{false};     // integrate towards s < 0

  double effective_max_step(double s_max) const { return max_step > 0.0 ? max_step : 0.05 * s_max; }
  double effective_sample_step(double s_max) const { return std::min(sample_step, effective_max_step(s_max)); }
};

namespace detail {

struct DormandPrince {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b - b*
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace detail

/// Integrates y' = rhs(s, y) from s = 0 to s_max.
///
///   rhs(double s, const std::vector<double>& y, std::vector<double>& dy)
///   after_step(double s, std::vector<double>& y) -> bool   (true if y was modified)
///   on_sample(double s, const std::vector<double>& y)
///
/// on_sample is called at s = 0 and at each grid point. `s_reached` tracks the
/// last accepted s so callers can report where an exception stopped the run.
template <class Rhs, class AfterStep, class OnSample>
void integrate_on_grid(Rhs&& rhs, std::vector<double> y, double s_max, const IntegratorOptions& opts,
                       AfterStep&& after_step, OnSample&& on_sample, double& s_reached) {
  using DP = detail::DormandPrince;
  const std::size_t n = y.size();
  const double grid = opts.effective_sample_step(s_max);
  const double h_max = opts.effective_max_step(s_max);
  if (!(s_max > 0.0)) throw InvalidArgument("s_max must be positive");
  if (!(grid > 0.0)) throw InvalidArgument("sample step must be positive");

  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y5(n);
  double s = 0.0;
  s_reached = 0.0;
  on_sample(s, y);
  rhs(s, y, k1);

  std::size_t next_index = 1;
  const auto intervals = static_cast<std::size_t>(std::ceil(s_max / grid - 1e-9));
  auto grid_point = [&](std::size_t k) { return k >= intervals ? s_max : double(k) * grid; };
  double h = std::min(h_max, grid);
  std::size_t steps = 0;

  while (s < s_max) {
    if (++steps > opts.max_steps) throw StepSizeUnderflow(s);
    const double target = grid_point(next_index);
    bool lands = false;
    const double h_free = h;
    if (s + h >= target) {
      h = target - s;
      lands = true;
    }
    if (h < opts.min_step) throw StepSizeUnderflow(s);

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * DP::a21 * k1[i];
    rhs(s + DP::c2 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (DP::a31 * k1[i] + DP::a32 * k2[i]);
    rhs(s + DP::c3 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (DP::a41 * k1[i] + DP::a42 * k2[i] + DP::a43 * k3[i]);
    rhs(s + DP::c4 * h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (DP::a51 * k1[i] + DP::a52 * k2[i] + DP::a53 * k3[i] + DP::a54 * k4[i]);
    rhs(s + DP::c5 * h, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (DP::a61 * k1[i] + DP::a62 * k2[i] + DP::a63 * k3[i] + DP::a64 * k4[i] + DP::a65 * k5[i]);
    rhs(s + h, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      y5[i] = y[i] + h * (DP::b1 * k1[i] + DP::b3 * k3[i] + DP::b4 * k4[i] + DP::b5 * k5[i] + DP::b6 * k6[i]);
    rhs(s + h, y5, k7);

    double err2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e =
          h * (DP::e1 * k1[i] + DP::e3 * k3[i] + DP::e4 * k4[i] + DP::e5 * k5[i] + DP::e6 * k6[i] + DP::e7 * k7[i]);
      const double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      err2 += (e / sc) * (e / sc);
    }
    const double err = std::sqrt(err2 / double(n));
    if (!std::isfinite(err)) {
      h *= 0.1;
      continue;
    }

    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    if (err <= 1.0) {
      s = lands ? target : s + h;
      y.swap(y5);
      s_reached = s;
      if (after_step(s, y)) {
        rhs(s, y, k1);
      } else {
        k1.swap(k7);
      }
      if (lands) {
        on_sample(s, y);
        ++next_index;
      }
      // A landing step is clipped; do not let the clip shrink the next one.
      h = std::min(std::max(h * factor, lands ? h_free : 0.0), h_max);
    } else {
      h *= std::max(factor, 0.1);
    }
  }
}

}  // namespace bihamil
