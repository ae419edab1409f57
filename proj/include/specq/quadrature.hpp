#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace specq {

struct QuadOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  int max_depth = 48;
};

namespace detail {

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule,
// on [-1, 1]. Nodes are symmetric; only the nonnegative half is stored.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.0,
    0.2077849550078985,
    0.4058451513773972,
    0.5860872354676911,
    0.7415311855993945,
    0.8648644233597691,
    0.9491079123427585,
    0.9914553711208126,
};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.2094821410847278,
    0.2044329400752989,
    0.1903505780647854,
    0.1690047266392679,
    0.1406532597155259,
    0.1047900103222502,
    0.0630920926299786,
    0.0229353220105292,
};
// Gauss weights for the odd Kronrod nodes (indices 0, 2, 4, 6 above).
inline constexpr std::array<double, 4> kGaussWeights = {
    0.4179591836734694,
    0.3818300505051189,
    0.2797053914892767,
    0.1294849661688697,
};

template <typename F>
std::pair<double, double> gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double f0 = f(c);
  double kron = kKronrodWeights[0] * f0;
  double gauss = kGaussWeights[0] * f0;
  for (std::size_t i = 1; i < 8; ++i) {
    const double fl = f(c - h * kKronrodNodes[i]);
    const double fr = f(c + h * kKronrodNodes[i]);
    kron += kKronrodWeights[i] * (fl + fr);
    if (i % 2 == 0) gauss += kGaussWeights[i / 2] * (fl + fr);
  }
  kron *= h;
  gauss *= h;
  return {kron, std::fabs(kron - gauss)};
}

template <typename F>
void integrate_rec(const F& f, double a, double b, double tol, int depth,
                   double& acc, const QuadOptions& opt) {
  auto [val, err] = gk15(f, a, b);
  if (err <= tol || depth >= opt.max_depth) {
    acc += val;
    return;
  }
  const double m = 0.5 * (a + b);
  integrate_rec(f, a, m, 0.5 * tol, depth + 1, acc, opt);
  integrate_rec(f, m, b, 0.5 * tol, depth + 1, acc, opt);
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration of f over [a, b].
template <typename F>
double integrate(const F& f, double a, double b, QuadOptions opt = {}) {
  if (!(a <= b)) throw std::invalid_argument("integrate: reversed interval");
  if (a == b) return 0.0;
  auto [rough, err0] = detail::gk15(f, a, b);
  const double tol =
      std::max(opt.abs_tol, opt.rel_tol * std::max(std::fabs(rough), 1e-300));
  if (err0 <= tol) return rough;
  double acc = 0.0;
  detail::integrate_rec(f, a, b, tol, 0, acc, opt);
  return acc;
}

// Same, but the caller supplies interior points where the integrand has a
// kink or jump; the interval is split there so the adaptive rule is only ever
// applied to smooth pieces.
template <typename F>
double integrate_split(const F& f, double a, double b,
                       const std::vector<double>& breakpoints,
                       QuadOptions opt = {}) {
  std::vector<double> cuts{a};
  for (double x : breakpoints)
    if (x > a && x < b) cuts.push_back(x);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) acc += integrate(f, cuts[i], cuts[i + 1], opt);
  return acc;
}

}  // namespace specq
