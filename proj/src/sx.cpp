#include "specq/sx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "specq/quadrature.hpp"

namespace specq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* mode_name(RetryMode m) {
  switch (m) {
    case RetryMode::kRestart: return "restart";
    case RetryMode::kIdentical: return "identical";
    case RetryMode::kResume: return "resume";
  }
  return "?";
}

struct Atom {
  double x;
  double p;
};

// Atom decomposition for the discrete families; empty means continuous.
std::vector<Atom> atom_weights(const DistributionSpec& d) {
  if (const auto* det = std::get_if<Deterministic>(&d))
    return {{det->value, 1.0}};
  if (const auto* bi = std::get_if<Bimodal>(&d))
    return {{bi->s_small, bi->p}, {bi->s_large, 1.0 - bi->p}};
  return {};
}

QuadOptions moment_quad() { return QuadOptions{1e-10, 1e-12, 48}; }

// E[g(X)] for continuous X. The integral is cut at quantile levels (so heavy
// tails are resolved) and at caller-supplied x positions where g has kinks.
template <typename G>
double expect_x(const DistributionSpec& X, const G& g,
                std::vector<double> x_breaks) {
  const auto xa = atom_weights(X);
  if (!xa.empty()) {
    double acc = 0;
    for (const auto& a : xa) acc += a.p * g(a.x);
    return acc;
  }
  const double x_lo = support_lo(X);
  const double x_hi = std::isfinite(support_hi(X))
                          ? support_hi(X)
                          : quantile(X, 1.0 - 1e-13);
  static const double tail_mass[] = {0.75,  0.5,  0.25,  0.1,   0.01, 1e-3,
                                     1e-4,  1e-5, 1e-6,  1e-8,  1e-10, 1e-12};
  for (double eps : tail_mass) x_breaks.push_back(quantile(X, 1.0 - eps));
  return integrate_split([&](double x) { return pdf(X, x) * g(x); }, x_lo,
                         x_hi, x_breaks, moment_quad());
}

// x positions where x -> h(z / x) kinks, given the kink positions of h.
std::vector<double> ratio_breaks(const DistributionSpec& S, double z) {
  std::vector<double> out;
  if (!(z > 0) || !std::isfinite(z)) return out;
  auto add = [&](double s) {
    if (s > 0 && std::isfinite(s)) out.push_back(z / s);
  };
  for (double a : atoms(S)) add(a);
  add(support_lo(S));
  add(support_hi(S));
  return out;
}

[[noreturn]] void degenerate(double t) {
  char buf[72];
  std::snprintf(buf, sizeof(buf),
                "degenerate conditioning: P(eta1 > %g) = 0", t);
  throw std::domain_error(buf);
}

}  // namespace

std::string describe(const SXModel& m) {
  return std::string("S=") + describe(m.S) + " X=" + describe(m.X) +
         " mode=" + mode_name(m.mode);
}

double eta1_mean(const SXModel& m) { return mean(m.S) * mean(m.X); }

double eta1_second_moment(const SXModel& m) {
  return second_moment(m.S) * second_moment(m.X);
}

double eta1_ccdf(const SXModel& m, double t) {
  if (t < 0) return 1.0;
  const auto sa = atom_weights(m.S);
  if (!sa.empty() && is_continuous(m.X)) {
    // P(S X > t) = sum_s P(S = s) P(X > t / s); the events s > t/x and
    // x > t/s coincide for positive values, so strictness is preserved.
    double acc = 0;
    for (const auto& a : sa) acc += a.p * ccdf(m.X, t / a.x);
    return acc;
  }
  return expect_x(
      m.X, [&](double x) { return x > 0 ? ccdf(m.S, t / x) : 0.0; },
      ratio_breaks(m.S, t));
}

double eta1_truncated_mean(const SXModel& m, double z) {
  if (z <= 0) return z;
  if (!std::isfinite(z)) return eta1_mean(m);
  const auto sa = atom_weights(m.S);
  if (!sa.empty() && is_continuous(m.X)) {
    double acc = 0;  // min(sX, z) = s * min(X, z/s)
    for (const auto& a : sa) acc += a.p * a.x * truncated_mean(m.X, z / a.x);
    return acc;
  }
  return expect_x(
      m.X,
      [&](double x) { return x > 0 ? x * truncated_mean(m.S, z / x) : 0.0; },
      ratio_breaks(m.S, z));
}

double eta1_truncated_second_moment(const SXModel& m, double z) {
  if (z <= 0) return z * z;
  if (!std::isfinite(z)) return eta1_second_moment(m);
  const auto sa = atom_weights(m.S);
  if (!sa.empty() && is_continuous(m.X)) {
    double acc = 0;
    for (const auto& a : sa)
      acc += a.p * a.x * a.x * truncated_second_moment(m.X, z / a.x);
    return acc;
  }
  return expect_x(
      m.X,
      [&](double x) {
        return x > 0 ? x * x * truncated_second_moment(m.S, z / x) : 0.0;
      },
      ratio_breaks(m.S, z));
}

double eta1_upper_mean(const SXModel& m, double z) {
  if (z < 0) return eta1_mean(m);
  const auto sa = atom_weights(m.S);
  if (!sa.empty() && is_continuous(m.X)) {
    double acc = 0;
    for (const auto& a : sa) acc += a.p * a.x * upper_mean(m.X, z / a.x);
    return acc;
  }
  return expect_x(
      m.X, [&](double x) { return x > 0 ? x * upper_mean(m.S, z / x) : 0.0; },
      ratio_breaks(m.S, z));
}

double eta1_upper_second_moment(const SXModel& m, double z) {
  if (z < 0) return eta1_second_moment(m);
  const auto sa = atom_weights(m.S);
  if (!sa.empty() && is_continuous(m.X)) {
    double acc = 0;
    for (const auto& a : sa)
      acc += a.p * a.x * a.x * upper_second_moment(m.X, z / a.x);
    return acc;
  }
  return expect_x(
      m.X,
      [&](double x) {
        return x > 0 ? x * x * upper_second_moment(m.S, z / x) : 0.0;
      },
      ratio_breaks(m.S, z));
}

std::vector<double> eta1_atoms(const SXModel& m) {
  const auto sa = atom_weights(m.S);
  const auto xa = atom_weights(m.X);
  std::vector<double> out;
  if (sa.empty() || xa.empty()) return out;
  for (const auto& s : sa)
    for (const auto& x : xa) out.push_back(s.x * x.x);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> eta1_knots(const SXModel& m) {
  auto edge_points = [](const DistributionSpec& d) {
    std::vector<double> pts;
    for (const auto& a : atom_weights(d)) pts.push_back(a.x);
    pts.push_back(support_lo(d));
    if (std::isfinite(support_hi(d))) pts.push_back(support_hi(d));
    return pts;
  };
  std::vector<double> out;
  for (double s : edge_points(m.S))
    for (double x : edge_points(m.X))
      if (s * x > 0 && std::isfinite(s * x)) out.push_back(s * x);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool eta1_has_density(const SXModel& m) {
  return is_continuous(m.S) || is_continuous(m.X);
}

double eta1_pdf(const SXModel& m, double t) {
  if (t < 0) return 0.0;
  const auto sa = atom_weights(m.S);
  const auto xa = atom_weights(m.X);
  if (!sa.empty() && !xa.empty()) {
    for (double a : eta1_atoms(m))
      if (t == a) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "atomic point at t=%g", t);
        throw std::domain_error(buf);
      }
    return 0.0;
  }
  if (!sa.empty()) {  // X continuous
    double acc = 0;
    for (const auto& a : sa) acc += a.p * pdf(m.X, t / a.x) / a.x;
    return acc;
  }
  if (!xa.empty()) {  // S continuous
    double acc = 0;
    for (const auto& a : xa) acc += a.p * pdf(m.S, t / a.x) / a.x;
    return acc;
  }
  // Both continuous: f(t) = E_X[ f_S(t / X) / X ].
  return expect_x(
      m.X, [&](double x) { return x > 0 ? pdf(m.S, t / x) / x : 0.0; },
      ratio_breaks(m.S, t));
}

double eta1_hazard(const SXModel& m, double t) {
  const double surv = eta1_ccdf(m, t);
  if (surv <= 0) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "zero survivor mass at t=%g", t);
    throw std::domain_error(buf);
  }
  return eta1_pdf(m, t) / surv;
}

double eta1_quantile(const SXModel& m, double q) {
  if (q < 0 || q >= 1)
    throw std::invalid_argument("eta1_quantile: q must lie in [0,1)");
  double hi = std::max(eta1_mean(m), 1e-12);
  while (1.0 - eta1_ccdf(m, hi) < q) hi *= 2;
  double lo = 0;
  for (int i = 0; i < 200 && (hi - lo) > 1e-14 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (1.0 - eta1_ccdf(m, mid) >= q ? hi : lo) = mid;
  }
  return hi;
}

bool eta2_independent(const SXModel& m) {
  return m.mode == RetryMode::kRestart &&
         std::holds_alternative<Deterministic>(m.X);
}

double eta2_mean_given_timeout(const SXModel& m, double t) {
  const double surv = eta1_ccdf(m, t);
  if (surv <= 0) degenerate(t);
  switch (m.mode) {
    case RetryMode::kRestart: {
      // E[S2 X | S1 X > t] = E[S] E[X 1-bar{F}_S(t/X)] / P(eta1 > t)
      const auto sa = atom_weights(m.S);
      double xterm;
      if (!sa.empty() && is_continuous(m.X)) {
        xterm = 0;
        for (const auto& a : sa) xterm += a.p * upper_mean(m.X, t / a.x);
      } else {
        xterm = expect_x(
            m.X, [&](double x) { return x > 0 ? x * ccdf(m.S, t / x) : 0.0; },
            ratio_breaks(m.S, t));
      }
      return mean(m.S) * xterm / surv;
    }
    case RetryMode::kIdentical:
      return eta1_upper_mean(m, t) / surv;
    case RetryMode::kResume:
      return eta1_upper_mean(m, t) / surv - t;
  }
  throw std::logic_error("unreachable retry mode");
}

double eta2_second_moment_given_timeout(const SXModel& m, double t) {
  const double surv = eta1_ccdf(m, t);
  if (surv <= 0) degenerate(t);
  switch (m.mode) {
    case RetryMode::kRestart: {
      const auto sa = atom_weights(m.S);
      double xterm;
      if (!sa.empty() && is_continuous(m.X)) {
        xterm = 0;
        for (const auto& a : sa)
          xterm += a.p * upper_second_moment(m.X, t / a.x);
      } else {
        xterm = expect_x(
            m.X,
            [&](double x) { return x > 0 ? x * x * ccdf(m.S, t / x) : 0.0; },
            ratio_breaks(m.S, t));
      }
      return second_moment(m.S) * xterm / surv;
    }
    case RetryMode::kIdentical:
      return eta1_upper_second_moment(m, t) / surv;
    case RetryMode::kResume: {
      const double up2 = eta1_upper_second_moment(m, t);
      const double up1 = eta1_upper_mean(m, t);
      return (up2 - 2 * t * up1 + t * t * surv) / surv;
    }
  }
  throw std::logic_error("unreachable retry mode");
}

double eta2_mean_given_timeout_deriv(const SXModel& m, double t) {
  if (eta2_independent(m)) return 0.0;
  const double h = std::max(1e-4 * std::fabs(t), 1e-6);
  const double lo = std::max(t - h, 0.0);
  const double hi = t + h;
  return (eta2_mean_given_timeout(m, hi) - eta2_mean_given_timeout(m, lo)) /
         (hi - lo);
}

SxMoments sx_moments(const SXModel& m, double mu, double tau) {
  if (!(mu > 0)) throw std::invalid_argument("sx_moments: mu must be positive");
  if (!(tau >= 0)) throw std::invalid_argument("sx_moments: tau must be >= 0");
  SxMoments out{};
  if (!std::isfinite(tau)) {
    out.first_visit_time = eta1_mean(m) / mu;
    try {
      out.first_visit_time_sq = eta1_second_moment(m) / (mu * mu);
    } catch (const std::domain_error&) {
      out.first_visit_time_sq = std::numeric_limits<double>::infinity();
    }
    return out;  // timeout_prob and the retry fields stay 0
  }
  const double z = mu * tau;  // work threshold seen by the first queue
  out.first_visit_time = eta1_truncated_mean(m, z) / mu;
  out.first_visit_time_sq = eta1_truncated_second_moment(m, z) / (mu * mu);
  out.timeout_prob = eta1_ccdf(m, z);
  if (out.timeout_prob > 0) {
    // kResume: the killed job had completed z = mu * tau units of work.
    out.retry_work = eta2_mean_given_timeout(m, z);
    try {
      out.retry_work_sq = eta2_second_moment_given_timeout(m, z);
    } catch (const std::domain_error&) {
      out.retry_work_sq = std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

SxMomentsMC mc_oracle(const SXModel& m, double mu, double tau, std::uint64_t n,
                      std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("mc_oracle: n must be positive");
  double s_ft = 0, s_ft2 = 0, s_ft3 = 0, s_ft4 = 0;
  double s_w = 0, s_w2 = 0;
  double s_r = 0, s_r2 = 0, s_r3 = 0, s_r4 = 0;
  std::uint64_t n_to = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    RngStream xs(seed, i, rng_tag::kSharedX);
    RngStream ss(seed, i, rng_tag::kFirstSize);
    const double x = sample(m.X, xs);
    const double eta1 = sample(m.S, ss) * x;
    const bool timeout = eta1 / mu > tau;
    const double ft = timeout ? tau : eta1 / mu;
    double w = ft;
    s_ft += ft;
    s_ft2 += ft * ft;
    s_ft3 += ft * ft * ft;
    s_ft4 += ft * ft * ft * ft;
    if (timeout) {
      ++n_to;
      double eta2 = 0;
      switch (m.mode) {
        case RetryMode::kRestart: {
          RngStream rs(seed, i, rng_tag::kRetrySize);
          eta2 = sample(m.S, rs) * x;
          break;
        }
        case RetryMode::kIdentical: eta2 = eta1; break;
        case RetryMode::kResume: eta2 = eta1 - mu * tau; break;
      }
      s_r += eta2;
      s_r2 += eta2 * eta2;
      s_r3 += eta2 * eta2 * eta2;
      s_r4 += eta2 * eta2 * eta2 * eta2;
      w += eta2;
    }
    s_w += w;
    s_w2 += w * w;
  }
  const double dn = static_cast<double>(n);
  auto se_of = [](double sum, double sumsq, double count) {
    if (count < 2) return kInf;
    const double mu_ = sum / count;
    const double var = std::max(0.0, sumsq / count - mu_ * mu_);
    return std::sqrt(var / count);
  };
  SxMomentsMC out{};
  out.n = n;
  out.n_timeout = n_to;
  out.value.first_visit_time = s_ft / dn;
  out.se.first_visit_time = se_of(s_ft, s_ft2, dn);
  out.value.first_visit_time_sq = s_ft2 / dn;
  out.se.first_visit_time_sq = se_of(s_ft2, s_ft4, dn);
  const double p = static_cast<double>(n_to) / dn;
  out.value.timeout_prob = p;
  out.se.timeout_prob = std::sqrt(std::max(0.0, p * (1 - p)) / dn);
  if (n_to > 0) {
    const double dt = static_cast<double>(n_to);
    out.value.retry_work = s_r / dt;
    out.se.retry_work = se_of(s_r, s_r2, dt);
    out.value.retry_work_sq = s_r2 / dt;
    out.se.retry_work_sq = se_of(s_r2, s_r4, dt);
  }
  out.total_work = s_w / dn;
  out.total_work_se = se_of(s_w, s_w2, dn);
  return out;
}

}  // namespace specq
