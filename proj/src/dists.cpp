#include "specq/dists.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace specq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

[[noreturn]] void atomic_point(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "atomic point at t=%g", t);
  throw std::domain_error(buf);
}

[[noreturn]] void zero_survivor(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "zero survivor mass at t=%g", t);
  throw std::domain_error(buf);
}

// P(Erlang(shape, rate) <= z)
double erlang_cdf(int shape, double rate, double z) {
  if (z <= 0) return 0.0;
  const double rz = rate * z;
  double term = 1.0, sum = 1.0;
  for (int n = 1; n < shape; ++n) {
    term *= rz / n;
    sum += term;
  }
  return 1.0 - std::exp(-rz) * sum;
}

// int_u^v t^(power - alpha) dt with power - alpha possibly equal to -1
double power_integral(double u, double v, double expnt) {
  if (std::fabs(expnt + 1.0) < 1e-14) return std::log(v / u);
  return (std::pow(v, expnt + 1.0) - std::pow(u, expnt + 1.0)) / (expnt + 1.0);
}

double trunc_pareto_norm(const TruncatedPareto& d) {
  return 1.0 /
         (std::pow(d.s_min, -d.alpha) - std::pow(d.cutoff, -d.alpha));
}

}  // namespace

Deterministic::Deterministic(double v) : value(v) {
  require(v > 0 && std::isfinite(v), "deterministic: value must be positive");
}

Exponential::Exponential(double r) : rate(r) {
  require(r > 0 && std::isfinite(r), "exponential: rate must be positive");
}

Uniform::Uniform(double l, double h) : lo(l), hi(h) {
  require(l >= 0 && h > l && std::isfinite(h),
          "uniform: need 0 <= lo < hi");
}

Bimodal::Bimodal(double s, double l, double prob)
    : s_small(s), s_large(l), p(prob) {
  require(s > 0 && l > s && std::isfinite(l),
          "bimodal: need 0 < s_small < s_large");
  require(prob > 0 && prob < 1, "bimodal: p must lie in (0,1)");
}

HyperExponential::HyperExponential(std::vector<double> w, std::vector<double> r)
    : weights(std::move(w)), rates(std::move(r)) {
  require(!weights.empty() && weights.size() == rates.size(),
          "hyperexponential: weights and rates must match and be nonempty");
  double total = 0;
  for (double wi : weights) {
    require(wi > 0, "hyperexponential: weights must be positive");
    total += wi;
  }
  require(std::fabs(total - 1.0) < 1e-9,
          "hyperexponential: weights must sum to 1");
  for (double ri : rates)
    require(ri > 0 && std::isfinite(ri),
            "hyperexponential: rates must be positive");
}

Pareto::Pareto(double a, double s) : alpha(a), s_min(s) {
  require(s > 0 && std::isfinite(s), "pareto: s_min must be positive");
  require(a > 1 && std::isfinite(a),
          "pareto: alpha must exceed 1 so the mean is finite");
}

TruncatedPareto::TruncatedPareto(double a, double s, double c)
    : alpha(a), s_min(s), cutoff(c) {
  require(a > 0 && std::isfinite(a), "truncated_pareto: alpha must be positive");
  require(s > 0 && c > s && std::isfinite(c),
          "truncated_pareto: need 0 < s_min < cutoff");
}

Erlang::Erlang(int k, double r) : shape(k), rate(r) {
  require(k >= 1 && k <= 1000, "erlang: shape must lie in [1, 1000]");
  require(r > 0 && std::isfinite(r), "erlang: rate must be positive");
}

double mean(const DistributionSpec& d) {
  return std::visit(
      overloaded{
          [](const Deterministic& x) { return x.value; },
          [](const Exponential& x) { return 1.0 / x.rate; },
          [](const Uniform& x) { return 0.5 * (x.lo + x.hi); },
          [](const Bimodal& x) {
            return x.p * x.s_small + (1 - x.p) * x.s_large;
          },
          [](const HyperExponential& x) {
            double m = 0;
            for (std::size_t i = 0; i < x.weights.size(); ++i)
              m += x.weights[i] / x.rates[i];
            return m;
          },
          [](const Pareto& x) { return x.alpha * x.s_min / (x.alpha - 1); },
          [](const TruncatedPareto& x) {
            return trunc_pareto_norm(x) * x.alpha *
                   power_integral(x.s_min, x.cutoff, -x.alpha);
          },
          [](const Erlang& x) { return x.shape / x.rate; },
      },
      d);
}

double second_moment(const DistributionSpec& d) {
  return std::visit(
      overloaded{
          [](const Deterministic& x) { return x.value * x.value; },
          [](const Exponential& x) { return 2.0 / (x.rate * x.rate); },
          [](const Uniform& x) {
            return (x.lo * x.lo + x.lo * x.hi + x.hi * x.hi) / 3.0;
          },
          [](const Bimodal& x) {
            return x.p * x.s_small * x.s_small +
                   (1 - x.p) * x.s_large * x.s_large;
          },
          [](const HyperExponential& x) {
            double m = 0;
            for (std::size_t i = 0; i < x.weights.size(); ++i)
              m += 2.0 * x.weights[i] / (x.rates[i] * x.rates[i]);
            return m;
          },
          [](const Pareto& x) -> double {
            if (x.alpha <= 2)
              throw std::domain_error(
                  "infinite moment: pareto second moment needs alpha > 2");
            return x.alpha * x.s_min * x.s_min / (x.alpha - 2);
          },
          [](const TruncatedPareto& x) {
            return trunc_pareto_norm(x) * x.alpha *
                   power_integral(x.s_min, x.cutoff, 1.0 - x.alpha);
          },
          [](const Erlang& x) {
            return x.shape * (x.shape + 1.0) / (x.rate * x.rate);
          },
      },
      d);
}

double ccdf(const DistributionSpec& d, double t) {
  if (t < 0) return 1.0;
  return std::visit(
      overloaded{
          [&](const Deterministic& x) { return t < x.value ? 1.0 : 0.0; },
          [&](const Exponential& x) { return std::exp(-x.rate * t); },
          [&](const Uniform& x) {
            if (t < x.lo) return 1.0;
            if (t >= x.hi) return 0.0;
            return (x.hi - t) / (x.hi - x.lo);
          },
          [&](const Bimodal& x) {
            if (t < x.s_small) return 1.0;
            if (t < x.s_large) return 1.0 - x.p;
            return 0.0;
          },
          [&](const HyperExponential& x) {
            double s = 0;
            for (std::size_t i = 0; i < x.weights.size(); ++i)
              s += x.weights[i] * std::exp(-x.rates[i] * t);
            return s;
          },
          [&](const Pareto& x) {
            return t < x.s_min ? 1.0 : std::pow(x.s_min / t, x.alpha);
          },
          [&](const TruncatedPareto& x) {
            if (t < x.s_min) return 1.0;
            if (t >= x.cutoff) return 0.0;
            return trunc_pareto_norm(x) *
                   (std::pow(t, -x.alpha) - std::pow(x.cutoff, -x.alpha));
          },
          [&](const Erlang& x) { return 1.0 - erlang_cdf(x.shape, x.rate, t); },
      },
      d);
}

double pdf(const DistributionSpec& d, double t) {
  if (t < 0) return 0.0;
  return std::visit(
      overloaded{
          [&](const Deterministic& x) -> double {
            if (t == x.value) atomic_point(t);
            return 0.0;
          },
          [&](const Exponential& x) { return x.rate * std::exp(-x.rate * t); },
          [&](const Uniform& x) {
            return (t >= x.lo && t <= x.hi) ? 1.0 / (x.hi - x.lo) : 0.0;
          },
          [&](const Bimodal& x) -> double {
            if (t == x.s_small || t == x.s_large) atomic_point(t);
            return 0.0;
          },
          [&](const HyperExponential& x) {
            double s = 0;
            for (std::size_t i = 0; i < x.weights.size(); ++i)
              s += x.weights[i] * x.rates[i] * std::exp(-x.rates[i] * t);
            return s;
          },
          [&](const Pareto& x) {
            if (t < x.s_min) return 0.0;
            return x.alpha * std::pow(x.s_min, x.alpha) *
                   std::pow(t, -x.alpha - 1.0);
          },
          [&](const TruncatedPareto& x) {
            if (t < x.s_min || t > x.cutoff) return 0.0;
            return trunc_pareto_norm(x) * x.alpha * std::pow(t, -x.alpha - 1.0);
          },
          [&](const Erlang& x) {
            if (t == 0) return x.shape == 1 ? x.rate : 0.0;
            double logp = x.shape * std::log(x.rate) +
                          (x.shape - 1) * std::log(t) - x.rate * t -
                          std::lgamma(x.shape);
            return std::exp(logp);
          },
      },
      d);
}

double hazard(const DistributionSpec& d, double t) {
  const double surv = ccdf(d, t);
  if (surv <= 0) zero_survivor(t);
  return pdf(d, t) / surv;
}

double truncated_mean(const DistributionSpec& d, double z) {
  if (z <= 0) return z;
  return std::visit(
      overloaded{
          [&](const Deterministic& x) { return std::min(x.value, z); },
          [&](const Exponential& x) {
            return (1.0 - std::exp(-x.rate * z)) / x.rate;
          },
          [&](const Uniform& x) {
            if (z <= x.lo) return z;
            if (z >= x.hi) return 0.5 * (x.lo + x.hi);
            const double w = x.hi - x.lo;
            return x.lo + (w * w - (x.hi - z) * (x.hi - z)) / (2 * w);
          },
          [&](const Bimodal& x) {
            if (z <= x.s_small) return z;
            return x.p * x.s_small + (1 - x.p) * std::min(z, x.s_large);
          },
          [&](const HyperExponential& x) {
            double s = 0;
            for (std::size_t i = 0; i < x.weights.size(); ++i)
              s += x.weights[i] * (1.0 - std::exp(-x.rates[i] * z)) /
                   x.rates[i];
            return s;
          },
          [&](const Pareto& x) {
            if (z <= x.s_min) return z;
            return x.s_min +
                   (x.s_min - std::pow(x.s_min, x.alpha) *
                                  std::pow(z, 1.0 - x.alpha)) /
                       (x.alpha - 1);
          },
          [&](const TruncatedPareto& x) -> double {
            if (z <= x.s_min) return z;
            const double zc = std::min(z, x.cutoff);
            const double k = trunc_pareto_norm(x);
            return x.s_min +
                   k * (power_integral(x.s_min, zc, -x.alpha) -
                        std::pow(x.cutoff, -x.alpha) * (zc - x.s_min));
          },
          [&](const Erlang& x) {
            // E[D ^ z] = (1/rate) * sum_{m=1..shape} P(Erlang(m, rate) <= z)
            double s = 0;
            for (int m = 1; m <= x.shape; ++m)
              s += erlang_cdf(m, x.rate, z);
            return s / x.rate;
          },
      },
      d);
}

double truncated_second_moment(const DistributionSpec& d, double z) {
  if (z <= 0) return z * z;
  return std::visit(
      overloaded{
          [&](const Deterministic& x) {
            const double m = std::min(x.value, z);
            return m * m;
          },
          [&](const Exponential& x) {
            const double rz = x.rate * z;
            return 2.0 * (1.0 - std::exp(-rz) * (1.0 + rz)) /
                   (x.rate * x.rate);
          },
          [&](const Uniform& x) {
            if (z <= x.lo) return z * z;
            if (z >= x.hi)
              return (x.lo * x.lo + x.lo * x.hi + x.hi * x.hi) / 3.0;
            const double w = x.hi - x.lo;
            return (z * z * z - x.lo * x.lo * x.lo) / (3 * w) +
                   z * z * (x.hi - z) / w;
          },
          [&](const Bimodal& x) {
            if (z <= x.s_small) return z * z;
            const double zc = std::min(z, x.s_large);
            return x.p * x.s_small * x.s_small + (1 - x.p) * zc * zc;
          },
          [&](const HyperExponential& x) {
            double s = 0;
            for (std::size_t i = 0; i < x.weights.size(); ++i) {
              const double rz = x.rates[i] * z;
              s += x.weights[i] * 2.0 * (1.0 - std::exp(-rz) * (1.0 + rz)) /
                   (x.rates[i] * x.rates[i]);
            }
            return s;
          },
          [&](const Pareto& x) {
            if (z <= x.s_min) return z * z;
            const double body = x.alpha * std::pow(x.s_min, x.alpha) *
                                power_integral(x.s_min, z, 1.0 - x.alpha);
            return body + z * z * std::pow(x.s_min / z, x.alpha);
          },
          [&](const TruncatedPareto& x) -> double {
            if (z <= x.s_min) return z * z;
            const double zc = std::min(z, x.cutoff);
            const double k = trunc_pareto_norm(x);
            const double body =
                k * x.alpha * power_integral(x.s_min, zc, 1.0 - x.alpha);
            const double tail =
                z >= x.cutoff
                    ? 0.0
                    : z * z * k *
                          (std::pow(z, -x.alpha) -
                           std::pow(x.cutoff, -x.alpha));
            return body + tail;
          },
          [&](const Erlang& x) {
            // E[(D ^ z)^2] = (2/rate^2) * sum_{n=0..shape-1} (n+1) F_{n+2}(z)
            double s = 0;
            for (int n = 0; n < x.shape; ++n)
              s += (n + 1) * erlang_cdf(n + 2, x.rate, z);
            return 2.0 * s / (x.rate * x.rate);
          },
      },
      d);
}

double upper_mean(const DistributionSpec& d, double z) {
  return mean(d) - truncated_mean(d, z) + z * ccdf(d, z);
}

double upper_second_moment(const DistributionSpec& d, double z) {
  return second_moment(d) - truncated_second_moment(d, z) +
         z * z * ccdf(d, z);
}

namespace {

double quantile_bisect(const DistributionSpec& d, double q) {
  double hi = std::max(mean(d), 1.0);
  while (cdf(d, hi) < q) hi *= 2;
  double lo = 0;
  for (int i = 0; i < 200 && (hi - lo) > 1e-15 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(d, mid) >= q ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

double quantile(const DistributionSpec& d, double q) {
  if (q < 0 || q >= 1)
    throw std::invalid_argument("quantile: q must lie in [0,1)");
  return std::visit(
      overloaded{
          [&](const Deterministic& x) { return x.value; },
          [&](const Exponential& x) {
            return -std::log1p(-q) / x.rate;
          },
          [&](const Uniform& x) { return x.lo + q * (x.hi - x.lo); },
          [&](const Bimodal& x) {
            return q <= x.p ? x.s_small : x.s_large;
          },
          [&](const HyperExponential&) { return quantile_bisect(d, q); },
          [&](const Pareto& x) {
            return x.s_min * std::pow(1.0 - q, -1.0 / x.alpha);
          },
          [&](const TruncatedPareto& x) {
            const double a = std::pow(x.s_min, -x.alpha);
            const double b = std::pow(x.cutoff, -x.alpha);
            return std::pow(a - q * (a - b), -1.0 / x.alpha);
          },
          [&](const Erlang&) { return quantile_bisect(d, q); },
      },
      d);
}

double sample(const DistributionSpec& d, RngStream& stream) {
  return std::visit(
      overloaded{
          [&](const Deterministic& x) { return x.value; },
          [&](const Exponential& x) {
            return -std::log(stream.uniform()) / x.rate;
          },
          [&](const Uniform& x) {
            return x.lo + stream.uniform() * (x.hi - x.lo);
          },
          [&](const Bimodal& x) {
            return stream.uniform() < x.p ? x.s_small : x.s_large;
          },
          [&](const HyperExponential& x) {
            double u = stream.uniform();
            std::size_t phase = 0;
            for (; phase + 1 < x.weights.size(); ++phase) {
              if (u < x.weights[phase]) break;
              u -= x.weights[phase];
            }
            return -std::log(stream.uniform()) / x.rates[phase];
          },
          [&](const Pareto& x) {
            return x.s_min * std::pow(stream.uniform(), -1.0 / x.alpha);
          },
          [&](const TruncatedPareto& x) {
            const double a = std::pow(x.s_min, -x.alpha);
            const double b = std::pow(x.cutoff, -x.alpha);
            return std::pow(a - stream.uniform() * (a - b), -1.0 / x.alpha);
          },
          [&](const Erlang& x) {
            double acc = 0;
            for (int i = 0; i < x.shape; ++i)
              acc -= std::log(stream.uniform());
            return acc / x.rate;
          },
      },
      d);
}

std::vector<double> atoms(const DistributionSpec& d) {
  return std::visit(
      overloaded{
          [](const Deterministic& x) { return std::vector<double>{x.value}; },
          [](const Bimodal& x) {
            return std::vector<double>{x.s_small, x.s_large};
          },
          [](const auto&) { return std::vector<double>{}; },
      },
      d);
}

bool is_continuous(const DistributionSpec& d) { return atoms(d).empty(); }

double support_lo(const DistributionSpec& d) {
  return std::visit(
      overloaded{
          [](const Deterministic& x) { return x.value; },
          [](const Exponential&) { return 0.0; },
          [](const Uniform& x) { return x.lo; },
          [](const Bimodal& x) { return x.s_small; },
          [](const HyperExponential&) { return 0.0; },
          [](const Pareto& x) { return x.s_min; },
          [](const TruncatedPareto& x) { return x.s_min; },
          [](const Erlang&) { return 0.0; },
      },
      d);
}

double support_hi(const DistributionSpec& d) {
  return std::visit(
      overloaded{
          [](const Deterministic& x) { return x.value; },
          [](const Exponential&) { return kInf; },
          [](const Uniform& x) { return x.hi; },
          [](const Bimodal& x) { return x.s_large; },
          [](const HyperExponential&) { return kInf; },
          [](const Pareto&) { return kInf; },
          [](const TruncatedPareto& x) { return x.cutoff; },
          [](const Erlang&) { return kInf; },
      },
      d);
}

std::string describe(const DistributionSpec& d) {
  char buf[128];
  std::visit(
      overloaded{
          [&](const Deterministic& x) {
            std::snprintf(buf, sizeof(buf), "deterministic(%g)", x.value);
          },
          [&](const Exponential& x) {
            std::snprintf(buf, sizeof(buf), "exponential(%g)", x.rate);
          },
          [&](const Uniform& x) {
            std::snprintf(buf, sizeof(buf), "uniform(%g,%g)", x.lo, x.hi);
          },
          [&](const Bimodal& x) {
            std::snprintf(buf, sizeof(buf), "bimodal(%g,%g,%g)", x.s_small,
                          x.s_large, x.p);
          },
          [&](const HyperExponential& x) {
            std::snprintf(buf, sizeof(buf), "hyperexponential(%zu phases)",
                          x.weights.size());
          },
          [&](const Pareto& x) {
            std::snprintf(buf, sizeof(buf), "pareto(%g,%g)", x.alpha, x.s_min);
          },
          [&](const TruncatedPareto& x) {
            std::snprintf(buf, sizeof(buf), "truncated_pareto(%g,%g,%g)",
                          x.alpha, x.s_min, x.cutoff);
          },
          [&](const Erlang& x) {
            std::snprintf(buf, sizeof(buf), "erlang(%d,%g)", x.shape, x.rate);
          },
      },
      d);
  return buf;
}

}  // namespace specq
