#pragma once

#include <string>
#include <variant>
#include <vector>

#include "specq/rng.hpp"

namespace specq {

// Service-size building blocks. Each struct validates its parameters on
// construction and throws std::invalid_argument otherwise.
//
// Conventions shared by every distribution:
//   - ccdf(t) = P(D > t), strictly. At an atom a, ccdf(a) excludes the atom.
//   - pdf is only defined where the law is absolutely continuous; asking for
//     it at an atom throws std::domain_error("atomic point ...").
//   - hazard(t) = pdf(t) / ccdf(t); past the support it throws
//     std::domain_error("zero survivor mass ...").
//   - moments that do not exist throw std::domain_error("infinite moment ...").

struct Deterministic {
  double value;
  explicit Deterministic(double v = 1.0);
};

struct Exponential {
  double rate;  // E[D] = 1 / rate
  explicit Exponential(double rate);
};

struct Uniform {
  double lo, hi;
  Uniform(double lo, double hi);
};

// Two-point law: s_small with probability p, s_large with probability 1 - p.
struct Bimodal {
  double s_small, s_large, p;
  Bimodal(double s_small, double s_large, double p);
};

struct HyperExponential {
  std::vector<double> weights;  // must sum to 1
  std::vector<double> rates;
  HyperExponential(std::vector<double> weights, std::vector<double> rates);
};

// ccdf (s_min / t)^alpha for t >= s_min. Requires alpha > 1 so the mean exists.
struct Pareto {
  double alpha, s_min;
  Pareto(double alpha, double s_min);
};

// Pareto density restricted to [s_min, cutoff] and renormalized. Any
// alpha > 0 is admissible since truncation keeps all moments finite.
struct TruncatedPareto {
  double alpha, s_min, cutoff;
  TruncatedPareto(double alpha, double s_min, double cutoff);
};

struct Erlang {
  int shape;  // number of phases
  double rate;
  Erlang(int shape, double rate);
};

using DistributionSpec =
    std::variant<Deterministic, Exponential, Uniform, Bimodal,
                 HyperExponential, Pareto, TruncatedPareto, Erlang>;

double mean(const DistributionSpec& d);
double second_moment(const DistributionSpec& d);
double ccdf(const DistributionSpec& d, double t);
inline double cdf(const DistributionSpec& d, double t) { return 1.0 - ccdf(d, t); }
double pdf(const DistributionSpec& d, double t);
double hazard(const DistributionSpec& d, double t);

// E[min(D, z)] and E[min(D, z)^2], in closed form. Continuous in z.
double truncated_mean(const DistributionSpec& d, double z);
double truncated_second_moment(const DistributionSpec& d, double z);

// E[D 1{D > z}] and E[D^2 1{D > z}]; the atom at z, if any, is excluded,
// matching the strict ccdf convention.
double upper_mean(const DistributionSpec& d, double z);
double upper_second_moment(const DistributionSpec& d, double z);

// Smallest t with P(D <= t) >= q, for q in [0, 1).
double quantile(const DistributionSpec& d, double q);

double sample(const DistributionSpec& d, RngStream& stream);

// Atom locations (empty for the continuous families).
std::vector<double> atoms(const DistributionSpec& d);
bool is_continuous(const DistributionSpec& d);

// Support endpoints; the upper one may be +infinity.
double support_lo(const DistributionSpec& d);
double support_hi(const DistributionSpec& d);

std::string describe(const DistributionSpec& d);

}  // namespace specq
