#include "specq/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace specq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Arrival rates and service means per class, everything in time units of the
// serving queue so each server has unit capacity.
struct ClassMeans {
  int n = 0;
  std::vector<double> in_c, in_u;  // exogenous inflow, jobs per time
  std::vector<double> m_c, m_u;    // service means of (c,i) and (u,i)
  std::vector<double> m_e;         // of (j,i), index from * n + to
};

ClassMeans derive(const NetworkConfig& cfg) {
  validate(cfg);
  ClassMeans d;
  const int n = cfg.n_queues;
  d.n = n;
  d.in_c.resize(n);
  d.in_u.resize(n);
  d.m_c.resize(n);
  d.m_u.resize(n);
  d.m_e.resize(static_cast<std::size_t>(n) * n);
  const double total_rate = cfg.arrival_intensity * n;
  std::vector<double> retry(n);  // E[eta2 | kill at j], work units
  for (int i = 0; i < n; ++i) {
    const double mu = cfg.service_rate[i];
    const double tau = cfg.timeout[i];
    const auto mom = sx_moments(cfg.model, mu, tau);
    const double p_kill = mom.timeout_prob;
    d.in_c[i] = total_rate * cfg.dispatch_prob[i] * (1.0 - p_kill);
    d.in_u[i] = total_rate * cfg.dispatch_prob[i] * p_kill;
    d.m_u[i] = tau;
    d.m_c[i] = p_kill > 0 && p_kill < 1
                   ? (mom.first_visit_time - tau * p_kill) / (1.0 - p_kill)
                   : mom.first_visit_time;
    retry[i] = mom.retry_work;
  }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      d.m_e[static_cast<std::size_t>(j) * n + i] =
          retry[j] > 0 ? retry[j] / cfg.service_rate[i]
                       : eta1_mean(cfg.model) / cfg.service_rate[i];
  return d;
}

std::vector<double> lyapunov_per_queue(const FluidState& s,
                                       const NetworkConfig& cfg,
                                       const ClassMeans& d) {
  const int n = d.n;
  std::vector<double> g(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double bracket = d.m_c[i] * s.completing[i];
    if (s.uncompleted[i] > 0) bracket += d.m_u[i] * s.uncompleted[i];
    for (int j = 0; j < n; ++j)
      bracket += d.m_e[static_cast<std::size_t>(j) * n + i] *
                 (cfg.reroute_prob[i] * s.uncompleted[j] +
                  s.rerouted[static_cast<std::size_t>(j) * n + i]);
    g[i] = bracket * cfg.service_rate[i] / cfg.reroute_prob[i];
  }
  return g;
}

// Distributes up to `budget` of capacity among classes proportionally to
// weight, never exceeding a class's cap; freed capacity is redistributed
// until the budget or the headroom runs out.
void water_fill(double* alloc, const double* weight, const double* cap,
                std::size_t m, double& budget) {
  for (std::size_t round = 0; round <= m && budget > 1e-300; ++round) {
    double total_w = 0;
    for (std::size_t k = 0; k < m; ++k)
      if (alloc[k] < cap[k] && weight[k] > 0) total_w += weight[k];
    if (total_w <= 0) return;
    bool capped_one = false;
    double spent = 0;
    for (std::size_t k = 0; k < m; ++k) {
      if (!(alloc[k] < cap[k]) || !(weight[k] > 0)) continue;
      const double want = budget * weight[k] / total_w;
      double next = alloc[k] + want;
      if (next >= cap[k]) {
        next = cap[k];
        capped_one = true;
      }
      spent += next - alloc[k];
      alloc[k] = next;
    }
    budget = std::max(0.0, budget - spent);
    if (!capped_one) return;  // everything requested was granted
  }
}

// Per-step scratch space; class slots per queue are 0 = completing,
// 1 = uncompleted, 2 + j = re-routed from queue j.
struct StepWorkspace {
  std::vector<double> alloc, cap;    // n * (n + 2), phase 1
  std::vector<double> alloc2, cap2;  // n * n, phase 2 (re-routed inflow)
  std::vector<double> weight;
  std::vector<double> out_u_eff;     // effective kill outflow per queue
  std::vector<double> budget;        // unallocated capacity per queue
  explicit StepWorkspace(int n)
      : alloc(static_cast<std::size_t>(n) * (n + 2)),
        cap(static_cast<std::size_t>(n) * (n + 2)),
        alloc2(static_cast<std::size_t>(n) * n),
        cap2(static_cast<std::size_t>(n) * n),
        weight(n + 2),
        out_u_eff(n),
        budget(n) {}
};

// One Euler step. Each queue's unit capacity goes first to its present mass
// (proportionally), then to exogenous inflow, and finally to the re-routed
// inflow generated by this step's kills; whatever remains is idle time.
void euler_step(FluidState& s, const NetworkConfig& cfg, const ClassMeans& d,
                double h, StepWorkspace& w) {
  const int n = d.n;
  const std::size_t nc = static_cast<std::size_t>(n) + 2;

  for (int i = 0; i < n; ++i) {
    double* alloc = w.alloc.data() + i * nc;
    double* cap = w.cap.data() + i * nc;
    std::fill(alloc, alloc + nc, 0.0);
    w.weight.assign(nc, 0.0);
    w.weight[0] = s.completing[i];
    cap[0] = d.m_c[i] * (d.in_c[i] + s.completing[i] / h);
    if (std::isfinite(d.m_u[i])) {
      w.weight[1] = s.uncompleted[i];
      cap[1] = d.m_u[i] * (d.in_u[i] + s.uncompleted[i] / h);
    } else {
      cap[1] = 0;  // no kills ever happen here; any such mass is inert
    }
    for (int j = 0; j < n; ++j) {
      const double q = s.rerouted[static_cast<std::size_t>(j) * n + i];
      w.weight[2 + j] = q;
      cap[2 + j] = d.m_e[static_cast<std::size_t>(j) * n + i] * (q / h);
    }
    double budget = 1.0;
    water_fill(alloc, w.weight.data(), cap, nc, budget);
    for (std::size_t k = 0; k < nc; ++k) w.weight[k] = cap[k] - alloc[k];
    water_fill(alloc, w.weight.data(), cap, nc, budget);
    w.budget[i] = budget;
    w.out_u_eff[i] = std::isfinite(d.m_u[i]) ? alloc[1] / d.m_u[i] : 0.0;
  }

  for (int i = 0; i < n; ++i) {
    double* alloc2 = w.alloc2.data() + static_cast<std::size_t>(i) * n;
    double* cap2 = w.cap2.data() + static_cast<std::size_t>(i) * n;
    std::fill(alloc2, alloc2 + n, 0.0);
    for (int j = 0; j < n; ++j)
      cap2[j] = d.m_e[static_cast<std::size_t>(j) * n + i] *
                cfg.reroute_prob[i] * w.out_u_eff[j];
    // weights equal the caps: split the leftover by re-routed demand
    water_fill(alloc2, cap2, cap2, static_cast<std::size_t>(n), w.budget[i]);
  }

  for (int i = 0; i < n; ++i) {
    const double* alloc = w.alloc.data() + i * nc;
    const double* cap = w.cap.data() + i * nc;
    const double* alloc2 = w.alloc2.data() + static_cast<std::size_t>(i) * n;
    const double* cap2 = w.cap2.data() + static_cast<std::size_t>(i) * n;

    s.completing[i] = alloc[0] >= cap[0]
                          ? 0.0
                          : s.completing[i] +
                                h * (d.in_c[i] - alloc[0] / d.m_c[i]);
    s.busy_time_completing[i] += h * alloc[0];
    if (std::isfinite(d.m_u[i])) {
      s.uncompleted[i] = alloc[1] >= cap[1]
                             ? 0.0
                             : s.uncompleted[i] +
                                   h * (d.in_u[i] - alloc[1] / d.m_u[i]);
      s.busy_time_uncompleted[i] += h * alloc[1];
    }
    for (int j = 0; j < n; ++j) {
      const std::size_t k = static_cast<std::size_t>(j) * n + i;
      double q = alloc[2 + j] >= cap[2 + j]
                     ? 0.0
                     : s.rerouted[k] - h * alloc[2 + j] / d.m_e[k];
      // inflow from this step's kills, net of the share served in place
      if (alloc2[j] < cap2[j])
        q += h * (cfg.reroute_prob[i] * w.out_u_eff[j] - alloc2[j] / d.m_e[k]);
      s.rerouted[k] = std::max(0.0, q);
      s.busy_time_rerouted[k] += h * (alloc[2 + j] + alloc2[j]);
    }
    s.idle_time[i] += h * w.budget[i];
  }
  s.t += h;
}

}  // namespace

FluidState make_fluid_state(int n_queues) {
  if (n_queues < 1)
    throw std::invalid_argument("fluid state needs at least one queue");
  FluidState s;
  s.n_queues = n_queues;
  const std::size_t n = static_cast<std::size_t>(n_queues);
  s.completing.assign(n, 0.0);
  s.uncompleted.assign(n, 0.0);
  s.rerouted.assign(n * n, 0.0);
  s.busy_time_completing.assign(n, 0.0);
  s.busy_time_uncompleted.assign(n, 0.0);
  s.busy_time_rerouted.assign(n * n, 0.0);
  s.idle_time.assign(n, 0.0);
  return s;
}

namespace {

std::size_t class_index(const FluidState& s, const ClassId& id) {
  if (id.queue < 0 || id.queue >= s.n_queues)
    throw std::invalid_argument("class id: queue out of range");
  if (id.kind == FluidClass::kRerouted) {
    if (id.from < 0 || id.from >= s.n_queues)
      throw std::invalid_argument("class id: source queue out of range");
    return static_cast<std::size_t>(id.from) * s.n_queues + id.queue;
  }
  return static_cast<std::size_t>(id.queue);
}

}  // namespace

double mass(const FluidState& s, const ClassId& id) {
  const std::size_t k = class_index(s, id);
  switch (id.kind) {
    case FluidClass::kCompletes: return s.completing[k];
    case FluidClass::kUncompleted: return s.uncompleted[k];
    case FluidClass::kRerouted: return s.rerouted[k];
  }
  return 0;
}

void set_mass(FluidState& s, const ClassId& id, double value) {
  if (!(value >= 0))
    throw std::invalid_argument("fluid mass must be nonnegative");
  const std::size_t k = class_index(s, id);
  switch (id.kind) {
    case FluidClass::kCompletes: s.completing[k] = value; break;
    case FluidClass::kUncompleted: s.uncompleted[k] = value; break;
    case FluidClass::kRerouted: s.rerouted[k] = value; break;
  }
}

double queue_mass(const FluidState& s, int queue) {
  double total = s.completing[queue] + s.uncompleted[queue];
  for (int j = 0; j < s.n_queues; ++j)
    total += s.rerouted[static_cast<std::size_t>(j) * s.n_queues + queue];
  return total;
}

double total_mass(const FluidState& s) {
  double total = 0;
  for (int i = 0; i < s.n_queues; ++i)
    total += s.completing[i] + s.uncompleted[i];
  for (double q : s.rerouted) total += q;
  return total;
}

LyapunovRecord lyapunov(const FluidState& s, const NetworkConfig& cfg) {
  if (s.n_queues != cfg.n_queues)
    throw std::invalid_argument("fluid state and config sizes differ");
  for (double p : cfg.reroute_prob)
    if (!(p > 0))
      throw std::invalid_argument(
          "lyapunov requires positive re-route probabilities");
  const ClassMeans d = derive(cfg);
  LyapunovRecord rec;
  rec.per_queue = lyapunov_per_queue(s, cfg, d);
  rec.max = *std::max_element(rec.per_queue.begin(), rec.per_queue.end());
  return rec;
}

FluidTrajectory fluid_integrate(const NetworkConfig& cfg,
                                const FluidState& initial, double horizon,
                                double step, int record_every) {
  if (!(step > 0)) throw std::invalid_argument("nonpositive step");
  if (!(horizon >= step))
    throw std::invalid_argument("horizon shorter than one step");
  if (record_every < 1)
    throw std::invalid_argument("record_every must be at least 1");
  if (initial.n_queues != cfg.n_queues)
    throw std::invalid_argument("fluid state and config sizes differ");
  const ClassMeans d = derive(cfg);
  bool track_g = true;
  for (double p : cfg.reroute_prob) track_g = track_g && p > 0;

  const long n_steps = std::lround(std::ceil(horizon / step - 1e-9));
  FluidTrajectory traj;
  traj.states.reserve(static_cast<std::size_t>(n_steps / record_every) + 2);
  traj.times.reserve(n_steps + 1);
  traj.total_mass_trace.reserve(n_steps + 1);
  if (track_g) traj.lyapunov_max.reserve(n_steps + 1);

  FluidState s = initial;
  StepWorkspace w(d.n);
  auto record_traces = [&] {
    traj.times.push_back(s.t);
    traj.total_mass_trace.push_back(total_mass(s));
    if (track_g) {
      const auto g = lyapunov_per_queue(s, cfg, d);
      traj.lyapunov_max.push_back(*std::max_element(g.begin(), g.end()));
    }
  };
  record_traces();
  traj.states.push_back(s);
  for (long k = 1; k <= n_steps; ++k) {
    euler_step(s, cfg, d, step, w);
    record_traces();
    if (k % record_every == 0 || k == n_steps) traj.states.push_back(s);
  }
  return traj;
}

double default_fluid_step(const NetworkConfig& cfg) {
  const ClassMeans d = derive(cfg);
  double smallest = kInf;
  for (double m : d.m_c) smallest = std::min(smallest, m);
  for (double m : d.m_u)
    if (std::isfinite(m)) smallest = std::min(smallest, m);
  for (double m : d.m_e) smallest = std::min(smallest, m);
  if (!std::isfinite(smallest) || smallest <= 0)
    throw std::domain_error("no finite class service mean");
  return 1e-3 * smallest;
}

void write_trajectory_csv(std::ostream& out, const FluidTrajectory& traj,
                          const NetworkConfig& cfg) {
  const ClassMeans d = derive(cfg);
  std::string line = "t,G";
  char buf[64];
  for (int i = 1; i <= cfg.n_queues; ++i) {
    std::snprintf(buf, sizeof(buf), ",G_%d", i);
    line += buf;
  }
  line += ",total_mass\n";
  out << line;
  auto append_num = [&buf](std::string& dst, double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    dst += buf;
  };
  for (const auto& s : traj.states) {
    const auto g = lyapunov_per_queue(s, cfg, d);
    line.clear();
    append_num(line, s.t);
    line += ',';
    append_num(line, *std::max_element(g.begin(), g.end()));
    for (double gi : g) {
      line += ',';
      append_num(line, gi);
    }
    line += ',';
    append_num(line, total_mass(s));
    line += '\n';
    out << line;
  }
}

}  // namespace specq
