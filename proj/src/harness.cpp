#include "specq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "specq/fluid.hpp"

namespace specq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// two-sided 95% Student t quantile by degrees of freedom
double t95(int df) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447,
                                 2.365,  2.306, 2.262, 2.228, 2.201, 2.179,
                                 2.160,  2.145, 2.131, 2.120, 2.110, 2.101,
                                 2.093,  2.086, 2.080, 2.074, 2.069, 2.064,
                                 2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (df < 1) return 0;
  if (df <= 30) return table[df - 1];
  return 1.96 + 2.4 / df;  // smooth tail toward the normal quantile
}

}  // namespace

// --- load report -------------------------------------------------------------

LoadReport make_load_report(const SXModel& model, double tau) {
  LoadReport rep;
  rep.rho_over_lambda = rho_symmetric(1.0, model, tau);
  rep.load_reduction = load_reduction(model, tau);
  try {
    rep.theorem3 = timeout_reduces_load(model, tau) ? "true" : "false";
  } catch (const std::domain_error&) {
    rep.theorem3 = "degenerate";  // nothing survives past this timeout
  }
  rep.assumption3_at_tau = restart_beats_continuation(model, tau);
  return rep;
}

void print_load_report(std::ostream& out, const LoadReport& report) {
  out << "rho_over_lambda=" << num(report.rho_over_lambda) << '\n'
      << "load_reduction=" << num(report.load_reduction) << '\n'
      << "theorem3=" << report.theorem3 << '\n'
      << "assumption3_at_tau=" << (report.assumption3_at_tau ? "true" : "false")
      << '\n';
}

void print_timeout_solution(std::ostream& out, const TimeoutSolution& sol) {
  out << "tau_star=" << num(sol.tau_star) << '\n'
      << "rho_at_star=" << num(sol.rho_at_star) << '\n'
      << "load_reduction_at_star=" << num(sol.load_reduction_at_star) << '\n'
      << "method=" << sol.method << '\n'
      << "hazard_nonincreasing=" << (sol.hazard_nonincreasing ? "true" : "false")
      << '\n'
      << "threshold_ratio_nondecreasing="
      << (sol.threshold_ratio_nondecreasing ? "true" : "false") << '\n'
      << "flat_load=" << (sol.flat_load ? "true" : "false") << '\n'
      << "grid_points=" << sol.grid_points << '\n';
}

// --- L(tau) curve -------------------------------------------------------------

void write_lcurve_csv(std::ostream& out, const SXModel& model,
                      const std::vector<double>& tau_grid) {
  out << "tau,L\n";
  for (double tau : tau_grid)
    out << num(tau) << ',' << num(load_reduction(model, tau)) << '\n';
}

// --- sweep ---------------------------------------------------------------------

namespace {

struct SweepPoint {
  Scheme scheme;
  std::string label;
  double lambda_e = 0;
  std::uint64_t seed = 0;
};

SweepRow run_point(const ExperimentSpec& spec, double tau,
                   const SweepPoint& point) {
  SweepRow row;
  row.scheme = point.label;
  row.lambda_e = point.lambda_e;
  row.seed = point.seed;
  const double lambda = point.lambda_e / eta1_mean(spec.model);
  const auto cfg =
      make_symmetric_config(spec.n_queues, lambda, spec.model, tau);
  const std::uint64_t warmup = spec.n_jobs / 10;

  std::vector<double> means;
  means.reserve(spec.replications);
  double single_ci = 0;
  for (int r = 0; r < spec.replications; ++r) {
    const auto stats = run(cfg, point.scheme, spec.n_jobs, warmup,
                           point.seed + static_cast<std::uint64_t>(r));
    means.push_back(stats.mean_response);
    row.diverged = row.diverged || stats.diverged;
    single_ci = stats.ci95_halfwidth;
  }
  double mean = 0;
  for (double m : means) mean += m;
  mean /= means.size();
  row.mean_response = mean;
  if (means.size() >= 2) {
    double var = 0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= means.size() - 1;
    row.ci95 = t95(static_cast<int>(means.size()) - 1) *
               std::sqrt(var / means.size());
  } else {
    row.ci95 = single_ci;  // fall back to the run's own batch interval
  }
  return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec) {
  if (spec.lambda_grid.empty() || spec.n_jobs == 0) return {};
  const double tau =
      spec.auto_tau ? optimal_timeout(spec.model).tau_star : spec.tau;

  std::vector<SweepPoint> points;
  for (const auto& scheme : spec.schemes)
    for (double le : spec.lambda_grid)
      points.push_back({scheme, scheme_label(scheme), le, 0});
  std::sort(points.begin(), points.end(),
            [](const SweepPoint& a, const SweepPoint& b) {
              if (a.label != b.label) return a.label < b.label;
              return a.lambda_e < b.lambda_e;
            });
  for (std::size_t k = 0; k < points.size(); ++k)
    points[k].seed = spec.seed + 7919 * k;  // documented row-seed rule

  std::vector<std::future<SweepRow>> futures;
  futures.reserve(points.size());
  for (const auto& p : points)
    futures.push_back(std::async(std::launch::async, [&spec, tau, &p] {
      return run_point(spec, tau, p);
    }));
  std::vector<SweepRow> rows;
  rows.reserve(points.size());
  for (auto& f : futures) rows.push_back(f.get());
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "scheme,lambda_e,mean_response,ci95,diverged,seed\n";
  for (const auto& r : rows)
    out << r.scheme << ',' << num(r.lambda_e) << ',' << num(r.mean_response)
        << ',' << num(r.ci95) << ',' << (r.diverged ? "true" : "false") << ','
        << r.seed << '\n';
}

// --- conjecture ---------------------------------------------------------------

std::vector<ConjectureRow> run_conjecture(const ExperimentSpec& spec) {
  if (spec.lambda_grid.empty() || spec.n_jobs == 0) return {};
  const double tau =
      spec.auto_tau ? optimal_timeout(spec.model).tau_star : spec.tau;

  ExperimentSpec sim_spec = spec;
  sim_spec.schemes = {Scheme::speculative()};
  sim_spec.auto_tau = false;
  sim_spec.tau = tau;
  const auto rows = run_sweep(sim_spec);

  std::vector<ConjectureRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    ConjectureRow c;
    c.lambda_e = r.lambda_e;
    c.sim_mean = r.mean_response;
    const double lambda = r.lambda_e / eta1_mean(spec.model);
    try {
      c.formula_mean = predict_response(lambda, spec.model, tau).mean_response;
      c.relative_gap = std::fabs(c.sim_mean - c.formula_mean) / c.formula_mean;
    } catch (const std::domain_error&) {
      c.unstable = true;
      c.formula_mean = 0;
      c.relative_gap = 0;
    }
    out.push_back(c);
  }
  return out;
}

void write_conjecture_csv(std::ostream& out,
                          const std::vector<ConjectureRow>& rows) {
  out << "lambda_e,sim_mean,formula_mean,relative_gap\n";
  for (const auto& r : rows) {
    out << num(r.lambda_e) << ',' << num(r.sim_mean) << ',';
    if (r.unstable)
      out << "unstable,nan\n";
    else
      out << num(r.formula_mean) << ',' << num(r.relative_gap) << '\n';
  }
}

// --- fluid ---------------------------------------------------------------------

FluidVerdict run_fluid_experiment(std::ostream& csv, const NetworkConfig& cfg,
                                  double horizon, double step) {
  FluidState init = make_fluid_state(cfg.n_queues);
  for (int i = 0; i < cfg.n_queues; ++i)
    set_mass(init, {FluidClass::kCompletes, i}, 1.0 / cfg.n_queues);

  FluidVerdict verdict;
  verdict.g0 = lyapunov(init, cfg).max;
  if (step <= 0) step = default_fluid_step(cfg);
  if (horizon <= 0) {
    const auto rho = nominal_load(cfg);
    double max_rho = 0, max_ratio = 0;
    for (int i = 0; i < cfg.n_queues; ++i) {
      max_rho = std::max(max_rho, rho[i]);
      max_ratio =
          std::max(max_ratio, cfg.reroute_prob[i] / cfg.service_rate[i]);
    }
    if (max_rho >= 1)
      throw std::domain_error(
          "unstable: drain horizon undefined; pass an explicit horizon");
    horizon = 2.0 * verdict.g0 * max_ratio / (1.0 - max_rho);
  }
  verdict.horizon = horizon;
  verdict.step = step;

  const long n_steps = std::lround(std::ceil(horizon / step));
  const int record_every =
      static_cast<int>(std::max(1L, n_steps / 400));
  const auto traj = fluid_integrate(cfg, init, horizon, step, record_every);
  write_trajectory_csv(csv, traj, cfg);

  const double floor = 1e-3 * verdict.g0;
  for (std::size_t k = 0; k < traj.lyapunov_max.size(); ++k) {
    if (traj.lyapunov_max[k] <= floor) {
      verdict.drained = true;
      verdict.t_drain = traj.times[k];
      break;
    }
  }
  return verdict;
}

void print_fluid_verdict(std::ostream& out, const FluidVerdict& verdict) {
  out << "g0=" << num(verdict.g0) << '\n'
      << "drained=" << (verdict.drained ? "true" : "false") << '\n'
      << "t_drain=" << num(verdict.t_drain) << '\n'
      << "horizon=" << num(verdict.horizon) << '\n'
      << "step=" << num(verdict.step) << '\n';
}

// --- plot scripts ---------------------------------------------------------------

std::string plot_script_for_sweep(const std::string& csv_name) {
  std::string s;
  s += "#!/usr/bin/env python3\n";
  s += "\"\"\"Plot mean response vs offered load per scheme.\"\"\"\n";
  s += "import csv\n";
  s += "from collections import defaultdict\n";
  s += "import matplotlib.pyplot as plt\n\n";
  s += "series = defaultdict(list)\n";
  s += "with open(\"" + csv_name + "\") as f:\n";
  s += "    for row in csv.DictReader(f):\n";
  s += "        if row[\"diverged\"] == \"true\":\n";
  s += "            continue\n";
  s += "        series[row[\"scheme\"]].append(\n";
  s += "            (float(row[\"lambda_e\"]), float(row[\"mean_response\"]),\n";
  s += "             float(row[\"ci95\"])))\n";
  s += "for scheme, pts in sorted(series.items()):\n";
  s += "    pts.sort()\n";
  s += "    xs, ys, es = zip(*pts)\n";
  s += "    plt.errorbar(xs, ys, yerr=es, marker=\"o\", capsize=3, label=scheme)\n";
  s += "plt.xlabel(\"offered load per queue\")\n";
  s += "plt.ylabel(\"mean response time\")\n";
  s += "plt.legend()\n";
  s += "plt.grid(True, alpha=0.3)\n";
  s += "plt.savefig(\"" + csv_name + ".png\", dpi=150, bbox_inches=\"tight\")\n";
  return s;
}

std::string plot_script_for_conjecture(const std::string& csv_name) {
  std::string s;
  s += "#!/usr/bin/env python3\n";
  s += "\"\"\"Plot simulated vs predicted mean response.\"\"\"\n";
  s += "import csv\n";
  s += "import matplotlib.pyplot as plt\n\n";
  s += "xs, sim, formula = [], [], []\n";
  s += "with open(\"" + csv_name + "\") as f:\n";
  s += "    for row in csv.DictReader(f):\n";
  s += "        if row[\"formula_mean\"] == \"unstable\":\n";
  s += "            continue\n";
  s += "        xs.append(float(row[\"lambda_e\"]))\n";
  s += "        sim.append(float(row[\"sim_mean\"]))\n";
  s += "        formula.append(float(row[\"formula_mean\"]))\n";
  s += "plt.plot(xs, sim, \"o-\", label=\"simulation\")\n";
  s += "plt.plot(xs, formula, \"s--\", label=\"prediction\")\n";
  s += "plt.xlabel(\"offered load per queue\")\n";
  s += "plt.ylabel(\"mean response time\")\n";
  s += "plt.legend()\n";
  s += "plt.grid(True, alpha=0.3)\n";
  s += "plt.savefig(\"" + csv_name + ".png\", dpi=150, bbox_inches=\"tight\")\n";
  return s;
}

}  // namespace specq
