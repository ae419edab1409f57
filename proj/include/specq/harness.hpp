#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "specq/analytic.hpp"
#include "specq/sim.hpp"

namespace specq {

// --- model and experiment files ---------------------------------------------
//
// Models are JSON with tagged distribution records, e.g.
//   {"S": {"kind": "bimodal", "s_m": 10, "s_M": 1000, "p": 0.99},
//    "X": {"kind": "deterministic", "v": 1}, "mode": "restart"}
// Supported kinds: deterministic{v}, exponential{rate}, uniform{lo,hi},
// bimodal{s_m,s_M,p}, hyperexponential{weights,rates}, pareto{alpha,s_min},
// truncated_pareto{alpha,s_min,cutoff}, erlang{k,rate}.
// Modes: restart, identical, resume.

SXModel parse_model(const std::string& json_text);
SXModel load_model(const std::string& path);

// Scheme from its short label: "slb", "rnd", "coc-2", "cos-2", "riq-2".
Scheme parse_scheme_label(const std::string& label);

// One experiment: which schemes to sweep over which offered loads.
// lambda_grid holds offered-load targets lambda*E[eta1] per queue; the
// harness converts them to per-queue arrival intensities.
struct ExperimentSpec {
  std::string name = "experiment";
  SXModel model;
  std::vector<Scheme> schemes;
  std::vector<double> lambda_grid;
  double tau = 0;        // used when auto_tau is false; +inf disables kills
  bool auto_tau = true;  // solve for the load-minimizing timeout
  int n_queues = 50;
  std::uint64_t n_jobs = 100000;
  int replications = 10;
  std::uint64_t seed = 1;
};

ExperimentSpec parse_experiment(const std::string& json_text);
ExperimentSpec load_experiment(const std::string& path);

// --- subcommand cores --------------------------------------------------------
// Stream-based so tests can capture the exact bytes the CLI prints.

struct LoadReport {
  double rho_over_lambda = 0;
  double load_reduction = 0;
  // "true", "false", or "degenerate" (no kills happen at this timeout)
  std::string theorem3;
  bool assumption3_at_tau = false;
};
LoadReport make_load_report(const SXModel& model, double tau);
void print_load_report(std::ostream& out, const LoadReport& report);

void print_timeout_solution(std::ostream& out, const TimeoutSolution& sol);

// CSV "tau,L", one row per grid point.
void write_lcurve_csv(std::ostream& out, const SXModel& model,
                      const std::vector<double>& tau_grid);

struct SweepRow {
  std::string scheme;
  double lambda_e = 0;
  double mean_response = 0;
  double ci95 = 0;
  bool diverged = false;
  std::uint64_t seed = 0;  // exact seed used, for single-point re-runs
};
// Runs schemes x lambda_grid x replications; rows come back in canonical
// order (scheme label, then load). Points run concurrently.
std::vector<SweepRow> run_sweep(const ExperimentSpec& spec);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct ConjectureRow {
  double lambda_e = 0;
  double sim_mean = 0;
  double formula_mean = 0;  // meaningless when unstable
  double relative_gap = 0;
  bool unstable = false;
};
// Speculative runs against the analytic response prediction per load.
std::vector<ConjectureRow> run_conjecture(const ExperimentSpec& spec);
void write_conjecture_csv(std::ostream& out,
                          const std::vector<ConjectureRow>& rows);

struct FluidVerdict {
  double g0 = 0;            // Lyapunov value of the initial state
  bool drained = false;     // reached 1e-3 * g0 within the horizon
  double t_drain = 0;       // first crossing time (0 when never crossed)
  double horizon = 0;
  double step = 0;
};
// Integrates the fluid network from unit mass spread evenly over the
// first-pass classes, writes the trajectory CSV, and reports drain.
// horizon <= 0 or step <= 0 pick the defaults (drain bound / mean-based).
FluidVerdict run_fluid_experiment(std::ostream& csv, const NetworkConfig& cfg,
                                  double horizon, double step);
void print_fluid_verdict(std::ostream& out, const FluidVerdict& verdict);

// Companion matplotlib scripts for the CSV outputs.
std::string plot_script_for_sweep(const std::string& csv_name);
std::string plot_script_for_conjecture(const std::string& csv_name);

}  // namespace specq
