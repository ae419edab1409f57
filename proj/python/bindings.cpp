// Python bindings for the core operations: distribution algebra, load and
// response formulas, timeout optimization, the discrete-event simulator, and
// the fluid drain experiment.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "specq/fluid.hpp"
#include "specq/harness.hpp"

namespace py = pybind11;
using namespace specq;

namespace {

template <typename D, typename... Args>
void bind_dist(py::module_& m, const char* name, const char* doc,
               const char* sig) {
  py::class_<D>(m, name, doc)
      .def(py::init<Args...>(), sig)
      .def("__repr__", [](const D& d) { return describe(DistributionSpec(d)); });
}

}  // namespace

PYBIND11_MODULE(_specq, m) {
  m.doc() =
      "Queueing toolkit for speculative (timeout-and-reroute) load "
      "balancing: exact load/response formulas, a deterministic "
      "discrete-event simulator, and fluid-limit drain checks.";

  // ---- distributions ----
  py::class_<Deterministic>(m, "Deterministic", "point mass at `value`")
      .def(py::init<double>(), py::arg("value"))
      .def_readonly("value", &Deterministic::value)
      .def("__repr__",
           [](const Deterministic& d) { return describe(DistributionSpec(d)); });
  py::class_<Exponential>(m, "Exponential", "rate parameter; mean = 1/rate")
      .def(py::init<double>(), py::arg("rate"))
      .def_readonly("rate", &Exponential::rate)
      .def("__repr__",
           [](const Exponential& d) { return describe(DistributionSpec(d)); });
  py::class_<Uniform>(m, "Uniform", "uniform on [lo, hi]")
      .def(py::init<double, double>(), py::arg("lo"), py::arg("hi"))
      .def("__repr__",
           [](const Uniform& d) { return describe(DistributionSpec(d)); });
  py::class_<Bimodal>(m, "Bimodal",
                      "two-point law: s_small w.p. p, s_large w.p. 1-p")
      .def(py::init<double, double, double>(), py::arg("s_small"),
           py::arg("s_large"), py::arg("p"))
      .def("__repr__",
           [](const Bimodal& d) { return describe(DistributionSpec(d)); });
  py::class_<HyperExponential>(m, "HyperExponential",
                               "mixture of exponentials")
      .def(py::init<std::vector<double>, std::vector<double>>(),
           py::arg("weights"), py::arg("rates"))
      .def("__repr__", [](const HyperExponential& d) {
        return describe(DistributionSpec(d));
      });
  py::class_<Pareto>(m, "Pareto", "ccdf (s_min/t)^alpha for t >= s_min")
      .def(py::init<double, double>(), py::arg("alpha"), py::arg("s_min"))
      .def("__repr__",
           [](const Pareto& d) { return describe(DistributionSpec(d)); });
  py::class_<TruncatedPareto>(m, "TruncatedPareto",
                              "Pareto restricted to [s_min, cutoff]")
      .def(py::init<double, double, double>(), py::arg("alpha"),
           py::arg("s_min"), py::arg("cutoff"))
      .def("__repr__", [](const TruncatedPareto& d) {
        return describe(DistributionSpec(d));
      });
  py::class_<Erlang>(m, "Erlang", "sum of `shape` exponential phases")
      .def(py::init<int, double>(), py::arg("shape"), py::arg("rate"))
      .def("__repr__",
           [](const Erlang& d) { return describe(DistributionSpec(d)); });

  m.def("dist_mean", [](const DistributionSpec& d) { return mean(d); },
        py::arg("dist"));
  m.def("dist_second_moment",
        [](const DistributionSpec& d) { return second_moment(d); },
        py::arg("dist"));
  m.def("dist_ccdf",
        [](const DistributionSpec& d, double t) { return ccdf(d, t); },
        py::arg("dist"), py::arg("t"), "strict P(D > t)");
  m.def("dist_quantile",
        [](const DistributionSpec& d, double q) { return quantile(d, q); },
        py::arg("dist"), py::arg("q"));
  m.def("dist_truncated_mean",
        [](const DistributionSpec& d, double z) { return truncated_mean(d, z); },
        py::arg("dist"), py::arg("z"), "E[min(D, z)]");

  // ---- service model ----
  py::enum_<RetryMode>(m, "RetryMode")
      .value("RESTART", RetryMode::kRestart)
      .value("IDENTICAL", RetryMode::kIdentical)
      .value("RESUME", RetryMode::kResume);

  py::class_<SXModel>(m, "SXModel",
                      "service = slowdown S x intrinsic size X; retries share "
                      "X and follow the retry mode")
      .def(py::init([](DistributionSpec S, DistributionSpec X,
                       RetryMode mode) {
             SXModel mm;
             mm.S = std::move(S);
             mm.X = std::move(X);
             mm.mode = mode;
             return mm;
           }),
           py::arg("S"), py::arg("X") = DistributionSpec(Deterministic(1.0)),
           py::arg("mode") = RetryMode::kRestart)
      .def_readwrite("S", &SXModel::S)
      .def_readwrite("X", &SXModel::X)
      .def_readwrite("mode", &SXModel::mode)
      .def("__repr__", [](const SXModel& mm) { return describe(mm); });

  m.def("eta1_mean", &eta1_mean, py::arg("model"),
        "mean first-execution work E[S X]");
  m.def("eta1_second_moment", &eta1_second_moment, py::arg("model"));
  m.def("eta1_ccdf", &eta1_ccdf, py::arg("model"), py::arg("t"));
  m.def("eta1_quantile", &eta1_quantile, py::arg("model"), py::arg("q"));
  m.def("eta2_mean_given_timeout", &eta2_mean_given_timeout, py::arg("model"),
        py::arg("t"), "E[retry work | first execution outlives t]");

  // ---- load, stability, and timeout formulas ----
  m.def("rho_symmetric", &rho_symmetric, py::arg("lam"), py::arg("model"),
        py::arg("tau"),
        "per-queue utilization of the symmetric unit-rate system");
  m.def("load_reduction", &load_reduction, py::arg("model"), py::arg("tau"),
        "rho(tau) / (lambda E[eta1]); < 1 means killing at tau helps");
  m.def("timeout_reduces_load", &timeout_reduces_load, py::arg("model"),
        py::arg("tau"));
  m.def("restart_beats_continuation", &restart_beats_continuation,
        py::arg("model"), py::arg("z"));
  m.def("value_function", &value_function, py::arg("model"), py::arg("tau"),
        py::arg("t"),
        "expected remaining cost at age t under a kill-at-tau policy");

  py::class_<TimeoutSolution>(m, "TimeoutSolution")
      .def_readonly("tau_star", &TimeoutSolution::tau_star)
      .def_readonly("rho_at_star", &TimeoutSolution::rho_at_star)
      .def_readonly("load_reduction_at_star",
                    &TimeoutSolution::load_reduction_at_star)
      .def_readonly("method", &TimeoutSolution::method)
      .def_readonly("hazard_nonincreasing",
                    &TimeoutSolution::hazard_nonincreasing)
      .def_readonly("threshold_ratio_nondecreasing",
                    &TimeoutSolution::threshold_ratio_nondecreasing)
      .def_readonly("flat_load", &TimeoutSolution::flat_load)
      .def_readonly("grid_points", &TimeoutSolution::grid_points);
  m.def("optimal_timeout",
        [](const SXModel& mm, double lam) { return optimal_timeout(mm, lam); },
        py::arg("model"), py::arg("lam") = 1.0);
  m.def("optimal_timeout",
        [](const SXModel& mm, double lam, double lo, double hi) {
          return optimal_timeout(mm, lam, lo, hi);
        },
        py::arg("model"), py::arg("lam"), py::arg("lo"), py::arg("hi"));

  py::class_<ResponsePrediction>(m, "ResponsePrediction")
      .def_readonly("batch_second_moment",
                    &ResponsePrediction::batch_second_moment)
      .def_readonly("mean_wait", &ResponsePrediction::mean_wait)
      .def_readonly("mean_response", &ResponsePrediction::mean_response)
      .def_readonly("utilization", &ResponsePrediction::utilization);
  m.def("predict_response", &predict_response, py::arg("lam"),
        py::arg("model"), py::arg("tau"),
        "stationary mean-response estimate for the symmetric system");

  // ---- network configuration ----
  py::class_<NetworkConfig>(m, "NetworkConfig")
      .def_readwrite("n_queues", &NetworkConfig::n_queues)
      .def_readwrite("arrival_intensity", &NetworkConfig::arrival_intensity)
      .def_readwrite("service_rate", &NetworkConfig::service_rate)
      .def_readwrite("dispatch_prob", &NetworkConfig::dispatch_prob)
      .def_readwrite("reroute_prob", &NetworkConfig::reroute_prob)
      .def_readwrite("timeout", &NetworkConfig::timeout)
      .def_readwrite("model", &NetworkConfig::model);
  m.def("make_symmetric_config", &make_symmetric_config, py::arg("n_queues"),
        py::arg("lam"), py::arg("model"), py::arg("tau"));
  m.def("nominal_load", &nominal_load, py::arg("config"),
        "per-queue utilization including re-routed retries");

  // ---- simulator ----
  py::class_<Scheme>(m, "Scheme")
      .def_readonly("kind", &Scheme::kind)
      .def_readonly("tau", &Scheme::tau)
      .def_readonly("fanout", &Scheme::fanout)
      .def("__repr__", [](const Scheme& s) { return scheme_label(s); });
  py::enum_<SchemeKind>(m, "SchemeKind")
      .value("SPECULATIVE", SchemeKind::kSpeculative)
      .value("RANDOM", SchemeKind::kRandom)
      .value("REPLICATE_CANCEL_ON_COMPLETE",
             SchemeKind::kReplicateCancelOnComplete)
      .value("LEAST_LEFT_WORKLOAD", SchemeKind::kLeastLeftWorkload)
      .value("REPLICATE_TO_IDLE", SchemeKind::kReplicateToIdle);
  m.def("speculative", &Scheme::speculative,
        py::arg("timeouts") = std::vector<double>{},
        "timeout-and-reroute dispatch; empty timeouts use the config's");
  m.def("random_dispatch", &Scheme::random_dispatch);
  m.def("replicate", &Scheme::replicate, py::arg("fanout"),
        "d copies, cancel on first completion");
  m.def("least_workload", &Scheme::least_workload, py::arg("fanout"),
        "probe d queues, join the least unfinished work");
  m.def("replicate_to_idle", &Scheme::replicate_to_idle, py::arg("fanout"),
        "copies to the idle queues among d probes, else one random copy");
  m.def("scheme_label", &scheme_label, py::arg("scheme"));
  m.def("parse_scheme_label", &parse_scheme_label, py::arg("label"));

  py::enum_<Discipline>(m, "Discipline")
      .value("FCFS", Discipline::kFcfs)
      .value("FRESH_FIRST", Discipline::kFreshFirst)
      .value("RETRY_FIRST", Discipline::kRetryFirst);

  py::class_<SimStats>(m, "SimStats")
      .def_readonly("jobs_arrived", &SimStats::jobs_arrived)
      .def_readonly("jobs_completed", &SimStats::jobs_completed)
      .def_readonly("mean_response", &SimStats::mean_response)
      .def_readonly("ci95_halfwidth", &SimStats::ci95_halfwidth)
      .def_readonly("completed_first_pass", &SimStats::completed_first_pass)
      .def_readonly("killed_first_pass", &SimStats::killed_first_pass)
      .def_readonly("completed_second_pass", &SimStats::completed_second_pass)
      .def_readonly("messages_per_job", &SimStats::messages_per_job)
      .def_readonly("max_total_queue", &SimStats::max_total_queue)
      .def_readonly("diverged", &SimStats::diverged);
  m.def("run",
        [](const NetworkConfig& cfg, const Scheme& scheme,
           std::uint64_t n_jobs, std::uint64_t warmup, std::uint64_t seed,
           Discipline discipline) {
          return run(cfg, scheme, n_jobs, warmup, seed, discipline);
        },
        py::arg("config"), py::arg("scheme"), py::arg("n_jobs"),
        py::arg("warmup"), py::arg("seed"),
        py::arg("discipline") = Discipline::kFcfs,
        py::call_guard<py::gil_scoped_release>(),
        "simulate n_jobs arrivals and drain; statistics exclude the first "
        "`warmup` jobs; identical arguments give identical results");

  // ---- experiment harness ----
  m.def("parse_model", &parse_model, py::arg("json_text"));
  m.def("load_model", &load_model, py::arg("path"));

  py::class_<ExperimentSpec>(m, "ExperimentSpec")
      .def(py::init<>())
      .def_readwrite("name", &ExperimentSpec::name)
      .def_readwrite("model", &ExperimentSpec::model)
      .def_readwrite("schemes", &ExperimentSpec::schemes)
      .def_readwrite("lambda_grid", &ExperimentSpec::lambda_grid)
      .def_readwrite("tau", &ExperimentSpec::tau)
      .def_readwrite("auto_tau", &ExperimentSpec::auto_tau)
      .def_readwrite("n_queues", &ExperimentSpec::n_queues)
      .def_readwrite("n_jobs", &ExperimentSpec::n_jobs)
      .def_readwrite("replications", &ExperimentSpec::replications)
      .def_readwrite("seed", &ExperimentSpec::seed);
  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("scheme", &SweepRow::scheme)
      .def_readonly("lambda_e", &SweepRow::lambda_e)
      .def_readonly("mean_response", &SweepRow::mean_response)
      .def_readonly("ci95", &SweepRow::ci95)
      .def_readonly("diverged", &SweepRow::diverged)
      .def_readonly("seed", &SweepRow::seed);
  py::class_<ConjectureRow>(m, "ConjectureRow")
      .def_readonly("lambda_e", &ConjectureRow::lambda_e)
      .def_readonly("sim_mean", &ConjectureRow::sim_mean)
      .def_readonly("formula_mean", &ConjectureRow::formula_mean)
      .def_readonly("relative_gap", &ConjectureRow::relative_gap)
      .def_readonly("unstable", &ConjectureRow::unstable);
  m.def("run_sweep", &run_sweep, py::arg("spec"),
        py::call_guard<py::gil_scoped_release>(),
        "schemes x loads x replications; canonical (scheme, load) order");
  m.def("run_conjecture", &run_conjecture, py::arg("spec"),
        py::call_guard<py::gil_scoped_release>(),
        "speculative simulation vs the analytic response prediction");

  // ---- fluid drain ----
  py::class_<FluidVerdict>(m, "FluidVerdict")
      .def_readonly("g0", &FluidVerdict::g0)
      .def_readonly("drained", &FluidVerdict::drained)
      .def_readonly("t_drain", &FluidVerdict::t_drain)
      .def_readonly("horizon", &FluidVerdict::horizon)
      .def_readonly("step", &FluidVerdict::step);
  m.def("fluid_experiment",
        [](const NetworkConfig& cfg, double horizon, double step) {
          std::ostringstream csv;
          const FluidVerdict v = run_fluid_experiment(csv, cfg, horizon, step);
          return std::make_pair(v, csv.str());
        },
        py::arg("config"), py::arg("horizon") = 0.0, py::arg("step") = 0.0,
        "integrate from unit mass spread over the first-pass classes; "
        "returns (verdict, trajectory CSV text)");
}
