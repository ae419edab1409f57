#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "specq/harness.hpp"

using namespace specq;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* kBimodalJson =
    R"({"S": {"kind": "bimodal", "s_m": 10, "s_M": 1000, "p": 0.99},)"
    R"( "X": {"kind": "deterministic", "v": 1}, "mode": "restart"})";

SXModel bimodal_model() { return parse_model(kBimodalJson); }

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("model json roundtrips every distribution kind") {
  struct Case {
    const char* json;
    double mean;
  };
  const Case cases[] = {
      {R"({"S": {"kind": "deterministic", "v": 3}})", 3.0},
      {R"({"S": {"kind": "exponential", "rate": 0.5}})", 2.0},
      {R"({"S": {"kind": "uniform", "lo": 2, "hi": 6}})", 4.0},
      {R"({"S": {"kind": "bimodal", "s_m": 10, "s_M": 1000, "p": 0.99}})",
       19.9},
      {R"({"S": {"kind": "hyperexponential",
                 "weights": [0.5, 0.5], "rates": [1, 2]}})",
       0.75},
      {R"({"S": {"kind": "pareto", "alpha": 1.5, "s_min": 1}})", 3.0},
      {R"({"S": {"kind": "erlang", "k": 2, "rate": 1}})", 2.0},
  };
  for (const auto& c : cases) {
    CAPTURE(c.json);
    const SXModel m = parse_model(c.json);
    CHECK(eta1_mean(m) == doctest::Approx(c.mean).epsilon(1e-12));
  }
  // truncated tail: mean lies strictly between s_min and the untruncated mean
  const SXModel t = parse_model(
      R"({"S": {"kind": "truncated_pareto",
                "alpha": 1.5, "s_min": 1, "cutoff": 100}})");
  CHECK(eta1_mean(t) > 1.0);
  CHECK(eta1_mean(t) < 3.0);
}

TEST_CASE("model defaults: unit slowdown and restart mode") {
  const SXModel m = parse_model(R"({"S": {"kind": "exponential", "rate": 1}})");
  CHECK(m.mode == RetryMode::kRestart);
  CHECK(eta1_mean(m) == doctest::Approx(1.0));  // X defaults to the constant 1
  const SXModel r = parse_model(
      R"({"S": {"kind": "deterministic", "v": 2}, "mode": "resume"})");
  CHECK(r.mode == RetryMode::kResume);
  const SXModel i = parse_model(
      R"({"S": {"kind": "deterministic", "v": 2}, "mode": "identical"})");
  CHECK(i.mode == RetryMode::kIdentical);
}

TEST_CASE("malformed model json is rejected with a clear message") {
  CHECK_THROWS_WITH_AS(parse_model("not json at all"),
                       doctest::Contains("invalid model file"),
                       std::invalid_argument);
  CHECK_THROWS_AS(parse_model(R"({"X": {"kind": "deterministic", "v": 1}})"),
                  std::invalid_argument);  // S is required
  CHECK_THROWS_AS(parse_model(R"({"S": {"kind": "zeta", "q": 2}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_model(R"({"S": {"kind": "exponential"}})"),
                  std::invalid_argument);  // missing rate
  CHECK_THROWS_AS(
      parse_model(
          R"({"S": {"kind": "deterministic", "v": 1}, "mode": "redo"})"),
      std::invalid_argument);
  CHECK_THROWS_WITH_AS(load_model("no_such_model_file.json"),
                       doctest::Contains("cannot open file"),
                       std::invalid_argument);
}

TEST_CASE("scheme labels parse and print back unchanged") {
  for (const char* label : {"slb", "rnd", "coc-2", "coc-5", "cos-1", "cos-3",
                            "riq-2", "riq-4"}) {
    CAPTURE(label);
    CHECK(scheme_label(parse_scheme_label(label)) == label);
  }
  for (const char* label : {"", "xyz", "coc", "coc-", "coc-0", "coc-2x",
                            "riq--3", "slb-2"}) {
    CAPTURE(label);
    CHECK_THROWS_WITH_AS(parse_scheme_label(label),
                         doctest::Contains("unknown scheme label"),
                         std::invalid_argument);
  }
}

TEST_CASE("experiment json fills defaults and validates") {
  const std::string text = std::string(R"({"name": "demo", "model": )") +
                           kBimodalJson +
                           R"(, "schemes": ["slb", "rnd", "coc-2"],
                              "lambda_grid": [0.4, 0.8],
                              "tau": 10, "n_queues": 8, "n_jobs": 5000,
                              "replications": 3, "seed": 42})";
  const ExperimentSpec spec = parse_experiment(text);
  CHECK(spec.name == "demo");
  CHECK(spec.schemes.size() == 3);
  CHECK(scheme_label(spec.schemes[2]) == "coc-2");
  CHECK(spec.lambda_grid == std::vector<double>{0.4, 0.8});
  CHECK(spec.tau == 10.0);
  CHECK_FALSE(spec.auto_tau);
  CHECK(spec.n_queues == 8);
  CHECK(spec.n_jobs == 5000);
  CHECK(spec.replications == 3);
  CHECK(spec.seed == 42);

  const ExperimentSpec bare = parse_experiment(
      std::string(R"({"model": )") + kBimodalJson + "}");
  CHECK(bare.schemes.size() == 1);
  CHECK(scheme_label(bare.schemes[0]) == "slb");
  CHECK(bare.auto_tau);
  CHECK(bare.n_queues == 50);
  CHECK(bare.replications == 10);

  const ExperimentSpec auto_tau = parse_experiment(
      std::string(R"({"model": )") + kBimodalJson + R"(, "tau": "auto"})");
  CHECK(auto_tau.auto_tau);

  CHECK_THROWS_AS(parse_experiment(R"({"name": "no model"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      parse_experiment(std::string(R"({"model": )") + kBimodalJson +
                       R"(, "lambda_grid": [0.4, -1]})"),
      std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(std::string(R"({"model": )") +
                                   kBimodalJson + R"(, "tau": "soon"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(std::string(R"({"model": )") +
                                   kBimodalJson + R"(, "replications": 0})"),
                  std::invalid_argument);
}

TEST_CASE("load report reproduces the frozen bimodal values") {
  const SXModel m = bimodal_model();
  const LoadReport at10 = make_load_report(m, 10.0);
  CHECK(at10.rho_over_lambda == doctest::Approx(10.199).epsilon(1e-12));
  CHECK(at10.load_reduction ==
        doctest::Approx(0.5125125628140703).epsilon(1e-12));
  CHECK(at10.theorem3 == "true");
  CHECK(at10.assumption3_at_tau);

  const LoadReport at5 = make_load_report(m, 5.0);
  CHECK(at5.load_reduction ==
        doctest::Approx(1.2512562814070352).epsilon(1e-12));
  CHECK(at5.theorem3 == "false");

  // no job ever outlives an infinite timeout, so the comparison degenerates
  const LoadReport never = make_load_report(m, kInf);
  CHECK(never.load_reduction == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(never.theorem3 == "degenerate");
}

TEST_CASE("load report prints stable key=value bytes") {
  std::ostringstream out;
  print_load_report(out, make_load_report(bimodal_model(), 10.0));
  CHECK(out.str() ==
        "rho_over_lambda=10.199\n"
        "load_reduction=0.512512562814\n"
        "theorem3=true\n"
        "assumption3_at_tau=true\n");
}

TEST_CASE("timeout solution prints every diagnostic field") {
  std::ostringstream out;
  print_timeout_solution(out, optimal_timeout(bimodal_model()));
  const std::string text = out.str();
  CHECK(text.find("tau_star=10\n") != std::string::npos);
  CHECK(text.find("load_reduction_at_star=0.512512562814\n") !=
        std::string::npos);
  CHECK(text.find("method=direct-minimization\n") != std::string::npos);
  for (const char* key : {"rho_at_star=", "hazard_nonincreasing=",
                          "threshold_ratio_nondecreasing=", "flat_load=",
                          "grid_points="}) {
    CAPTURE(key);
    CHECK(text.find(key) != std::string::npos);
  }
}

TEST_CASE("lcurve csv is byte-stable with the frozen values") {
  std::ostringstream out;
  write_lcurve_csv(out, bimodal_model(), {5, 10, 100});
  CHECK(out.str() ==
        "tau,L\n"
        "5,1.25125628141\n"
        "10,0.512512562814\n"
        "100,0.557738693467\n");
}

TEST_CASE("sweep rows come back in canonical order with derived seeds") {
  ExperimentSpec spec;
  spec.model = parse_model(R"({"S": {"kind": "exponential", "rate": 1}})");
  spec.schemes = {Scheme::speculative(), Scheme::random_dispatch()};
  spec.lambda_grid = {0.5, 0.3};  // deliberately unsorted
  spec.tau = 2.0;
  spec.auto_tau = false;
  spec.n_queues = 2;
  spec.n_jobs = 4000;
  spec.replications = 2;
  spec.seed = 5;

  const auto rows = run_sweep(spec);
  REQUIRE(rows.size() == 4);
  const char* want_scheme[] = {"rnd", "rnd", "slb", "slb"};
  const double want_load[] = {0.3, 0.5, 0.3, 0.5};
  for (int k = 0; k < 4; ++k) {
    CAPTURE(k);
    CHECK(rows[k].scheme == want_scheme[k]);
    CHECK(rows[k].lambda_e == want_load[k]);
    CHECK(rows[k].seed == 5 + 7919 * static_cast<std::uint64_t>(k));
    CHECK(rows[k].mean_response > 0);
    CHECK(rows[k].ci95 > 0);
    CHECK_FALSE(rows[k].diverged);
  }
  // more offered load, slower responses (same scheme, same seed rule)
  CHECK(rows[0].mean_response < rows[1].mean_response);

  const auto again = run_sweep(spec);
  REQUIRE(again.size() == rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(again[k].mean_response == rows[k].mean_response);
    CHECK(again[k].ci95 == rows[k].ci95);
  }
}

TEST_CASE("single-replication sweep keeps the run's own interval") {
  ExperimentSpec spec;
  spec.model = parse_model(R"({"S": {"kind": "exponential", "rate": 1}})");
  spec.schemes = {Scheme::random_dispatch()};
  spec.lambda_grid = {0.5};
  spec.tau = kInf;
  spec.auto_tau = false;
  spec.n_queues = 2;
  spec.n_jobs = 4000;
  spec.replications = 1;
  const auto rows = run_sweep(spec);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].ci95 > 0);
}

TEST_CASE("empty sweep writes only the csv header") {
  ExperimentSpec spec;
  spec.model = bimodal_model();
  spec.schemes = {Scheme::speculative()};
  spec.lambda_grid = {0.4};
  spec.n_jobs = 0;
  CHECK(run_sweep(spec).empty());
  std::ostringstream out;
  write_sweep_csv(out, {});
  CHECK(out.str() == "scheme,lambda_e,mean_response,ci95,diverged,seed\n");
}

TEST_CASE("sweep csv prints one row per point") {
  std::vector<SweepRow> rows(1);
  rows[0].scheme = "coc-2";
  rows[0].lambda_e = 0.25;
  rows[0].mean_response = 1.5;
  rows[0].ci95 = 0.125;
  rows[0].diverged = false;
  rows[0].seed = 77;
  std::ostringstream out;
  write_sweep_csv(out, rows);
  CHECK(out.str() ==
        "scheme,lambda_e,mean_response,ci95,diverged,seed\n"
        "coc-2,0.25,1.5,0.125,false,77\n");
}

TEST_CASE("conjecture rows track the analytic prediction at light load") {
  ExperimentSpec spec;
  spec.model = bimodal_model();
  spec.lambda_grid = {0.4};
  spec.tau = 10.0;
  spec.auto_tau = false;
  spec.n_queues = 4;
  spec.n_jobs = 30000;
  spec.replications = 2;
  spec.seed = 11;
  const auto rows = run_conjecture(spec);
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].unstable);
  CHECK(rows[0].formula_mean > 0);
  CHECK(rows[0].relative_gap < 0.10);
}

TEST_CASE("conjecture marks loads past the stability boundary") {
  ExperimentSpec spec;
  spec.model = bimodal_model();
  spec.lambda_grid = {2.5};  // utilization 2.5 * 10.199 / 19.9 > 1
  spec.tau = 10.0;
  spec.auto_tau = false;
  spec.n_queues = 2;
  spec.n_jobs = 3000;
  spec.replications = 1;
  const auto rows = run_conjecture(spec);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].unstable);
  std::ostringstream out;
  write_conjecture_csv(out, rows);
  CHECK(out.str().find("unstable,nan\n") != std::string::npos);
  CHECK(out.str().rfind("lambda_e,sim_mean,formula_mean,relative_gap\n", 0) ==
        0);
}

TEST_CASE("fluid experiment drains a stable symmetric network") {
  const SXModel m = bimodal_model();
  const auto cfg =
      make_symmetric_config(2, 0.5 / eta1_mean(m), m, 10.0);
  std::ostringstream csv;
  const FluidVerdict v = run_fluid_experiment(csv, cfg, 0, 0);
  CHECK(v.g0 == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(v.drained);
  CHECK(v.t_drain > 0);
  CHECK(v.t_drain <= v.horizon);
  CHECK(v.step > 0);
  CHECK(csv.str().rfind("t,G,G_1,G_2,total_mass\n", 0) == 0);

  std::ostringstream out;
  print_fluid_verdict(out, v);
  CHECK(out.str().find("drained=true\n") != std::string::npos);
  for (const char* key : {"g0=", "t_drain=", "horizon=", "step="}) {
    CAPTURE(key);
    CHECK(out.str().find(key) != std::string::npos);
  }
}

TEST_CASE("fluid experiment refuses a drain bound past saturation") {
  const SXModel m = bimodal_model();
  const auto cfg =
      make_symmetric_config(2, 2.5 / eta1_mean(m), m, 10.0);
  std::ostringstream csv;
  CHECK_THROWS_AS(run_fluid_experiment(csv, cfg, 0, 0), std::domain_error);
  // explicit horizon works; it just reports not drained
  const FluidVerdict v = run_fluid_experiment(csv, cfg, 5.0, 0.01);
  CHECK_FALSE(v.drained);
  CHECK(v.t_drain == 0);
}

TEST_CASE("plot scripts are self-contained matplotlib programs") {
  for (const auto& text : {plot_script_for_sweep("runs.csv"),
                           plot_script_for_conjecture("gaps.csv")}) {
    CHECK(text.find("import matplotlib") != std::string::npos);
    CHECK(text.find(".csv") != std::string::npos);
    CHECK(text.find("savefig") != std::string::npos);
  }
  CHECK(plot_script_for_sweep("runs.csv").find("\"runs.csv\"") !=
        std::string::npos);
  CHECK(plot_script_for_conjecture("gaps.csv").find("\"gaps.csv\"") !=
        std::string::npos);
}

TEST_SUITE_END();
