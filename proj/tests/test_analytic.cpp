#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "specq/analytic.hpp"
#include "specq/quadrature.hpp"
#include "specq/rng.hpp"

using namespace specq;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SXModel bimodal_restart() {
  return {Bimodal(10, 1000, 0.99), Deterministic(1), RetryMode::kRestart};
}

SXModel pareto_restart() {
  return {Pareto(1.5, 1), Deterministic(1), RetryMode::kRestart};
}

SXModel hyperexp_restart() {
  return {HyperExponential({0.99, 0.01}, {1.0, 1.0 / 99.0}), Deterministic(1),
          RetryMode::kRestart};
}

SXModel erlang_restart() {
  return {Erlang(2, 1.0), Deterministic(1), RetryMode::kRestart};
}

template <typename Fn>
bool throws_message_contains(Fn&& fn, const std::string& needle) {
  try {
    fn();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_SUITE("analytic") {

TEST_CASE("config validation rejects broken inputs") {
  const SXModel m = bimodal_restart();
  NetworkConfig ok = make_symmetric_config(3, 0.1, m, 10.0);
  CHECK_NOTHROW(validate(ok));

  NetworkConfig bad = ok;
  bad.n_queues = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = ok;
  bad.arrival_intensity = -0.1;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = ok;
  bad.service_rate[1] = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = ok;
  bad.dispatch_prob = {0.5, 0.5};  // wrong length
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = ok;
  bad.dispatch_prob = {0.6, 0.6, -0.2};
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = ok;
  bad.reroute_prob = {0.5, 0.4, 0.2};  // sums to 1.1
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = ok;
  bad.timeout[2] = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = ok;
  bad.timeout[0] = kInf;  // disabling the kill on one queue is fine
  CHECK_NOTHROW(validate(bad));

  CHECK(throws_message_contains(
      [&] {
        NetworkConfig c = ok;
        c.dispatch_prob = {1.1, 0.0, -0.1};
        validate(c);
      },
      "invalid config"));
}

TEST_CASE("nominal load matches the hand-evaluated two-queue chain") {
  // Queue 1 gets every arrival, kills it at tau=3 (the job needs 5), and the
  // retry always lands on queue 2 where it runs to completion.
  NetworkConfig cfg;
  cfg.n_queues = 2;
  cfg.arrival_intensity = 0.07;
  cfg.service_rate = {1.0, 1.0};
  cfg.dispatch_prob = {1.0, 0.0};
  cfg.reroute_prob = {0.0, 1.0};
  cfg.timeout = {3.0, 3.0};
  cfg.model = {Deterministic(5), Deterministic(1), RetryMode::kRestart};

  const auto rho = nominal_load(cfg);
  REQUIRE(rho.size() == 2);
  CHECK(rho[0] == doctest::Approx(0.07 * 2 * 3).epsilon(1e-13));
  CHECK(rho[1] == doctest::Approx(0.07 * 2 * 5).epsilon(1e-13));

  // Unequal service rates scale both occupancy terms.
  cfg.service_rate = {2.0, 0.5};
  cfg.timeout = {1.5, 1.5};  // still kills: 5/2 > 1.5
  const auto rho2 = nominal_load(cfg);
  CHECK(rho2[0] == doctest::Approx(0.07 * 2 * 1.5).epsilon(1e-13));
  CHECK(rho2[1] == doctest::Approx(0.07 * 2 * (5.0 / 0.5)).epsilon(1e-13));
}

TEST_CASE("nominal load without kills is plain offered work") {
  NetworkConfig cfg;
  cfg.n_queues = 3;
  cfg.arrival_intensity = 0.02;
  cfg.service_rate = {1.0, 2.0, 4.0};
  cfg.dispatch_prob = {0.5, 0.3, 0.2};
  cfg.reroute_prob = {0.1, 0.2, 0.7};
  cfg.timeout = {kInf, kInf, kInf};
  cfg.model = bimodal_restart();

  const auto rho = nominal_load(cfg);
  const double total = 0.02 * 3;
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(rho[i] == doctest::Approx(total * cfg.dispatch_prob[i] * 19.9 /
                                    cfg.service_rate[i])
                        .epsilon(1e-13));
}

TEST_CASE("symmetric networks collapse to the single-queue load") {
  const SXModel m = bimodal_restart();
  for (double tau : {5.0, 10.0, 100.0, 999.0}) {
    const auto cfg = make_symmetric_config(5, 0.03, m, tau);
    const auto rho = nominal_load(cfg);
    const double want = rho_symmetric(0.03, m, tau);
    for (double r : rho) CHECK(r == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("memoryless sizes make killing a no-op for the load") {
  const SXModel exp1{Exponential(1.0), Deterministic(1), RetryMode::kRestart};
  const SXModel exp2{Exponential(0.5), Deterministic(2), RetryMode::kRestart};
  for (double tau : {0.1, 1.0, 10.0}) {
    CHECK(std::fabs(load_reduction(exp1, tau) - 1.0) < 1e-9);
    CHECK(std::fabs(load_reduction(exp2, tau) - 1.0) < 1e-9);
  }
}

TEST_CASE("bimodal load reduction matches the closed-form values") {
  const SXModel m = bimodal_restart();
  // rho/lambda = tau + 19.9 below the small atom, 10.099 + 0.01 tau above it.
  CHECK(load_reduction(m, 5.0) ==
        doctest::Approx(1.2512562814070352).epsilon(1e-13));
  CHECK(load_reduction(m, 10.0) ==
        doctest::Approx(0.5125125628140703).epsilon(1e-13));
  CHECK(load_reduction(m, 100.0) ==
        doctest::Approx(0.5577386934673367).epsilon(1e-13));
  CHECK(load_reduction(m, 999.0) ==
        doctest::Approx((10.099 + 9.99) / 19.9).epsilon(1e-13));
  CHECK(load_reduction(m, kInf) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rho_symmetric(0.04, m, 10.0) ==
        doctest::Approx(0.40796).epsilon(1e-13));
}

TEST_CASE("killing helps exactly when the retry beats the residual work") {
  const SXModel bi = bimodal_restart();
  CHECK(timeout_reduces_load(bi, 10.0));   // 19.9 < 990
  CHECK(!timeout_reduces_load(bi, 5.0));   // all jobs time out
  CHECK(!timeout_reduces_load(erlang_restart(), 1.0));
  // Memoryless boundary: equality, not strict.
  const SXModel ex{Exponential(1.0), Deterministic(1), RetryMode::kRestart};
  CHECK(!timeout_reduces_load(ex, 2.0));
  CHECK(throws_message_contains([&] { timeout_reduces_load(bi, 1000.0); },
                                "degenerate conditioning"));

  // Quadrature oracle for the Erlang case: mean residual life at tau=1.
  const SXModel er = erlang_restart();
  const double surv = eta1_ccdf(er, 1.0);
  const double residual =
      integrate([&](double s) { return eta1_ccdf(er, s); }, 1.0, 60.0,
                {1e-12, 1e-14, 48}) /
      surv;
  CHECK(residual > 0);
  CHECK(eta2_mean_given_timeout(er, 1.0) == doctest::Approx(2.0));
  CHECK(!(2.0 < residual));  // retry is not cheaper, so no reduction
}

TEST_CASE("load sign equivalence holds across models and timeouts") {
  const std::vector<SXModel> models = {
      bimodal_restart(),
      {Exponential(0.7), Deterministic(1), RetryMode::kRestart},
      erlang_restart(),
      hyperexp_restart(),
      {Pareto(1.5, 1), Deterministic(1), RetryMode::kRestart},
      {TruncatedPareto(2.5, 1, 50), Uniform(0.25, 1.75), RetryMode::kResume},
      {Bimodal(10, 1000, 0.99), Uniform(0.5, 2), RetryMode::kIdentical},
  };
  const std::vector<double> taus = {0.5, 1.0, 2.0, 5.0, 10.0,
                                    20.0, 50.0, 100.0, 500.0};
  int checked = 0;
  for (const auto& m : models) {
    for (double tau : taus) {
      if (eta1_ccdf(m, tau) <= 0) continue;
      const double surv = eta1_ccdf(m, tau);
      const double margin = eta2_mean_given_timeout(m, tau) -
                            (eta1_upper_mean(m, tau) / surv - tau);
      const double excess = load_reduction(m, tau) - 1.0;
      if (std::fabs(margin) * surv <= 1e-9) continue;  // too close to call
      CHECK(timeout_reduces_load(m, tau) == (margin < 0));
      CHECK(timeout_reduces_load(m, tau) == (excess < 0));
      ++checked;
    }
  }
  CHECK(checked > 40);
}

TEST_CASE("fresh-copy dominance brackets the known trigger regions") {
  const SXModel bi = bimodal_restart();
  CHECK(!restart_beats_continuation(bi, 10.0 - 1e-4));
  CHECK(restart_beats_continuation(bi, 10.0 + 1e-4));
  CHECK(restart_beats_continuation(bi, 980.1 - 1e-4));
  CHECK(!restart_beats_continuation(bi, 980.1 + 1e-4));

  const SXModel pa = pareto_restart();
  CHECK(!restart_beats_continuation(pa, 1.5 - 1e-4));
  CHECK(restart_beats_continuation(pa, 1.5 + 1e-4));
  CHECK(restart_beats_continuation(pa, 1e6));

  const SXModel he = hyperexp_restart();
  for (double z : {0.01, 1.0, 100.0}) CHECK(restart_beats_continuation(he, z));

  const SXModel er = erlang_restart();
  for (double z : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0})
    CHECK(!restart_beats_continuation(er, z));

  // Continuous slowdown factor: every x in (0.5, 2) must pass the test.
  const SXModel biu{Bimodal(10, 1000, 0.99), Uniform(0.5, 2),
                    RetryMode::kRestart};
  CHECK(restart_beats_continuation(biu, 30.0));   // z/x in (15, 60)
  CHECK(!restart_beats_continuation(biu, 5.0));   // z/x below the small atom
  CHECK(!restart_beats_continuation(biu, 600.0)); // z/0.5 overshoots 980.1
}

TEST_CASE("fresh-copy dominance implies load reduction") {
  struct Case { SXModel m; std::vector<double> zs; };
  const std::vector<Case> cases = {
      {bimodal_restart(), {11, 100, 500, 900}},
      {pareto_restart(), {2, 5, 100}},
      {hyperexp_restart(), {0.01, 1, 100}},
  };
  for (const auto& c : cases) {
    for (double z : c.zs) {
      REQUIRE(restart_beats_continuation(c.m, z));
      CHECK(load_reduction(c.m, z) < 1.0);
    }
  }
  // With a deterministic slowdown the two conditions coincide.
  const SXModel bi = bimodal_restart();
  for (double z : {3.0, 9.0, 10.5, 42.0, 979.0, 981.0, 995.0})
    CHECK(restart_beats_continuation(bi, z) == (load_reduction(bi, z) < 1.0));
}

TEST_CASE("optimal timeout solves the heavy-tail benchmark by hazard rule") {
  const SXModel pa = pareto_restart();  // independent retry, E[eta2] = 3
  const auto sol = optimal_timeout(pa);
  CHECK(sol.method == "hazard-rule");
  CHECK(sol.tau_star == doctest::Approx(4.5).epsilon(1e-7));
  CHECK(std::fabs(sol.tau_star - 4.5) < 1e-6);
  CHECK(sol.hazard_nonincreasing);
  CHECK(sol.threshold_ratio_nondecreasing);
  CHECK(!sol.flat_load);
  CHECK(sol.rho_at_star ==
        doctest::Approx(rho_symmetric(1.0, pa, sol.tau_star)).epsilon(1e-12));
  CHECK(sol.load_reduction_at_star ==
        doctest::Approx(sol.rho_at_star / 3.0).epsilon(1e-12));

  // Minimality on a grid (the solver promise, 1e-6 relative).
  for (int i = 0; i <= 200; ++i) {
    const double tau = 0.5 + (50.0 - 0.5) * i / 200.0;
    CHECK(sol.rho_at_star <= rho_symmetric(1.0, pa, tau) * (1 + 1e-6));
  }

  // The arrival intensity scales the reported utilization, not tau*.
  const auto sol2 = optimal_timeout(pa, 0.25);
  CHECK(sol2.tau_star == doctest::Approx(sol.tau_star).epsilon(1e-10));
  CHECK(sol2.rho_at_star ==
        doctest::Approx(0.25 * sol.rho_at_star).epsilon(1e-12));
  CHECK(sol2.load_reduction_at_star ==
        doctest::Approx(sol.load_reduction_at_star).epsilon(1e-12));
}

TEST_CASE("optimal timeout lands on the small atom by direct minimization") {
  const SXModel bi = bimodal_restart();
  const auto sol = optimal_timeout(bi);
  CHECK(sol.method == "direct-minimization");
  CHECK(sol.tau_star == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(sol.load_reduction_at_star ==
        doctest::Approx(0.5125125628140703).epsilon(1e-12));
  CHECK(!sol.hazard_nonincreasing);  // no density, diagnostics stay false
  for (double tau : {5.0, 10.0, 11.0, 100.0, 500.0, 999.0})
    CHECK(sol.rho_at_star <= rho_symmetric(1.0, bi, tau) * (1 + 1e-9));
}

TEST_CASE("optimal timeout reports a flat load for memoryless sizes") {
  const SXModel ex{Exponential(0.25), Deterministic(1), RetryMode::kRestart};
  const auto sol = optimal_timeout(ex, 0.2);
  CHECK(sol.method == "hazard-rule");
  CHECK(sol.flat_load);
  // The whole interval is stationary; the solver returns its start.
  CHECK(sol.tau_star == doctest::Approx(eta1_quantile(ex, 1e-4)).epsilon(1e-9));
  CHECK(sol.rho_at_star == doctest::Approx(0.2 * 4.0).epsilon(1e-9));
}

TEST_CASE("optimal timeout reports an increasing-hazard law through diagnostics") {
  const auto sol = optimal_timeout(erlang_restart());
  CHECK(sol.method == "hazard-rule");
  CHECK(!sol.hazard_nonincreasing);
  // Killing never pays here; whatever crossed first is not a real optimum.
  CHECK(load_reduction(erlang_restart(), sol.tau_star) >= 1.0 - 1e-9);
}

TEST_CASE("optimal timeout reports an empty stopping set") {
  // Uniform sizes have an increasing hazard that never falls back below the
  // independent-retry threshold 1/E[eta2] = 2/3.
  const SXModel un{Uniform(1, 2), Deterministic(1), RetryMode::kRestart};
  CHECK(throws_message_contains([&] { optimal_timeout(un); },
                                "no finite crossing in interval"));
}

TEST_CASE("value function hits its boundary and load identities") {
  const SXModel pa = pareto_restart();
  for (double tau : {2.0, 4.5, 9.0}) {
    CHECK(value_function(pa, tau, tau) ==
          doctest::Approx(eta2_mean_given_timeout(pa, tau)).epsilon(1e-12));
    CHECK(value_function(pa, tau, 0.0) ==
          doctest::Approx(rho_symmetric(1.0, pa, tau)).epsilon(1e-8));
  }

  const std::vector<SXModel> models = {
      pa,
      {Exponential(0.8), Deterministic(1), RetryMode::kRestart},
      hyperexp_restart(),
      {Uniform(1, 3), Deterministic(1), RetryMode::kResume},
      {TruncatedPareto(1.5, 1, 100), Uniform(0.5, 1.5), RetryMode::kRestart},
  };
  for (const auto& m : models) {
    const double hi = eta1_quantile(m, 0.999);
    for (int i = 1; i <= 20; ++i) {
      const double tau = hi * i / 20.0;
      if (eta1_ccdf(m, tau) <= 0) continue;
      const double v0 = value_function(m, tau, 0.0);
      const double rho = rho_symmetric(1.0, m, tau);
      CHECK(v0 == doctest::Approx(rho).epsilon(1e-8));
    }
  }

  // Remaining cost is minimized in tau exactly at the optimal kill time.
  CHECK(value_function(pa, 4.5, 0.0) < value_function(pa, 4.3, 0.0));
  CHECK(value_function(pa, 4.5, 0.0) < value_function(pa, 4.7, 0.0));

  CHECK(throws_message_contains(
      [] {
        const SXModel un{Uniform(0, 1), Deterministic(1), RetryMode::kRestart};
        value_function(un, 1.0, 1.0);
      },
      "zero survivor mass"));
}

TEST_CASE("response prediction reproduces the frozen batch arithmetic") {
  const SXModel bi = bimodal_restart();
  const auto pred = predict_response(0.04, bi, 10.0);
  CHECK(pred.batch_second_moment == doctest::Approx(199.0).epsilon(1e-12));
  CHECK(pred.utilization == doctest::Approx(0.40796).epsilon(1e-12));
  const double want_w = 0.5 * 0.04 * 1.01 * 199.0 / (1 - 0.40796);
  CHECK(pred.mean_wait == doctest::Approx(want_w).epsilon(1e-12));
  CHECK(pred.mean_wait == doctest::Approx(6.789744).epsilon(1e-6));
  CHECK(pred.mean_response ==
        doctest::Approx(1.01 * want_w + 10.199).epsilon(1e-12));
  CHECK(pred.mean_response == doctest::Approx(17.056641).epsilon(1e-6));
}

TEST_CASE("response prediction without kills is the classic single-queue law") {
  const SXModel bi = bimodal_restart();
  const double lambda = 0.04;
  const auto pred = predict_response(lambda, bi, kInf);
  const double rho = lambda * 19.9;
  const double pk = lambda * 10099.0 / (2 * (1 - rho)) + 19.9;
  CHECK(pred.utilization == doctest::Approx(rho).epsilon(1e-13));
  CHECK(pred.mean_response == doctest::Approx(pk).epsilon(1e-12));
}

TEST_CASE("response prediction degrades gracefully at the edges") {
  const SXModel bi = bimodal_restart();
  CHECK(throws_message_contains([&] { predict_response(0.2, bi, kInf); },
                                "unstable"));
  CHECK(throws_message_contains(
      [&] { predict_response(0.1, pareto_restart(), 10.0); },
      "infinite second moment"));
  // The load itself only needs first moments, so it must keep working.
  CHECK(rho_symmetric(0.1, pareto_restart(), 10.0) > 0);

  // Vanishing arrivals: the response collapses to the per-job work.
  const auto slow = predict_response(1e-9, bi, 10.0);
  CHECK(slow.mean_response == doctest::Approx(10.199).epsilon(1e-6));
}

TEST_CASE("worst nominal load dominates the best symmetric load") {
  const SXModel bi = bimodal_restart();

  // Equality at the symmetric optimum.
  const auto sym = make_symmetric_config(4, 0.04, bi, 10.0);
  const auto g0 = nominal_vs_symmetric_gap(sym);
  CHECK(g0.max_nominal_load ==
        doctest::Approx(g0.best_symmetric_load).epsilon(1e-6));

  // Lopsided dispatch is strictly worse.
  NetworkConfig lop = sym;
  lop.dispatch_prob = {1.0, 0.0, 0.0, 0.0};
  const auto g1 = nominal_vs_symmetric_gap(lop);
  CHECK(g1.max_nominal_load > g1.best_symmetric_load * 2);

  // Seeded random configs never beat the symmetric optimum.
  RngStream rs(20260819, 0, 1);
  int tried = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + static_cast<int>(rs.next_u64() % 4);
    NetworkConfig cfg;
    cfg.n_queues = n;
    cfg.arrival_intensity = 0.01 + 0.03 * rs.uniform();
    cfg.service_rate.assign(n, 1.0);
    cfg.model = (rep % 2 == 0) ? bi : hyperexp_restart();
    auto draw_probs = [&] {
      std::vector<double> p(n);
      double total = 0;
      for (double& v : p) {
        v = 0.05 + rs.uniform();
        total += v;
      }
      double acc = 0;
      for (int i = 0; i + 1 < n; ++i) {
        p[i] /= total;
        acc += p[i];
      }
      p[n - 1] = 1.0 - acc;  // exact unit sum
      return p;
    };
    cfg.dispatch_prob = draw_probs();
    cfg.reroute_prob = draw_probs();
    cfg.timeout.resize(n);
    for (double& t : cfg.timeout)
      t = std::exp(std::log(5.0) + rs.uniform() * std::log(400.0));
    const auto g = nominal_vs_symmetric_gap(cfg);
    CHECK(g.max_nominal_load >= g.best_symmetric_load - 1e-9);
    ++tried;
  }
  CHECK(tried == 100);

  CHECK(throws_message_contains(
      [&] {
        NetworkConfig c = sym;
        c.service_rate[1] = 2.0;
        nominal_vs_symmetric_gap(c);
      },
      "requires homogeneous rates"));
}

TEST_CASE("load converges to the no-kill level for light tails") {
  const std::vector<SXModel> models = {
      {Exponential(0.5), Deterministic(1), RetryMode::kRestart},
      {Erlang(3, 2.0), Uniform(0.5, 1.5), RetryMode::kRestart},
      bimodal_restart(),
      {Uniform(1, 3), Deterministic(1), RetryMode::kResume},
      hyperexp_restart(),
      {Deterministic(7), Deterministic(1), RetryMode::kIdentical},
  };
  for (const auto& m : models) {
    const double no_kill = eta1_mean(m);
    const double tau = 1e6 * no_kill;
    CHECK(rho_symmetric(1.0, m, tau) ==
          doctest::Approx(no_kill).epsilon(1e-6));
  }
}

}  // TEST_SUITE
