#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specq/analytic.hpp"

namespace specq {

// Dispatch policies the simulator can drive.
//
//  - kSpeculative: route by the dispatch probabilities; a first execution
//    that reaches the queue's timeout is killed and re-routed by the
//    re-route probabilities, where the retry runs to completion.
//  - kRandom: route by the dispatch probabilities, run to completion.
//  - kReplicateCancelOnComplete: place copies on d distinct uniformly
//    sampled queues; the first finished copy cancels the others, including
//    copies already in service.
//  - kLeastLeftWorkload: probe d distinct uniformly sampled queues and join
//    the one with the least unfinished work (ties uniform at random).
//  - kReplicateToIdle: probe d distinct uniformly sampled queues and place a
//    copy on every idle one (first completion cancels the rest); when none
//    is idle, send a single copy to a uniform pick among the d.
enum class SchemeKind {
  kSpeculative,
  kRandom,
  kReplicateCancelOnComplete,
  kLeastLeftWorkload,
  kReplicateToIdle,
};

struct Scheme {
  SchemeKind kind = SchemeKind::kRandom;
  // Speculative only: per-queue timeouts; empty means "use the config's".
  std::vector<double> tau;
  // Number of queues probed per job for the three sampling schemes.
  int fanout = 0;

  static Scheme speculative(std::vector<double> timeouts = {});
  static Scheme random_dispatch();
  static Scheme replicate(int fanout);         // cancel-on-complete
  static Scheme least_workload(int fanout);    // cancel-on-start equivalent
  static Scheme replicate_to_idle(int fanout);
};

// Short stable label used in CSV output: "slb", "rnd", "coc-2", "cos-2",
// "riq-2".
std::string scheme_label(const Scheme& s);

// Order in which a server picks its next job. Retries are the re-routed
// second executions of the speculative scheme; every other scheme has only
// fresh jobs, making all three orders identical there. No preemption.
enum class Discipline { kFcfs, kFreshFirst, kRetryFirst };

enum class VisitOutcome { kCompleted, kTimedOut, kCancelled };

// One service episode. Copies cancelled while still waiting never start and
// get no visit entry.
struct Visit {
  int queue = -1;
  double t_start = 0;
  double t_end = 0;
  VisitOutcome outcome = VisitOutcome::kCompleted;
};

// Per-job log row, collected only when a log sink is passed to run().
struct JobRecord {
  std::uint64_t id = 0;
  double t_arrive = 0;
  double x = 0;   // intrinsic size
  double s1 = 0;  // first slowdown draw
  double s2 = 0;  // retry slowdown (speculative; meaning set by retry mode)
  double t_depart = 0;
  std::vector<Visit> visits;
};

struct SimStats {
  std::uint64_t jobs_arrived = 0;
  std::uint64_t jobs_completed = 0;
  double mean_response = 0;    // excludes warmup jobs
  double ci95_halfwidth = 0;   // batch-means interval over 20 batches
  // Per-class completion counts, indexed by queue.
  std::vector<std::uint64_t> completed_first_pass;
  std::vector<std::uint64_t> killed_first_pass;
  std::vector<std::uint64_t> completed_second_pass;
  double messages_per_job = 0;
  std::uint64_t max_total_queue = 0;  // peak number of jobs in the system
  bool diverged = false;  // rising response trend over the run
  // Post-warmup window measurements backing the flow-balance check.
  double window_time = 0;
  double window_time_avg_jobs = 0;
  double window_arrival_rate = 0;
};

// Runs one simulation: n_jobs arrivals, then drains the system to empty.
// Statistics exclude the first `warmup` jobs. Identical (cfg, scheme, seed)
// give bit-identical results; job realizations are pure functions of
// (seed, job id), so different schemes on one seed share common random
// numbers. Throws std::invalid_argument("invalid scheme parameters") for a
// malformed scheme and propagates config validation errors.
SimStats run(const NetworkConfig& cfg, const Scheme& scheme,
             std::uint64_t n_jobs, std::uint64_t warmup, std::uint64_t seed,
             Discipline discipline = Discipline::kFcfs,
             std::vector<JobRecord>* job_log = nullptr);

// Convenience wrappers for the sampling schemes.
SimStats run_replicated(const NetworkConfig& cfg, int fanout,
                        std::uint64_t n_jobs, std::uint64_t warmup,
                        std::uint64_t seed);
SimStats run_least_workload(const NetworkConfig& cfg, int fanout,
                            std::uint64_t n_jobs, std::uint64_t warmup,
                            std::uint64_t seed);
SimStats run_replicate_to_idle(const NetworkConfig& cfg, int fanout,
                               std::uint64_t n_jobs, std::uint64_t warmup,
                               std::uint64_t seed);

// Control messages per job: measured for the speculative, random, and
// replicate-to-idle schemes; exactly 2*fanout - 1 for the two schemes whose
// overhead is deterministic (probe/dispatch plus cancellations).
double message_overhead(const SimStats& stats, const Scheme& scheme);

// Flow-balance check over the post-warmup window: time-average number in
// system against measured arrival rate times mean response.
struct FlowBalanceRecord {
  double time_avg_jobs = 0;
  double rate_times_wait = 0;
  double relative_gap = 0;
  bool skipped = false;  // diverged or degenerate runs are not checked
};
FlowBalanceRecord littles_law_check(const SimStats& stats);

}  // namespace specq
