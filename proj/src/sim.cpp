#include "specq/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "specq/rng.hpp"

namespace specq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Scheme plumbing

void validate_scheme(const Scheme& s, const NetworkConfig& cfg) {
  const int n = cfg.n_queues;
  switch (s.kind) {
    case SchemeKind::kSpeculative:
      if (!s.tau.empty()) {
        if (static_cast<int>(s.tau.size()) != n)
          throw std::invalid_argument("invalid scheme parameters");
        for (double t : s.tau)
          if (!(t > 0))  // rejects NaN and nonpositive; +inf disables kills
            throw std::invalid_argument("invalid scheme parameters");
      }
      return;
    case SchemeKind::kRandom:
      return;
    case SchemeKind::kReplicateCancelOnComplete:
    case SchemeKind::kReplicateToIdle:
      if (s.fanout < 2 || s.fanout > n)
        throw std::invalid_argument("invalid scheme parameters");
      return;
    case SchemeKind::kLeastLeftWorkload:
      // fanout 1 degenerates to random dispatch; kept legal so the two can
      // be compared under common seeds.
      if (s.fanout < 1 || s.fanout > n)
        throw std::invalid_argument("invalid scheme parameters");
      return;
  }
  throw std::invalid_argument("invalid scheme parameters");
}

// ---------------------------------------------------------------------------
// Engine state

struct QueueEntry {
  std::uint64_t job = 0;
  int copy = 0;
  double service = 0;   // server time this entry will consume
  bool retry = false;   // re-routed second execution (speculative only)
  std::uint64_t seq = 0;  // global enqueue sequence, for FCFS order
};

struct Server {
  std::deque<QueueEntry> fresh;
  std::deque<QueueEntry> retries;
  bool busy = false;
  QueueEntry current;
  std::uint64_t epoch = 0;  // bumped on every service start and preemption
  double virtual_done = 0;  // absolute time the present backlog finishes
};

enum class CopyState : std::uint8_t { kQueued, kServing, kGone };

struct ActiveJob {
  double t_arrive = 0;
  double x = 0, s1 = 0, s2 = 0;
  bool done = false;
  // Copy bookkeeping for the replication schemes (single-copy schemes use
  // just copy 0).
  std::vector<int> copy_queue;
  std::vector<CopyState> copy_state;
  std::vector<Visit> visits;  // filled only when tracing
};

struct Event {
  double t = 0;
  std::uint64_t seq = 0;
  int kind = 0;  // 0 = arrival, 1 = service end
  int queue = -1;
  std::uint64_t epoch = 0;
  std::uint64_t job = 0;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.t != b.t) return a.t > b.t;
    return a.seq > b.seq;
  }
};

constexpr int kArrival = 0;
constexpr int kServiceEnd = 1;

double draw_categorical(const std::vector<double>& prob, double u) {
  // returns the index as double to keep a single return path; callers cast
  std::size_t i = 0;
  for (; i + 1 < prob.size(); ++i) {
    if (u < prob[i]) break;
    u -= prob[i];
  }
  return static_cast<double>(i);
}

class Simulation {
 public:
  Simulation(const NetworkConfig& cfg, const Scheme& scheme,
             std::uint64_t n_jobs, std::uint64_t warmup, std::uint64_t seed,
             Discipline discipline, std::vector<JobRecord>* job_log)
      : cfg_(cfg),
        scheme_(scheme),
        n_jobs_(n_jobs),
        warmup_(warmup),
        seed_(seed),
        discipline_(discipline),
        log_(job_log) {
    validate(cfg_);
    validate_scheme(scheme_, cfg_);
    if (n_jobs_ <= warmup_)
      throw std::invalid_argument("warmup must be smaller than the job count");
    if (!(cfg_.arrival_intensity > 0))
      throw std::invalid_argument("positive arrival rate required");
    if (scheme_.kind == SchemeKind::kSpeculative && scheme_.tau.empty())
      scheme_.tau = cfg_.timeout;
    servers_.resize(cfg_.n_queues);
    stats_.completed_first_pass.assign(cfg_.n_queues, 0);
    stats_.killed_first_pass.assign(cfg_.n_queues, 0);
    stats_.completed_second_pass.assign(cfg_.n_queues, 0);
    responses_.assign(n_jobs_ - warmup_, 0.0);
  }

  SimStats run() {
    schedule_arrival(0, 0.0);
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.t;
      if (ev.kind == kArrival)
        handle_arrival(ev.job);
      else
        handle_service_end(ev.queue, ev.epoch);
    }
    finalize_stats();
    return stats_;
  }

 private:
  RngStream stream(std::uint64_t job, std::uint64_t tag) const {
    return RngStream(seed_, job, tag);
  }

  void push_event(Event ev) {
    ev.seq = event_seq_++;
    events_.push(ev);
  }

  void schedule_arrival(std::uint64_t job, double from) {
    if (job >= n_jobs_) return;
    const double rate = cfg_.arrival_intensity * cfg_.n_queues;
    auto rs = stream(job, rng_tag::kInterarrival);
    push_event({from - std::log(rs.uniform()) / rate, 0, kArrival, -1, 0, job});
  }

  // --- system-size accounting ------------------------------------------

  void change_population(int delta) {
    pop_integral_ += (now_ - last_pop_change_) * population_;
    last_pop_change_ = now_;
    population_ += delta;
    if (population_ > 0 &&
        static_cast<std::uint64_t>(population_) > stats_.max_total_queue)
      stats_.max_total_queue = static_cast<std::uint64_t>(population_);
  }

  // --- queue/service machinery ------------------------------------------

  void start_service(int q, const QueueEntry& e) {
    Server& srv = servers_[q];
    srv.busy = true;
    srv.current = e;
    ++srv.epoch;
    ActiveJob& job = jobs_.at(e.job);
    job.copy_state[e.copy] = CopyState::kServing;
    if (log_)
      job.visits.push_back({q, now_, now_ + e.service, VisitOutcome::kCompleted});
    push_event({now_ + e.service, 0, kServiceEnd, q, srv.epoch, e.job});
  }

  // Pops the next runnable entry per the discipline, skipping copies whose
  // job has already been completed elsewhere (lazy cancellation).
  void start_next(int q) {
    Server& srv = servers_[q];
    auto runnable = [&](std::deque<QueueEntry>& dq) -> bool {
      while (!dq.empty()) {
        if (jobs_.at(dq.front().job).done) {
          jobs_.at(dq.front().job).copy_state[dq.front().copy] =
              CopyState::kGone;
          dq.pop_front();
          continue;
        }
        return true;
      }
      return false;
    };
    const bool has_fresh = runnable(srv.fresh);
    const bool has_retry = runnable(srv.retries);
    std::deque<QueueEntry>* pick = nullptr;
    if (has_fresh && has_retry) {
      switch (discipline_) {
        case Discipline::kFcfs:
          pick = srv.fresh.front().seq < srv.retries.front().seq
                     ? &srv.fresh
                     : &srv.retries;
          break;
        case Discipline::kFreshFirst: pick = &srv.fresh; break;
        case Discipline::kRetryFirst: pick = &srv.retries; break;
      }
    } else if (has_fresh) {
      pick = &srv.fresh;
    } else if (has_retry) {
      pick = &srv.retries;
    }
    if (!pick) {
      srv.busy = false;
      return;
    }
    const QueueEntry e = pick->front();
    pick->pop_front();
    start_service(q, e);
  }

  void enqueue(int q, QueueEntry e) {
    e.seq = entry_seq_++;
    Server& srv = servers_[q];
    if (!srv.busy) {
      start_service(q, e);
      return;
    }
    (e.retry ? srv.retries : srv.fresh).push_back(e);
  }

  bool queue_idle(int q) const {
    const Server& srv = servers_[q];
    if (srv.busy) return false;
    // pending entries can only be cancelled copies; check for live ones
    for (const auto& e : srv.fresh)
      if (!jobs_.at(e.job).done) return false;
    for (const auto& e : srv.retries)
      if (!jobs_.at(e.job).done) return false;
    return true;
  }

  // d distinct queues, uniform without replacement (partial Fisher-Yates).
  std::vector<int> sample_distinct(std::uint64_t job, int d) {
    std::vector<int> idx(cfg_.n_queues);
    std::iota(idx.begin(), idx.end(), 0);
    auto rs = stream(job, rng_tag::kDispatch);
    for (int c = 0; c < d; ++c) {
      const int pick =
          c + static_cast<int>(rs.next_u64() %
                               static_cast<std::uint64_t>(cfg_.n_queues - c));
      std::swap(idx[c], idx[pick]);
    }
    idx.resize(d);
    return idx;
  }

  // --- arrivals -----------------------------------------------------------

  void handle_arrival(std::uint64_t id) {
    ++stats_.jobs_arrived;
    if (id == warmup_) {
      window_start_time_ = now_;
      window_start_integral_ =
          pop_integral_ + (now_ - last_pop_change_) * population_;
    }
    change_population(+1);

    ActiveJob job;
    job.t_arrive = now_;
    {
      auto rs = stream(id, rng_tag::kSharedX);
      job.x = sample(cfg_.model.X, rs);
    }
    {
      auto rs = stream(id, rng_tag::kFirstSize);
      job.s1 = sample(cfg_.model.S, rs);
    }
    if (cfg_.model.mode == RetryMode::kRestart) {
      auto rs = stream(id, rng_tag::kRetrySize);
      job.s2 = sample(cfg_.model.S, rs);
    } else {
      job.s2 = job.s1;  // identical retries; resume computes work at kill time
    }

    switch (scheme_.kind) {
      case SchemeKind::kSpeculative:
      case SchemeKind::kRandom: {
        auto rs = stream(id, rng_tag::kDispatch);
        const int q = static_cast<int>(
            draw_categorical(cfg_.dispatch_prob, rs.uniform()));
        job.copy_queue = {q};
        job.copy_state = {CopyState::kQueued};
        jobs_.emplace(id, std::move(job));
        const double eta1 = jobs_.at(id).s1 * jobs_.at(id).x;
        double service = eta1 / cfg_.service_rate[q];
        if (scheme_.kind == SchemeKind::kSpeculative)
          service = std::min(service, scheme_.tau[q]);
        enqueue(q, {id, 0, service, false, 0});
        messages_ += 1;
        break;
      }
      case SchemeKind::kReplicateCancelOnComplete: {
        const auto picks = sample_distinct(id, scheme_.fanout);
        job.copy_queue = picks;
        job.copy_state.assign(picks.size(), CopyState::kQueued);
        jobs_.emplace(id, std::move(job));
        const ActiveJob& j = jobs_.at(id);
        for (std::size_t c = 0; c < picks.size(); ++c) {
          auto rs = stream(id, rng_tag::kReplicaSize + c);
          const double s_c = sample(cfg_.model.S, rs);
          enqueue(picks[c], {id, static_cast<int>(c),
                             s_c * j.x / cfg_.service_rate[picks[c]], false,
                             0});
        }
        messages_ += 2 * scheme_.fanout - 1;
        break;
      }
      case SchemeKind::kLeastLeftWorkload: {
        const auto picks = sample_distinct(id, scheme_.fanout);
        double best = kInf;
        std::vector<int> argmin;
        for (int q : picks) {
          const double w = std::max(0.0, servers_[q].virtual_done - now_);
          if (w < best) {
            best = w;
            argmin.assign(1, q);
          } else if (w == best) {
            argmin.push_back(q);
          }
        }
        int q = argmin.front();
        if (argmin.size() > 1) {
          auto rs = stream(id, rng_tag::kTieBreak);
          q = argmin[rs.next_u64() % argmin.size()];
        }
        job.copy_queue = {q};
        job.copy_state = {CopyState::kQueued};
        jobs_.emplace(id, std::move(job));
        const ActiveJob& j = jobs_.at(id);
        const double service = j.s1 * j.x / cfg_.service_rate[q];
        servers_[q].virtual_done =
            std::max(servers_[q].virtual_done, now_) + service;
        enqueue(q, {id, 0, service, false, 0});
        messages_ += 2 * scheme_.fanout - 1;
        break;
      }
      case SchemeKind::kReplicateToIdle: {
        const auto picks = sample_distinct(id, scheme_.fanout);
        std::vector<int> idle;
        for (int q : picks)
          if (queue_idle(q)) idle.push_back(q);
        messages_ += scheme_.fanout;  // probes
        if (idle.empty()) {
          auto rs = stream(id, rng_tag::kQueuePick);
          const int q = picks[rs.next_u64() % picks.size()];
          job.copy_queue = {q};
          job.copy_state = {CopyState::kQueued};
          jobs_.emplace(id, std::move(job));
          const ActiveJob& j = jobs_.at(id);
          enqueue(q, {id, 0, j.s1 * j.x / cfg_.service_rate[q], false, 0});
          messages_ += 1;
        } else {
          job.copy_queue = idle;
          job.copy_state.assign(idle.size(), CopyState::kQueued);
          jobs_.emplace(id, std::move(job));
          const ActiveJob& j = jobs_.at(id);
          for (std::size_t c = 0; c < idle.size(); ++c) {
            auto rs = stream(id, rng_tag::kReplicaSize + c);
            const double s_c = c == 0 ? j.s1 : sample(cfg_.model.S, rs);
            enqueue(idle[c], {id, static_cast<int>(c),
                              s_c * j.x / cfg_.service_rate[idle[c]], false,
                              0});
          }
          messages_ += idle.size() + (idle.size() > 1 ? idle.size() - 1 : 0);
        }
        break;
      }
    }
    schedule_arrival(id + 1, now_);
  }

  // --- service completion --------------------------------------------------

  void handle_service_end(int q, std::uint64_t epoch) {
    Server& srv = servers_[q];
    if (!srv.busy || srv.epoch != epoch) return;  // stale after preemption
    const QueueEntry entry = srv.current;
    ActiveJob& job = jobs_.at(entry.job);

    const bool first_pass = !entry.retry;
    const double eta1 = job.s1 * job.x;
    const bool killed = scheme_.kind == SchemeKind::kSpeculative &&
                        first_pass &&
                        eta1 / cfg_.service_rate[q] > scheme_.tau[q];
    if (killed) {
      ++stats_.killed_first_pass[q];
      if (log_) job.visits.back().outcome = VisitOutcome::kTimedOut;
      double eta2 = 0;
      switch (cfg_.model.mode) {
        case RetryMode::kRestart: eta2 = job.s2 * job.x; break;
        case RetryMode::kIdentical: eta2 = eta1; break;
        case RetryMode::kResume:
          eta2 = eta1 - cfg_.service_rate[q] * scheme_.tau[q];
          break;
      }
      auto rs = stream(entry.job, rng_tag::kReroute);
      const int dest = static_cast<int>(
          draw_categorical(cfg_.reroute_prob, rs.uniform()));
      job.copy_queue[0] = dest;
      job.copy_state[0] = CopyState::kQueued;
      messages_ += 1;
      // enqueue before freeing the server so a self-re-routed retry competes
      // for it under the discipline like any other waiting job
      enqueue(dest, {entry.job, 0, eta2 / cfg_.service_rate[dest], true, 0});
      start_next(q);
      return;
    }

    // A copy finished. Completion wins over any timeout tie by construction.
    job.copy_state[entry.copy] = CopyState::kGone;
    if (!job.done) {
      job.done = true;
      if (entry.retry)
        ++stats_.completed_second_pass[q];
      else
        ++stats_.completed_first_pass[q];
      ++stats_.jobs_completed;
      change_population(-1);
      const double response = now_ - job.t_arrive;
      if (entry.job >= warmup_) responses_[entry.job - warmup_] = response;
      last_departure_ = now_;
      // cancel sibling copies that are presently in service elsewhere
      for (std::size_t c = 0; c < job.copy_queue.size(); ++c) {
        if (job.copy_state[c] != CopyState::kServing) continue;
        const int other = job.copy_queue[c];
        Server& osrv = servers_[other];
        if (osrv.busy && osrv.current.job == entry.job &&
            osrv.current.copy == static_cast<int>(c)) {
          job.copy_state[c] = CopyState::kGone;
          if (log_) {
            for (auto& v : job.visits)
              if (v.queue == other && v.t_end > now_) {
                v.t_end = now_;
                v.outcome = VisitOutcome::kCancelled;
              }
          }
          ++osrv.epoch;  // invalidates the scheduled service-end event
          start_next(other);
        }
      }
      if (log_) {
        JobRecord rec;
        rec.id = entry.job;
        rec.t_arrive = job.t_arrive;
        rec.x = job.x;
        rec.s1 = job.s1;
        rec.s2 = job.s2;
        rec.t_depart = now_;
        rec.visits = std::move(job.visits);
        log_->push_back(std::move(rec));
      }
    }
    start_next(q);
    // free the bookkeeping once every copy is gone
    bool any_left = false;
    for (const CopyState st : jobs_.at(entry.job).copy_state)
      any_left = any_left || st != CopyState::kGone;
    if (!any_left) jobs_.erase(entry.job);
  }

  // --- statistics -----------------------------------------------------------

  void finalize_stats() {
    const std::size_t n = responses_.size();
    double mean = 0;
    for (double r : responses_) mean += r;
    mean /= n > 0 ? static_cast<double>(n) : 1.0;
    stats_.mean_response = mean;

    if (n >= 40) {
      const std::size_t n_batches = 20;
      const std::size_t width = n / n_batches;
      std::vector<double> batch(n_batches, 0.0);
      for (std::size_t b = 0; b < n_batches; ++b) {
        for (std::size_t k = b * width; k < (b + 1) * width; ++k)
          batch[b] += responses_[k];
        batch[b] /= static_cast<double>(width);
      }
      double bm = 0;
      for (double v : batch) bm += v;
      bm /= n_batches;
      double var = 0;
      for (double v : batch) var += (v - bm) * (v - bm);
      var /= n_batches - 1;
      // t quantile, 19 degrees of freedom, two-sided 95%
      stats_.ci95_halfwidth = 2.093024 * std::sqrt(var / n_batches);

      // divergence: rising trend of the batch means
      double sxx = 0, sxy = 0, xbar = (n_batches - 1) / 2.0;
      for (std::size_t b = 0; b < n_batches; ++b) {
        sxx += (b - xbar) * (b - xbar);
        sxy += (b - xbar) * (batch[b] - bm);
      }
      const double slope = sxy / sxx;
      double sse = 0;
      for (std::size_t b = 0; b < n_batches; ++b) {
        const double fit = bm + slope * (b - xbar);
        sse += (batch[b] - fit) * (batch[b] - fit);
      }
      const double se = std::sqrt(sse / (n_batches - 2) / sxx);
      stats_.diverged = slope > 0 && (se == 0 || slope / se > 4.0);
    } else if (n >= 2) {
      double var = 0;
      for (double r : responses_) var += (r - mean) * (r - mean);
      var /= n - 1;
      stats_.ci95_halfwidth = 1.96 * std::sqrt(var / n);
    }

    stats_.messages_per_job =
        messages_ / static_cast<double>(stats_.jobs_arrived);

    const double t1 = last_departure_;
    if (t1 > window_start_time_) {
      const double final_integral =
          pop_integral_ + (t1 - last_pop_change_) * population_;
      stats_.window_time = t1 - window_start_time_;
      stats_.window_time_avg_jobs =
          (final_integral - window_start_integral_) / stats_.window_time;
      stats_.window_arrival_rate =
          static_cast<double>(n_jobs_ - warmup_) / stats_.window_time;
    }
  }

  NetworkConfig cfg_;
  Scheme scheme_;
  std::uint64_t n_jobs_;
  std::uint64_t warmup_;
  std::uint64_t seed_;
  Discipline discipline_;
  std::vector<JobRecord>* log_;

  std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
  std::vector<Server> servers_;
  std::unordered_map<std::uint64_t, ActiveJob> jobs_;
  std::uint64_t event_seq_ = 0;
  std::uint64_t entry_seq_ = 0;
  double now_ = 0;

  SimStats stats_;
  std::vector<double> responses_;
  double messages_ = 0;
  long long population_ = 0;
  double pop_integral_ = 0;
  double last_pop_change_ = 0;
  double last_departure_ = 0;
  double window_start_time_ = 0;
  double window_start_integral_ = 0;
};

}  // namespace

Scheme Scheme::speculative(std::vector<double> timeouts) {
  Scheme s;
  s.kind = SchemeKind::kSpeculative;
  s.tau = std::move(timeouts);
  return s;
}

Scheme Scheme::random_dispatch() {
  Scheme s;
  s.kind = SchemeKind::kRandom;
  return s;
}

Scheme Scheme::replicate(int fanout) {
  Scheme s;
  s.kind = SchemeKind::kReplicateCancelOnComplete;
  s.fanout = fanout;
  return s;
}

Scheme Scheme::least_workload(int fanout) {
  Scheme s;
  s.kind = SchemeKind::kLeastLeftWorkload;
  s.fanout = fanout;
  return s;
}

Scheme Scheme::replicate_to_idle(int fanout) {
  Scheme s;
  s.kind = SchemeKind::kReplicateToIdle;
  s.fanout = fanout;
  return s;
}

std::string scheme_label(const Scheme& s) {
  char buf[32];
  switch (s.kind) {
    case SchemeKind::kSpeculative: return "slb";
    case SchemeKind::kRandom: return "rnd";
    case SchemeKind::kReplicateCancelOnComplete:
      std::snprintf(buf, sizeof(buf), "coc-%d", s.fanout);
      return buf;
    case SchemeKind::kLeastLeftWorkload:
      std::snprintf(buf, sizeof(buf), "cos-%d", s.fanout);
      return buf;
    case SchemeKind::kReplicateToIdle:
      std::snprintf(buf, sizeof(buf), "riq-%d", s.fanout);
      return buf;
  }
  return "unknown";
}

SimStats run(const NetworkConfig& cfg, const Scheme& scheme,
             std::uint64_t n_jobs, std::uint64_t warmup, std::uint64_t seed,
             Discipline discipline, std::vector<JobRecord>* job_log) {
  Simulation sim(cfg, scheme, n_jobs, warmup, seed, discipline, job_log);
  return sim.run();
}

SimStats run_replicated(const NetworkConfig& cfg, int fanout,
                        std::uint64_t n_jobs, std::uint64_t warmup,
                        std::uint64_t seed) {
  return run(cfg, Scheme::replicate(fanout), n_jobs, warmup, seed);
}

SimStats run_least_workload(const NetworkConfig& cfg, int fanout,
                            std::uint64_t n_jobs, std::uint64_t warmup,
                            std::uint64_t seed) {
  return run(cfg, Scheme::least_workload(fanout), n_jobs, warmup, seed);
}

SimStats run_replicate_to_idle(const NetworkConfig& cfg, int fanout,
                               std::uint64_t n_jobs, std::uint64_t warmup,
                               std::uint64_t seed) {
  return run(cfg, Scheme::replicate_to_idle(fanout), n_jobs, warmup, seed);
}

double message_overhead(const SimStats& stats, const Scheme& scheme) {
  switch (scheme.kind) {
    case SchemeKind::kReplicateCancelOnComplete:
    case SchemeKind::kLeastLeftWorkload:
      return 2.0 * scheme.fanout - 1.0;
    default:
      return stats.messages_per_job;
  }
}

FlowBalanceRecord littles_law_check(const SimStats& stats) {
  FlowBalanceRecord rec;
  if (stats.diverged || stats.window_time <= 0 || stats.jobs_completed == 0) {
    rec.skipped = true;
    return rec;
  }
  rec.time_avg_jobs = stats.window_time_avg_jobs;
  rec.rate_times_wait = stats.window_arrival_rate * stats.mean_response;
  const double denom = std::max(rec.time_avg_jobs, 1e-300);
  rec.relative_gap =
      std::fabs(rec.time_avg_jobs - rec.rate_times_wait) / denom;
  return rec;
}

}  // namespace specq
