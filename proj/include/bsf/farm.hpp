#pragma once

// Bulk-synchronous farm skeleton.
//
// A run is: init on every rank, barrier, then iterations of
//
//   master make_job -> distribute -> workers compute -> gather -> barrier
//   -> master reduce -> exit test -> continue/stop Control to each worker
//
// until the exit test holds, then finalize on the master. The exit test
// follows reduce, so every run performs at least one iteration.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bsf/bytes.hpp"
#include "bsf/errors.hpp"
#include "bsf/runtime.hpp"
#include "bsf/transport.hpp"

namespace bsf {

// clang-format off
template <class P>
concept FarmProblem = requires(const P& p, const typename P::MasterState& ms, typename P::WorkerState& ws,
                               const typename P::Job& job, const typename P::Partial& part,
                               std::span<const typename P::Partial> parts, ByteView bytes, int rank, int workers) {
  { p.init_master(workers) } -> std::same_as<typename P::MasterState>;
  { p.init_worker(rank, workers) } -> std::same_as<typename P::WorkerState>;
  { p.make_job(ms) } -> std::same_as<typename P::Job>;
  { p.worker_step(job, rank, workers, ws) } -> std::same_as<typename P::Partial>;
  { p.reduce(typename P::MasterState(ms), parts) } -> std::same_as<typename P::MasterState>;
  { p.exit_condition(ms) } -> std::convertible_to<bool>;
  { p.finalize(ms) } -> std::same_as<typename P::Output>;
  { p.encode_job(job) } -> std::same_as<Bytes>;
  { p.decode_job(bytes) } -> std::same_as<typename P::Job>;
  { p.encode_partial(part) } -> std::same_as<Bytes>;
  { p.decode_partial(bytes) } -> std::same_as<typename P::Partial>;
};
// clang-format on

/// Durations of one iteration, in the master's clock units.
/// `compute` is the slowest worker; `gather` excludes the time spent waiting
/// for that worker and includes the closing barrier.
struct IterationTrace {
  std::size_t iteration = 0;
  double distribute = 0.0;
  double compute = 0.0;
  double gather = 0.0;
  double reduce = 0.0;
  std::vector<double> worker_compute;  // index i is rank i+1
};

template <class Output>
struct FarmOutcome {
  Output output;
  std::size_t iteration_count = 0;
  std::vector<IterationTrace> traces;
  double wall_seconds = 0.0;
};

void to_json(nlohmann::json& j, const IterationTrace& t);

/// `iteration,phase,rank,duration`: master rows for distribute/gather/reduce,
/// one compute row per worker rank.
std::string traces_to_csv(std::span<const IterationTrace> traces);

nlohmann::json traces_to_json(std::span<const IterationTrace> traces, std::size_t iteration_count,
                              double wall_seconds);

namespace detail {

inline constexpr std::uint8_t kContinue = 1;
inline constexpr std::uint8_t kStop = 0;

/// Runs `fn` and re-labels failures with the phase and rank.
template <class Fn>
decltype(auto) in_phase(const char* phase, int rank, Fn&& fn) {
  try {
    return std::forward<Fn>(fn)();
  } catch (const FarmError&) {
    throw;
  } catch (const FarmTransportError&) {
    throw;
  } catch (const TransportFailure& e) {
    throw FarmTransportError({phase, rank}, e.what());
  } catch (const std::exception& e) {
    throw FarmError({phase, rank}, e.what());
  }
}

}  // namespace detail

/// The master's half of an SPMD farm run.
template <FarmProblem P>
FarmOutcome<typename P::Output> run_master(const P& problem, Endpoint& ep) {
  using detail::in_phase;
  const int workers = ep.rank().workers();
  const int self = kMasterRank;
  const double started = ep.now();

  auto state = in_phase("init", self, [&] { return problem.init_master(workers); });
  in_phase("init-barrier", self, [&] { barrier(ep); });

  FarmOutcome<typename P::Output> outcome;
  bool stop = false;
  while (!stop) {
    IterationTrace trace;
    trace.iteration = outcome.iteration_count;

    Message job = in_phase("make_job", self, [&] { return Message{Tag::Job, problem.encode_job(problem.make_job(state))}; });

    const double t0 = ep.now();
    in_phase("distribute", self, [&] { distribute(ep, job); });
    const double t1 = ep.now();
    auto results = in_phase("gather", self, [&] { return gather(ep); });
    in_phase("barrier", self, [&] { barrier(ep); });
    const double t2 = ep.now();

    std::vector<typename P::Partial> partials;
    partials.reserve(results.size());
    trace.worker_compute.reserve(results.size());
    in_phase("reduce", self, [&] {
      for (const auto& r : results) {
        ByteReader reader(r.payload);
        trace.worker_compute.push_back(reader.f64());
        partials.push_back(problem.decode_partial(reader.rest()));
      }
      state = problem.reduce(std::move(state), std::span<const typename P::Partial>(partials));
      stop = static_cast<bool>(problem.exit_condition(state));
    });
    const double t3 = ep.now();

    in_phase("control", self, [&] {
      const Message flag{Tag::Control, {stop ? detail::kStop : detail::kContinue}};
      for (int w = 1; w <= workers; ++w) ep.send(w, flag);
    });

    trace.distribute = t1 - t0;
    trace.compute = trace.worker_compute.empty()
                        ? 0.0
                        : *std::max_element(trace.worker_compute.begin(), trace.worker_compute.end());
    trace.gather = std::max(0.0, (t2 - t1) - trace.compute);
    trace.reduce = t3 - t2;
    outcome.traces.push_back(std::move(trace));
    ++outcome.iteration_count;
  }

  outcome.output = in_phase("finalize", self, [&] { return problem.finalize(state); });
  outcome.wall_seconds = ep.now() - started;
  return outcome;
}

/// A worker's half of an SPMD farm run.
template <FarmProblem P>
void run_worker(const P& problem, Endpoint& ep) {
  using detail::in_phase;
  const auto me = ep.rank();
  auto state = in_phase("init", me.id, [&] { return problem.init_worker(me.id, me.workers()); });
  in_phase("init-barrier", me.id, [&] { barrier(ep); });

  while (true) {
    const auto job = in_phase("distribute", me.id, [&] {
      return problem.decode_job(expect(ep, kMasterRank, Tag::Job, ep.default_timeout()).payload);
    });
    const double t0 = ep.now();
    auto partial = in_phase("compute", me.id, [&] { return problem.worker_step(job, me.id, me.workers(), state); });
    const double elapsed = ep.now() - t0;
    in_phase("gather", me.id, [&] {
      ByteWriter w;
      w.f64(elapsed).raw(problem.encode_partial(partial));
      ep.send(kMasterRank, {Tag::Result, std::move(w).take()});
    });
    in_phase("barrier", me.id, [&] { barrier(ep); });
    const auto flag = in_phase("control", me.id, [&] { return expect(ep, kMasterRank, Tag::Control, ep.default_timeout()); });
    if (flag.payload.size() != 1) {
      throw FarmTransportError({"control", me.id}, "malformed continue/stop flag");
    }
    if (flag.payload[0] == detail::kStop) break;
  }
}

/// Spawns a K-worker world on `backend` and runs the farm on it.
template <FarmProblem P>
FarmOutcome<typename P::Output> run_farm(const P& problem, const BackendConfig& backend, int workers) {
  if (workers < 1) throw InvalidParameter("farm needs K >= 1 workers");
  std::optional<FarmOutcome<typename P::Output>> outcome;
  run_spmd(backend, workers + 1, [&](Endpoint& ep) {
    if (ep.rank().is_master()) {
      outcome = run_master(problem, ep);
    } else {
      run_worker(problem, ep);
    }
  });
  return std::move(*outcome);
}

/// The speedup baseline: one master and one worker, in-process.
template <FarmProblem P>
FarmOutcome<typename P::Output> run_single(const P& problem) {
  return run_farm(problem, BackendConfig{}, 1);
}

struct SpeedupSample {
  int workers = 1;
  double wall_seconds = 0.0;
  double speedup = 1.0;     // wall(K=1) / wall(K)
  double efficiency = 1.0;  // speedup / K
};

void to_json(nlohmann::json& j, const SpeedupSample& s);

template <FarmProblem P>
std::vector<SpeedupSample> measure_speedup(const P& problem, const BackendConfig& backend,
                                           std::span<const int> worker_counts) {
  if (worker_counts.empty()) throw InvalidParameter("measure_speedup needs at least one K");
  const double baseline = run_single(problem).wall_seconds;
  std::vector<SpeedupSample> samples;
  for (int k : worker_counts) {
    const double wall = run_farm(problem, backend, k).wall_seconds;
    const double a = baseline / wall;
    samples.push_back({k, wall, a, a / k});
  }
  return samples;
}

}  // namespace bsf
