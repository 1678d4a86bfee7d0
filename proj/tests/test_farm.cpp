#include <doctest.h>

#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "bsf/farm.hpp"
#include "bsf/quadratic.hpp"

using namespace bsf;

namespace {

// Worker echoes the job, reduce keeps the last echo, stop after `limit` iterations.
struct EchoProblem {
  struct MasterState {
    std::uint64_t counter = 0;
    std::uint64_t last = 0;
    std::size_t reduced_with = 0;
  };
  struct WorkerState {
    int rank = 0;
  };
  using Job = std::uint64_t;
  using Partial = std::uint64_t;
  using Output = MasterState;

  std::uint64_t limit = 3;
  int fail_rank = -1;            // worker_step throws on this rank
  std::string fail_phase;        // "make_job" | "compute" | "reduce"
  std::mutex* log_mu = nullptr;  // optional job log
  std::map<int, std::vector<std::uint64_t>>* log = nullptr;

  MasterState init_master(int) const { return {}; }
  WorkerState init_worker(int rank, int) const { return {rank}; }
  Job make_job(const MasterState& s) const {
    if (fail_phase == "make_job") throw std::runtime_error("make_job exploded");
    return 1000 + s.counter;
  }
  Partial worker_step(const Job& job, int rank, int, WorkerState& ws) const {
    CHECK(ws.rank == rank);
    if (fail_phase == "compute" && rank == fail_rank) throw std::runtime_error("worker exploded");
    if (log != nullptr) {
      std::lock_guard lock(*log_mu);
      (*log)[rank].push_back(job);
    }
    return job;
  }
  MasterState reduce(MasterState s, std::span<const Partial> parts) const {
    if (fail_phase == "reduce") throw std::runtime_error("reduce exploded");
    for (std::size_t i = 1; i < parts.size(); ++i) CHECK(parts[i] == parts[0]);
    s.last = parts.front();
    s.reduced_with = parts.size();
    ++s.counter;
    return s;
  }
  bool exit_condition(const MasterState& s) const { return s.counter >= limit; }
  Output finalize(const MasterState& s) const { return s; }
  Bytes encode_job(const Job& j) const { return std::move(ByteWriter{}.u64(j)).take(); }
  Job decode_job(ByteView b) const { return ByteReader(b).u64(); }
  Bytes encode_partial(const Partial& p) const { return std::move(ByteWriter{}.u64(p)).take(); }
  Partial decode_partial(ByteView b) const { return ByteReader(b).u64(); }
};

static_assert(FarmProblem<EchoProblem>);
static_assert(FarmProblem<QuadraticFarm>);

// Partials carry the rank so reduce can check the ordering.
struct RankOrderProblem : EchoProblem {
  Partial worker_step(const Job&, int rank, int, WorkerState&) const { return static_cast<Partial>(rank); }
  MasterState reduce(MasterState s, std::span<const Partial> parts) const {
    for (std::size_t i = 0; i < parts.size(); ++i) CHECK(parts[i] == i + 1);
    s.reduced_with = parts.size();
    ++s.counter;
    return s;
  }
};

BackendConfig tcp_config() {
  BackendConfig c{Backend::Tcp};
  c.timeout = std::chrono::milliseconds(10'000);
  return c;
}

}  // namespace

TEST_CASE("echo problem runs exactly three iterations") {
  for (int k : {1, 2, 5}) {
    const auto outcome = run_farm(EchoProblem{}, BackendConfig{}, k);
    CHECK(outcome.iteration_count == 3);
    CHECK(outcome.traces.size() == 3);
    CHECK(outcome.output.last == 1002);
    CHECK(outcome.output.reduced_with == static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < outcome.traces.size(); ++i) {
      const auto& t = outcome.traces[i];
      CHECK(t.iteration == i);
      CHECK(t.worker_compute.size() == static_cast<std::size_t>(k));
      CHECK(t.distribute >= 0);
      CHECK(t.compute >= 0);
      CHECK(t.gather >= 0);
      CHECK(t.reduce >= 0);
    }
    CHECK(outcome.wall_seconds > 0);
  }
}

TEST_CASE("exit condition true after the first reduce still runs one iteration") {
  EchoProblem p;
  p.limit = 0;
  const auto outcome = run_farm(p, BackendConfig{}, 3);
  CHECK(outcome.iteration_count == 1);
  CHECK(outcome.output.last == 1000);
}

TEST_CASE("run_single matches run_farm with one worker") {
  const auto a = run_single(EchoProblem{});
  const auto b = run_farm(EchoProblem{}, BackendConfig{}, 1);
  CHECK(a.iteration_count == b.iteration_count);
  CHECK(a.output.last == b.output.last);
}

TEST_CASE("reduce receives K partials in rank order") {
  for (int k : {1, 4, 8}) {
    const auto outcome = run_farm(RankOrderProblem{}, BackendConfig{}, k);
    CHECK(outcome.output.reduced_with == static_cast<std::size_t>(k));
  }
}

TEST_CASE("all workers receive bit-identical jobs each iteration") {
  std::mutex mu;
  std::map<int, std::vector<std::uint64_t>> log;
  EchoProblem p;
  p.limit = 5;
  p.log_mu = &mu;
  p.log = &log;
  run_farm(p, BackendConfig{}, 6);
  REQUIRE(log.size() == 6);
  for (const auto& [rank, jobs] : log) CHECK(jobs == log.begin()->second);
  CHECK(log.begin()->second == std::vector<std::uint64_t>{1000, 1001, 1002, 1003, 1004});
}

TEST_CASE("callback failures name the phase and rank") {
  EchoProblem p;
  p.fail_phase = "compute";
  p.fail_rank = 2;
  try {
    run_farm(p, BackendConfig{}, 3);
    FAIL("expected a FarmError");
  } catch (const FarmError& e) {
    CHECK(e.site().phase == "compute");
    CHECK(e.site().rank == 2);
    CHECK(std::string(e.what()).find("worker exploded") != std::string::npos);
  }

  p.fail_phase = "reduce";
  try {
    run_farm(p, BackendConfig{}, 2);
    FAIL("expected a FarmError");
  } catch (const FarmError& e) {
    CHECK(e.site().phase == "reduce");
    CHECK(e.site().rank == 0);
  }

  p.fail_phase = "make_job";
  CHECK_THROWS_AS(run_farm(p, BackendConfig{}, 2), FarmError);
  CHECK_THROWS_AS(run_farm(EchoProblem{}, BackendConfig{}, 0), InvalidParameter);
}

TEST_CASE("transport failure surfaces with phase and rank") {
  // Master sees worker 1 vanish before the first distribute.
  auto world = InProcWorld::create(2);
  auto master = world->endpoint(0);
  auto worker = world->endpoint(1);
  std::thread t([&] {
    barrier(*worker);
    worker->close();
  });
  try {
    run_master(EchoProblem{}, *master);
    FAIL("expected a FarmTransportError");
  } catch (const FarmTransportError& e) {
    CHECK(e.site().rank == 0);
    CHECK_FALSE(e.site().phase.empty());
  }
  t.join();
}

TEST_CASE("outcomes agree across backends") {
  const auto q = make_quadratic(quadratic_fixture("small64x16"));
  const auto inproc = run_farm(q, BackendConfig{}, 4);
  const auto tcp = run_farm(q, tcp_config(), 4);
  BackendConfig virt{Backend::Virtual, LinkCost{0.5, 1e-6}};
  const auto v = run_farm(q, virt, 4);
  CHECK(inproc.iteration_count == tcp.iteration_count);
  CHECK(inproc.iteration_count == v.iteration_count);
  CHECK(inproc.output.x == tcp.output.x);
  CHECK(inproc.output.x == v.output.x);
  CHECK(inproc.output.grad_norms == tcp.output.grad_norms);

  // Repeated runs are deterministic.
  const auto again = run_farm(q, BackendConfig{}, 4);
  CHECK(again.output.x == inproc.output.x);
  CHECK(again.iteration_count == inproc.iteration_count);
}

TEST_CASE("virtual-time traces follow the cost algebra") {
  const LinkCost link{0.5, 1e-3};
  const int k = 4;
  EchoProblem p;
  const auto outcome = run_farm(p, BackendConfig{Backend::Virtual, link}, k);
  // Job: 8 bytes; result: 8-byte compute time + 8-byte echo.
  const double t_s = 8 * link.seconds_per_byte;
  const double t_r = k * 16 * link.seconds_per_byte;
  for (const auto& t : outcome.traces) {
    CHECK(t.distribute == doctest::Approx(k * (link.latency + t_s)).epsilon(1e-12));
    CHECK(t.gather == doctest::Approx(k * link.latency + t_r).epsilon(1e-12));
    // The virtual clock does not advance while workers compute or the master reduces.
    CHECK(t.compute == 0.0);
    CHECK(t.reduce == 0.0);
    for (double w : t.worker_compute) CHECK(w == 0.0);
  }
}

TEST_CASE("trace serialization") {
  const auto outcome = run_farm(EchoProblem{}, BackendConfig{}, 2);
  const auto csv = traces_to_csv(outcome.traces);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,phase,rank,duration");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  // per iteration: distribute, gather, reduce on the master + one compute row per worker
  CHECK(rows == 3 * (3 + 2));

  const auto j = traces_to_json(outcome.traces, outcome.iteration_count, outcome.wall_seconds);
  CHECK(j["iteration_count"] == 3);
  CHECK(j["traces"].size() == 3);
  CHECK(j["traces"][0]["worker_compute"].size() == 2);
}

TEST_CASE("measure_speedup reports K=1 baseline") {
  const std::vector<int> ks{1};
  const auto samples = measure_speedup(EchoProblem{}, BackendConfig{}, ks);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].workers == 1);
  CHECK(samples[0].speedup > 0);
  CHECK(samples[0].efficiency == samples[0].speedup);
  CHECK_THROWS_AS(measure_speedup(EchoProblem{}, BackendConfig{}, std::span<const int>{}), InvalidParameter);
}
