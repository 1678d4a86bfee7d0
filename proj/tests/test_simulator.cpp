#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "bsf/errors.hpp"
#include "bsf/simulator.hpp"

using namespace bsf;

namespace {

CostParams eleven(double v) { return CostParams::from_ratio(1e12, v, 0.5, 1e4, 1e4); }

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

CostParams random_params(std::mt19937_64& rng) {
  auto mag = [&](double lo, double hi) { return std::pow(10.0, std::uniform_real_distribution<double>(lo, hi)(rng)); };
  return CostParams(mag(-3, 3), mag(-3, 8), mag(-3, 8), mag(-3, 8), mag(0, 12));
}

}  // namespace

TEST_CASE("noiseless phase-sequential reproduces the model") {
  const auto p = eleven(5);
  const auto r = simulate({p, 100, 3, SimMode::PhaseSequential, 0.0, 1});
  CHECK(r.iteration_times.size() == 3);
  for (double t : r.iteration_times) CHECK(rel(t, 11000020100.0) <= 1e-9);
  CHECK(r.model_time == 11000020100.0);
  CHECK(r.model_relative_error <= 1e-9);
  CHECK(rel(r.mean_phases.distribute, 100 * (0.5 + 1e7)) <= 1e-12);
  CHECK(rel(r.mean_phases.compute, 1e10) <= 1e-12);
  CHECK(rel(r.mean_phases.gather, 100 * 0.5 + 1e4) <= 1e-12);
  CHECK(rel(r.mean_phases.reduce, 1e4) <= 1e-12);
  CHECK(rel(r.speedup, speedup(p, 100)) <= 1e-9);
  CHECK(rel(r.efficiency, efficiency_exact(p, 100)) <= 1e-9);

  const auto single = simulate({p, 1, 1, SimMode::PhaseSequential, 0.0, 1});
  CHECK(rel(single.iteration_times[0], iteration_time_single(p)) <= 1e-12);
}

TEST_CASE("closed loop over random configurations") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> kd(1, 500);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_params(rng);
    const int k = kd(rng);
    const auto r = simulate({p, k, 1, SimMode::PhaseSequential, 0.0, rng()});
    REQUIRE(r.phases.size() == 1);
    CHECK(rel(r.iteration_times[0], iteration_time(p, k)) <= 1e-9);
    // Four phase terms sum to the iteration total.
    CHECK(rel(r.phases[0].total(), r.iteration_times[0]) <= 1e-12);
  }
}

TEST_CASE("same seed gives an identical report") {
  const SimConfig cfg{eleven(5), 16, 20, SimMode::Overlapped, 0.2, 99};
  CHECK(simulate(cfg).to_json() == simulate(cfg).to_json());
  auto other = cfg;
  other.seed = 100;
  CHECK(simulate(other).iteration_times != simulate(cfg).iteration_times);
}

TEST_CASE("overlapped never exceeds phase-sequential") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> kd(1, 64);
  for (int i = 0; i < 500; ++i) {
    const auto p = random_params(rng);
    const int k = kd(rng);
    const double rho = i % 2 ? 0.0 : 0.3;
    const auto seed = rng();
    const auto seq = simulate({p, k, 3, SimMode::PhaseSequential, rho, seed});
    const auto ovl = simulate({p, k, 3, SimMode::Overlapped, rho, seed});
    for (std::size_t it = 0; it < 3; ++it) {
      CHECK(ovl.iteration_times[it] <= seq.iteration_times[it] * (1 + 1e-12));
    }
  }
  // Strict with t_s > 0 and K > 1.
  const CostParams p(0.1, 2, 3, 1, 100);
  CHECK(simulate({p, 8, 1, SimMode::Overlapped, 0, 0}).mean_time <
        simulate({p, 8, 1, SimMode::PhaseSequential, 0, 0}).mean_time);
}

TEST_CASE("noise is unbiased and bounded") {
  const CostParams p(1, 10, 20, 5, 1000);
  const auto clean = iteration_time(p, 4);
  const auto r = simulate({p, 4, 4000, SimMode::PhaseSequential, 0.2, 5});
  CHECK(rel(r.mean_time, clean) <= 0.01);
  for (double t : r.iteration_times) {
    CHECK(t >= 0.8 * clean * (1 - 1e-12));
    CHECK(t <= 1.2 * clean * (1 + 1e-12));
  }
}

TEST_CASE("config validation") {
  const auto p = eleven(5);
  CHECK_THROWS_AS(simulate({p, 0, 1, SimMode::PhaseSequential, 0, 0}), InvalidParameter);
  CHECK_THROWS_AS(simulate({p, 1, 0, SimMode::PhaseSequential, 0, 0}), InvalidParameter);
  CHECK_THROWS_AS(simulate({p, 1, 1, SimMode::PhaseSequential, 1.0, 0}), InvalidParameter);
  CHECK_THROWS_AS(simulate({p, 1, 1, SimMode::PhaseSequential, -0.1, 0}), InvalidParameter);
  CHECK(sim_mode_from_string("overlapped") == SimMode::Overlapped);
  CHECK(sim_mode_from_string("phase-seq") == SimMode::PhaseSequential);
  CHECK_THROWS_AS(sim_mode_from_string("both"), InvalidParameter);
}

TEST_CASE("simulated sweep") {
  const auto p = eleven(5);
  const auto sweep = simulated_speedup_sweep(p, {1, 600, 1}, SimMode::PhaseSequential, 0.0, 0);
  const auto model = emit_curve(p, Metric::Speedup, {1, 600, 1});
  REQUIRE(sweep.points.size() == model.points.size());
  std::size_t peak = 0;
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    CHECK(sweep.points[i].workers == model.points[i].workers);
    CHECK(rel(sweep.points[i].value, model.points[i].value) <= 1e-9);
    if (sweep.points[i].value > sweep.points[peak].value) peak = i;
  }
  CHECK(sweep.points[peak].workers >= 315);
  CHECK(sweep.points[peak].workers <= 317);

  const auto one = simulated_speedup_sweep(p, {1, 1, 1}, SimMode::PhaseSequential, 0.0, 0);
  REQUIRE(one.points.size() == 1);
  CHECK(one.points[0].value == 1.0);
  CHECK_THROWS_AS(simulated_speedup_sweep(p, {5, 1, 1}, SimMode::PhaseSequential, 0.0, 0), InvalidParameter);
}

TEST_CASE("noisy sweep keeps the peak near the bound") {
  const auto p = eleven(5);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto sweep = simulated_speedup_sweep(p, {1, 600, 1}, SimMode::PhaseSequential, 0.05, seed, 50);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < sweep.points.size(); ++i) {
      if (sweep.points[i].value > sweep.points[peak].value) peak = i;
    }
    CHECK(std::abs(static_cast<double>(sweep.points[peak].workers) - 316.0) <= 31.6);
  }
}

TEST_CASE("adequacy reports") {
  const auto p = eleven(5);
  std::vector<Observation> exact, doubled;
  for (WorkerCount k : {1, 10, 100, 316, 1000}) {
    exact.push_back({k, simulate({p, k, 1, SimMode::PhaseSequential, 0.0, 0}).mean_time});
    doubled.push_back({k, 2 * iteration_time(p, k)});
  }
  const auto good = adequacy_report(p, exact);
  CHECK(good.adequate);
  CHECK(good.max_error <= 1e-9);
  CHECK(good.entries.size() == 5);

  const auto bad = adequacy_report(p, doubled);
  CHECK_FALSE(bad.adequate);
  CHECK(bad.max_error == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bad.to_json()["verdict"] == "not adequate");

  std::vector<Observation> noisy;
  for (WorkerCount k : {2, 8, 32, 128}) {
    noisy.push_back({k, simulate({p, k, 1, SimMode::PhaseSequential, 0.2, 42}).mean_time});
  }
  const auto n = adequacy_report(p, noisy);
  CHECK(n.max_error <= 0.2 + 1e-12);
  CHECK(n.adequate);

  CHECK_THROWS_AS(adequacy_report(p, {}), InvalidParameter);
  CHECK_THROWS_AS(adequacy_report(p, {{4, 0.0}}), InvalidParameter);
  CHECK_THROWS_AS(adequacy_report(p, {{4, -1.0}}), InvalidParameter);
}

TEST_CASE("report JSON") {
  const auto r = simulate({eleven(5), 8, 2, SimMode::PhaseSequential, 0.0, 3});
  const auto j = r.to_json();
  CHECK(j["iteration_times"].size() == 2);
  CHECK(j["mean_time"].get<double>() == r.mean_time);
  CHECK(j.contains("phases"));
  CHECK(j.contains("model_relative_error"));
}
