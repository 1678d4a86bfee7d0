#include "bsf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "bsf/errors.hpp"

namespace bsf {

std::string_view to_string(SimMode m) {
  switch (m) {
    case SimMode::PhaseSequential: return "phase-seq";
    case SimMode::Overlapped: return "overlapped";
  }
  return "?";
}

SimMode sim_mode_from_string(std::string_view name) {
  if (name == "phase-seq" || name == "phase-sequential") return SimMode::PhaseSequential;
  if (name == "overlapped") return SimMode::Overlapped;
  throw InvalidParameter("unknown simulation mode '" + std::string(name) + "' (phase-seq, overlapped)");
}

void SimConfig::validate() const {
  if (workers < 1) throw InvalidParameter("simulation needs K >= 1");
  if (iterations < 1) throw InvalidParameter("simulation needs at least one iteration");
  if (!(noise >= 0.0 && noise < 1.0)) throw InvalidParameter("noise amplitude must lie in [0, 1)");
}

namespace {

/// Uniform factors on [1 - rho, 1 + rho] from the top 53 bits of a
/// mt19937_64 draw, so the stream is identical on every standard library.
class NoiseSource {
 public:
  NoiseSource(double rho, std::uint64_t seed) : rho_(rho), rng_(seed) {}

  double factor() {
    if (rho_ == 0.0) return 1.0;
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return 1.0 + rho_ * (2.0 * u - 1.0);
  }

 private:
  double rho_;
  std::mt19937_64 rng_;
};

PhaseBreakdown simulate_iteration(const CostParams& p, WorkerCount workers, SimMode mode, NoiseSource& noise) {
  const auto k = static_cast<double>(workers);
  const auto n = static_cast<std::size_t>(workers);
  const double send = p.latency() + p.job_send();
  const double receive = p.latency() + p.result_transfer() / k;

  std::vector<double> send_factor(n), receive_factor(n);
  for (auto& f : send_factor) f = noise.factor();
  const double compute_factor = noise.factor();
  for (auto& f : receive_factor) f = noise.factor();
  const double reduce_factor = noise.factor();

  const double compute = p.work() / k * compute_factor;
  PhaseBreakdown out;
  out.reduce = p.result_process() * reduce_factor;

  if (mode == SimMode::PhaseSequential) {
    for (double f : send_factor) out.distribute += send * f;
    out.compute = compute;
    for (double f : receive_factor) out.gather += receive * f;
    return out;
  }

  // Overlapped: per-worker timelines on the master's clock.
  double master = 0.0;
  std::vector<double> finish(n);
  for (std::size_t i = 0; i < n; ++i) {
    master += send * send_factor[i];
    finish[i] = master + compute;
  }
  const double sends_done = master;
  double receiving = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cost = receive * receive_factor[i];
    master = std::max(master, finish[i]) + cost;
    receiving += cost;
  }
  out.distribute = sends_done;
  out.gather = receiving;
  out.compute = std::max(0.0, master - sends_done - receiving);
  return out;
}

struct RunSummary {
  std::vector<double> times;
  std::vector<PhaseBreakdown> phases;
  double mean = 0.0;
  PhaseBreakdown mean_phases;
};

RunSummary run(const CostParams& p, WorkerCount workers, std::size_t iterations, SimMode mode, double rho,
               std::uint64_t seed) {
  NoiseSource noise(rho, seed);
  RunSummary s;
  s.times.reserve(iterations);
  s.phases.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto ph = simulate_iteration(p, workers, mode, noise);
    s.phases.push_back(ph);
    s.times.push_back(ph.total());
    s.mean += ph.total();
    s.mean_phases.distribute += ph.distribute;
    s.mean_phases.compute += ph.compute;
    s.mean_phases.gather += ph.gather;
    s.mean_phases.reduce += ph.reduce;
  }
  const auto n = static_cast<double>(iterations);
  s.mean /= n;
  s.mean_phases.distribute /= n;
  s.mean_phases.compute /= n;
  s.mean_phases.gather /= n;
  s.mean_phases.reduce /= n;
  return s;
}

nlohmann::json phases_json(const PhaseBreakdown& p) {
  return {{"distribute", p.distribute}, {"compute", p.compute}, {"gather", p.gather}, {"reduce", p.reduce}};
}

// Distinct stream for the K = 1 baseline run.
constexpr std::uint64_t kBaselineStream = 0x9E3779B97F4A7C15ull;

}  // namespace

SimReport simulate(const SimConfig& cfg) {
  cfg.validate();
  auto main_run = run(cfg.params, cfg.workers, cfg.iterations, cfg.mode, cfg.noise, cfg.seed);
  const auto baseline = run(cfg.params, 1, cfg.iterations, cfg.mode, cfg.noise, cfg.seed ^ kBaselineStream);

  SimReport r{cfg, std::move(main_run.times), std::move(main_run.phases), main_run.mean, main_run.mean_phases};
  r.single_worker_mean_time = baseline.mean;
  r.speedup = baseline.mean / r.mean_time;
  r.efficiency = r.speedup / static_cast<double>(cfg.workers);
  r.model_time = iteration_time(cfg.params, cfg.workers);
  r.model_relative_error = std::abs(r.mean_time - r.model_time) / r.model_time;
  return r;
}

nlohmann::json SimReport::to_json() const {
  nlohmann::json phases_arr = nlohmann::json::array();
  for (const auto& p : phases) phases_arr.push_back(phases_json(p));
  return {{"config",
           {{"params", config.params},
            {"K", config.workers},
            {"iterations", config.iterations},
            {"mode", std::string(bsf::to_string(config.mode))},
            {"noise", config.noise},
            {"seed", config.seed}}},
          {"iteration_times", iteration_times},
          {"phases", std::move(phases_arr)},
          {"mean_time", mean_time},
          {"mean_phases", phases_json(mean_phases)},
          {"single_worker_mean_time", single_worker_mean_time},
          {"speedup", speedup},
          {"efficiency", efficiency},
          {"model_time", model_time},
          {"model_relative_error", model_relative_error}};
}

CurveSeries simulated_speedup_sweep(const CostParams& params, const WorkerRange& range, SimMode mode, double noise,
                                    std::uint64_t seed, std::size_t iterations) {
  if (range.lo < 1 || range.hi < range.lo || range.step < 1) {
    throw InvalidParameter("empty worker range: need 1 <= lo <= hi and step >= 1");
  }
  SimConfig probe{params, 1, iterations, mode, noise, seed};
  probe.validate();
  const double baseline = run(params, 1, iterations, mode, noise, seed ^ kBaselineStream).mean;
  CurveSeries series{Metric::Speedup, params, {}};
  for (WorkerCount k = range.lo; k <= range.hi; k += range.step) {
    series.points.push_back({k, baseline / run(params, k, iterations, mode, noise, seed).mean});
  }
  return series;
}

AdequacyReport adequacy_report(const CostParams& model, const std::vector<Observation>& observed, double threshold) {
  if (observed.empty()) throw InvalidParameter("adequacy report needs at least one observation");
  if (!(threshold >= 0.0)) throw InvalidParameter("adequacy threshold must be >= 0");
  AdequacyReport r;
  r.threshold = threshold;
  for (const auto& o : observed) {
    if (!(o.time > 0.0) || !std::isfinite(o.time)) {
      throw InvalidParameter("observed time at K=" + std::to_string(o.workers) + " must be finite and > 0");
    }
    const double predicted = iteration_time(model, o.workers);
    const double err = std::abs(o.time - predicted) / predicted;
    r.entries.push_back({o.workers, o.time, predicted, err});
    r.max_error = std::max(r.max_error, err);
  }
  r.adequate = r.max_error <= threshold;
  return r;
}

nlohmann::json AdequacyReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"K", e.workers}, {"observed", e.observed}, {"predicted", e.predicted},
                   {"relative_error", e.relative_error}});
  }
  return {{"entries", std::move(arr)},
          {"max_error", max_error},
          {"threshold", threshold},
          {"verdict", adequate ? "adequate" : "not adequate"}};
}

}  // namespace bsf
