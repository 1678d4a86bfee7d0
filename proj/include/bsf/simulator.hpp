#pragma once

// Virtual-clock replay of the farm iteration timeline.
//
// PhaseSequential charges the four phases back to back:
//   distribute  K sends of (L + t_s)
//   compute     t_w / K
//   gather      K receives of (L + t_r / K)
//   reduce      t_p
// which sums to the analytical T_K. Overlapped lets worker i start as soon as
// its own job lands and lets the master receive results as they finish.
//
// Noise multiplies each phase event by an independent factor drawn uniformly
// from [1 - rho, 1 + rho]. Both modes consume the same draws in the same order
// (K send events, one compute event shared by the homogeneous workers, K
// receive events, one reduce event), so for a given seed Overlapped never
// exceeds PhaseSequential.

#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bsf/cost_model.hpp"

namespace bsf {

enum class SimMode { PhaseSequential, Overlapped };

std::string_view to_string(SimMode m);
SimMode sim_mode_from_string(std::string_view name);

struct SimConfig {
  CostParams params;
  WorkerCount workers = 1;
  std::size_t iterations = 1;
  SimMode mode = SimMode::PhaseSequential;
  double noise = 0.0;  // rho, 0 <= rho < 1
  std::uint64_t seed = 0;

  void validate() const;
};

struct PhaseBreakdown {
  double distribute = 0.0;
  double compute = 0.0;
  double gather = 0.0;
  double reduce = 0.0;

  double total() const noexcept { return distribute + compute + gather + reduce; }
};

struct SimReport {
  SimConfig config;
  std::vector<double> iteration_times;
  std::vector<PhaseBreakdown> phases;  // per iteration
  double mean_time = 0.0;
  PhaseBreakdown mean_phases;
  double single_worker_mean_time = 0.0;  // same config at K = 1
  double speedup = 1.0;
  double efficiency = 1.0;
  double model_time = 0.0;  // iteration_time(params, K)
  double model_relative_error = 0.0;

  nlohmann::json to_json() const;
};

SimReport simulate(const SimConfig& cfg);

/// Speedup curve from simulated mean iteration times. Every K reuses `seed`
/// (common random numbers), so noise is correlated across the sweep.
CurveSeries simulated_speedup_sweep(const CostParams& params, const WorkerRange& range, SimMode mode, double noise,
                                    std::uint64_t seed, std::size_t iterations = 1);

struct AdequacyEntry {
  WorkerCount workers;
  double observed;
  double predicted;
  double relative_error;
};

struct AdequacyReport {
  std::vector<AdequacyEntry> entries;
  double max_error = 0.0;
  double threshold = 0.3;
  bool adequate = true;

  nlohmann::json to_json() const;
};

struct Observation {
  WorkerCount workers;
  double time;
};

inline constexpr double kDefaultAdequacyThreshold = 0.3;

/// Compares observed iteration times to iteration_time(model, K).
AdequacyReport adequacy_report(const CostParams& model, const std::vector<Observation>& observed,
                               double threshold = kDefaultAdequacyThreshold);

}  // namespace bsf
