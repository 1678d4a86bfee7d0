#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bsf/runtime.hpp"

namespace bsf {

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;
};

/// Throws InvalidParameter when fewer than two points or all x are equal.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct CalibrationSample {
  std::size_t bytes = 0;
  std::vector<double> round_trips;
  double median = 0.0;
};

struct CalibrationReport {
  Backend backend = Backend::InProcess;
  double latency = 0.0;           // L, intercept / 2 clamped at 0
  double seconds_per_byte = 0.0;  // slope / 2
  LinearFit fit;                  // raw round-trip fit, residuals included
  std::vector<CalibrationSample> samples;
  std::optional<double> work_estimate;  // median seconds of the probe step, if given

  /// Operational t_s for a job of `bytes`: L + bytes * seconds_per_byte.
  double send_time(std::size_t bytes) const noexcept {
    return latency + static_cast<double>(bytes) * seconds_per_byte;
  }

  nlohmann::json to_json() const;
};

/// Ping-pong between the master and one worker: for every payload size, the
/// median of `repetitions` round trips is fitted linearly in size. Needs >= 3
/// distinct sizes and >= 5 repetitions. `work_probe`, if set, is timed
/// `repetitions` times to estimate t_w.
CalibrationReport calibrate(const BackendConfig& backend, std::span<const std::size_t> payload_sizes,
                            std::size_t repetitions, const std::function<void()>& work_probe = {});

/// Parses "1k,10k,100k" (k = 1000, m = 10^6 suffixes allowed).
std::vector<std::size_t> parse_sizes(std::string_view text);

}  // namespace bsf
