#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>

#include <nlohmann/json_fwd.hpp>

#include "bsf/bytes.hpp"

namespace bsf {

/// Fixed arithmetic kernel used as calibrated busy-work.
class SpinKernel {
 public:
  /// Uncalibrated; spin() throws MustCalibrate.
  SpinKernel() = default;
  explicit SpinKernel(double iterations_per_second);

  /// Times the kernel on this host for roughly `sample` of wall time.
  static SpinKernel calibrate(std::chrono::milliseconds sample = std::chrono::milliseconds(200));

  bool calibrated() const noexcept { return rate_ > 0.0; }
  double iterations_per_second() const noexcept { return rate_; }

  /// Busy-works for about `seconds`.
  void spin(double seconds) const;

  /// Runs `iterations` kernel steps; the result defeats dead-code elimination.
  static std::uint64_t run(std::uint64_t iterations);

 private:
  double rate_ = 0.0;
};

struct SyntheticSpec {
  double work_seconds = 0.2;       // t_w of a one-worker brigade
  std::size_t job_bytes = 0;       // broadcast to every worker
  std::size_t result_bytes = 0;    // total over all workers, block-partitioned
  std::size_t iterations = 1;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

/// Farm whose workers busy-work for work_seconds / K per iteration.
class SyntheticFarm {
 public:
  struct MasterState {
    std::size_t completed = 0;
  };
  struct WorkerState {
    std::size_t result_bytes = 0;
  };
  using Job = Bytes;
  using Partial = Bytes;
  using Output = std::size_t;  // iterations completed

  SyntheticFarm(SyntheticSpec spec, SpinKernel kernel);

  const SyntheticSpec& spec() const noexcept { return spec_; }
  const SpinKernel& kernel() const noexcept { return kernel_; }

  MasterState init_master(int) const { return {}; }
  WorkerState init_worker(int rank, int workers) const;
  Job make_job(const MasterState& s) const;
  Partial worker_step(const Job& job, int rank, int workers, WorkerState& ws) const;
  MasterState reduce(MasterState s, std::span<const Partial> partials) const;
  bool exit_condition(const MasterState& s) const { return s.completed >= spec_.iterations; }
  Output finalize(const MasterState& s) const { return s.completed; }

  Bytes encode_job(const Job& j) const { return j; }
  Job decode_job(ByteView b) const { return {b.begin(), b.end()}; }
  Bytes encode_partial(const Partial& p) const { return p; }
  Partial decode_partial(ByteView b) const { return {b.begin(), b.end()}; }

 private:
  SyntheticSpec spec_;
  SpinKernel kernel_;
};

/// Throws MustCalibrate when `kernel` has not been calibrated.
SyntheticFarm make_synthetic(SyntheticSpec spec, const SpinKernel& kernel);

}  // namespace bsf
