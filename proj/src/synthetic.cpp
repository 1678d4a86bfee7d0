#include "bsf/synthetic.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bsf/errors.hpp"
#include "bsf/quadratic.hpp"

namespace bsf {

namespace {
using Clock = std::chrono::steady_clock;
}

SpinKernel::SpinKernel(double iterations_per_second) : rate_(iterations_per_second) {
  if (!(iterations_per_second > 0.0) || !std::isfinite(iterations_per_second)) {
    throw InvalidParameter("spin rate must be finite and > 0");
  }
}

std::uint64_t SpinKernel::run(std::uint64_t iterations) {
  volatile std::uint64_t sink = 0;
  std::uint64_t acc = 0x243F6A8885A308D3ull;
  for (std::uint64_t i = 0; i < iterations; ++i) acc = (acc ^ (acc >> 7)) * 0x9E3779B97F4A7C15ull + i;
  sink = acc;
  return sink;
}

SpinKernel SpinKernel::calibrate(std::chrono::milliseconds sample) {
  // Grow the batch until one batch spans the sample window, then take the
  // best of three to discount preemption.
  std::uint64_t batch = 1 << 16;
  double seconds = 0.0;
  const double target = std::chrono::duration<double>(sample).count();
  while (true) {
    const auto t0 = Clock::now();
    run(batch);
    seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (seconds >= target / 4 || batch > (1ull << 40)) break;
    batch *= 2;
  }
  double best = seconds;
  for (int i = 0; i < 3; ++i) {
    const auto t0 = Clock::now();
    run(batch);
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return SpinKernel(static_cast<double>(batch) / best);
}

void SpinKernel::spin(double seconds) const {
  if (!calibrated()) throw MustCalibrate("spin kernel is not calibrated on this host");
  if (seconds <= 0.0) return;
  run(static_cast<std::uint64_t>(std::llround(seconds * rate_)));
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = nlohmann::json{{"work_seconds", s.work_seconds},
                     {"job_bytes", s.job_bytes},
                     {"result_bytes", s.result_bytes},
                     {"iterations", s.iterations}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.work_seconds = j.value("work_seconds", s.work_seconds);
  s.job_bytes = j.value("job_bytes", s.job_bytes);
  s.result_bytes = j.value("result_bytes", s.result_bytes);
  s.iterations = j.value("iterations", s.iterations);
  if (!(s.work_seconds >= 0.0) || !std::isfinite(s.work_seconds)) {
    throw InvalidParameter("work_seconds must be finite and >= 0");
  }
  if (s.iterations < 1) throw InvalidParameter("iterations must be >= 1");
  return s;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open synthetic spec " + path.string());
  try {
    return synthetic_spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidParameter("bad synthetic spec " + path.string() + ": " + e.what());
  }
}

SyntheticFarm::SyntheticFarm(SyntheticSpec spec, SpinKernel kernel) : spec_(spec), kernel_(kernel) {}

SyntheticFarm make_synthetic(SyntheticSpec spec, const SpinKernel& kernel) {
  if (!kernel.calibrated()) throw MustCalibrate("calibrate the spin kernel before building a synthetic workload");
  if (!(spec.work_seconds >= 0.0) || !std::isfinite(spec.work_seconds)) {
    throw InvalidParameter("work_seconds must be finite and >= 0");
  }
  if (spec.iterations < 1) throw InvalidParameter("iterations must be >= 1");
  return {spec, kernel};
}

SyntheticFarm::WorkerState SyntheticFarm::init_worker(int rank, int workers) const {
  const auto [begin, end] = row_block(spec_.result_bytes, rank, workers);
  return {end - begin};
}

SyntheticFarm::Job SyntheticFarm::make_job(const MasterState& s) const {
  Job job(spec_.job_bytes);
  for (std::size_t i = 0; i < job.size(); ++i) job[i] = static_cast<std::uint8_t>(i + s.completed);
  return job;
}

SyntheticFarm::Partial SyntheticFarm::worker_step(const Job& job, int rank, int workers, WorkerState& ws) const {
  kernel_.spin(spec_.work_seconds / workers);
  Partial out(ws.result_bytes, static_cast<std::uint8_t>(rank));
  if (!out.empty() && !job.empty()) out[0] = job[0];
  return out;
}

SyntheticFarm::MasterState SyntheticFarm::reduce(MasterState s, std::span<const Partial>) const {
  ++s.completed;
  return s;
}

}  // namespace bsf
