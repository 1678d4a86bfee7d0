#pragma once

// Analytical cost model of a bulk-synchronous master/worker farm.
//
// One iteration on K workers costs
//
//   T_K = K (2L + t_s) + t_r + t_p + t_w / K
//
// where L is the per-message initiation latency, t_s the time to ship one job
// to one worker, t_r the total time to ship all results back, t_p the master's
// processing time and t_w the compute time of a single-worker brigade. All
// quantities are abstract time units.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace bsf {

using WorkerCount = std::int64_t;

class CostParams {
 public:
  /// Throws InvalidParameter unless every field is finite and >= 0 and work > 0.
  CostParams(double latency, double job_send, double result_transfer, double result_process, double work);

  /// Builds parameters from the compute/send ratio v = lg(t_w / t_s).
  static CostParams from_ratio(double work, double v, double latency, double result_transfer,
                               double result_process);

  double latency() const noexcept { return latency_; }
  double job_send() const noexcept { return job_send_; }
  double result_transfer() const noexcept { return result_transfer_; }
  double result_process() const noexcept { return result_process_; }
  double work() const noexcept { return work_; }

  /// 2L + t_s, the per-worker cost of shipping a job.
  double send_overhead() const noexcept { return 2.0 * latency_ + job_send_; }
  /// t_r + t_p
  double result_overhead() const noexcept { return result_transfer_ + result_process_; }

  CostParams with_result_costs(double result_transfer, double result_process) const;

  friend bool operator==(const CostParams&, const CostParams&) = default;

 private:
  double latency_;
  double job_send_;
  double result_transfer_;
  double result_process_;
  double work_;
};

void to_json(nlohmann::json& j, const CostParams& p);
CostParams cost_params_from_json(const nlohmann::json& j);

/// Classic BSP machine/program description: per-superstep work and h-relation maxima.
struct BspParams {
  std::vector<double> work;     // w_i
  std::vector<double> packets;  // h_i
  double gap = 0.0;             // g
  double latency = 0.0;         // L

  std::size_t superstep_count() const noexcept { return work.size(); }
};

double bsp_superstep_time(double work, double packets, double gap, double latency);
double bsp_total_time(const BspParams& p);

double iteration_time_single(const CostParams& p);
double iteration_time(const CostParams& p, WorkerCount workers);

double ratio_to_send_time(double work, double v);
double send_time_to_ratio(double work, double job_send);

double speedup(const CostParams& p, WorkerCount workers);

/// Derivative of the continuous relaxation of speedup at real-valued K >= 1.
double speedup_derivative(const CostParams& p, double workers);

/// sqrt(t_w / (2L + t_s)): the worker count maximizing speedup.
double scalability_bound(const CostParams& p);

struct GridArgmax {
  WorkerCount workers;
  double speedup;
};

/// Exhaustive scan of K = 1..max_workers; ties go to the smaller K.
GridArgmax argmax_speedup_grid(const CostParams& p, WorkerCount max_workers);

double efficiency_exact(const CostParams& p, WorkerCount workers);
double efficiency_approx(const CostParams& p, WorkerCount workers);

/// Asymptotic growth of t_s ~ n^alpha and t_w ~ n^beta in problem size n.
struct ScalingLaw {
  double alpha;
  double beta;
};

enum class ScalabilityVerdict { WellScalable, LimitedScalable, PoorlyScalable };

std::string_view to_string(ScalabilityVerdict v);

struct ScalabilityClass {
  ScalabilityVerdict verdict;
  double bound_exponent;  // K* grows as n^bound_exponent
};

ScalabilityClass classify_scaling(const ScalingLaw& law);

// Curves

enum class Metric { Speedup, Derivative, EfficiencyExact, EfficiencyApprox };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view name);

struct WorkerRange {
  WorkerCount lo = 1;
  WorkerCount hi = 1;
  WorkerCount step = 1;
};

/// Parses "lo:hi" or "lo:hi:step".
WorkerRange parse_worker_range(std::string_view text);

struct CurvePoint {
  WorkerCount workers;
  double value;
};

struct CurveSeries {
  Metric metric;
  CostParams params;
  std::vector<CurvePoint> points;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

double evaluate(Metric m, const CostParams& p, WorkerCount workers);

CurveSeries emit_curve(const CostParams& p, Metric metric, const WorkerRange& range);

}  // namespace bsf
