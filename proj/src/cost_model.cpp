#include "bsf/cost_model.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "bsf/errors.hpp"

namespace bsf {

namespace {

void require_non_negative(double value, const char* name) {
  if (!std::isfinite(value) || value < 0.0) {
    throw InvalidParameter(std::string(name) + " must be finite and >= 0");
  }
}

void require_workers(WorkerCount k) {
  if (k < 1) throw InvalidParameter("worker count must be >= 1, got " + std::to_string(k));
}

}  // namespace

CostParams::CostParams(double latency, double job_send, double result_transfer, double result_process,
                       double work)
    : latency_(latency),
      job_send_(job_send),
      result_transfer_(result_transfer),
      result_process_(result_process),
      work_(work) {
  require_non_negative(latency, "L");
  require_non_negative(job_send, "t_s");
  require_non_negative(result_transfer, "t_r");
  require_non_negative(result_process, "t_p");
  require_non_negative(work, "t_w");
  if (work <= 0.0) throw InvalidParameter("t_w must be > 0: an iteration performs work");
}

CostParams CostParams::from_ratio(double work, double v, double latency, double result_transfer,
                                  double result_process) {
  return {latency, ratio_to_send_time(work, v), result_transfer, result_process, work};
}

CostParams CostParams::with_result_costs(double result_transfer, double result_process) const {
  return {latency_, job_send_, result_transfer, result_process, work_};
}

void to_json(nlohmann::json& j, const CostParams& p) {
  j = nlohmann::json{{"L", p.latency()},
                     {"t_s", p.job_send()},
                     {"t_r", p.result_transfer()},
                     {"t_p", p.result_process()},
                     {"t_w", p.work()}};
}

CostParams cost_params_from_json(const nlohmann::json& j) {
  return {j.at("L").get<double>(), j.at("t_s").get<double>(), j.at("t_r").get<double>(),
          j.at("t_p").get<double>(), j.at("t_w").get<double>()};
}

double bsp_superstep_time(double work, double packets, double gap, double latency) {
  require_non_negative(work, "w");
  require_non_negative(packets, "h");
  require_non_negative(gap, "g");
  require_non_negative(latency, "L");
  return work + gap * packets + latency;
}

double bsp_total_time(const BspParams& p) {
  if (p.work.size() != p.packets.size()) {
    throw InvalidParameter("BSP work and packet lists differ in length");
  }
  if (p.work.empty()) throw InvalidParameter("BSP program needs at least one superstep");
  double total = 0.0;
  for (std::size_t i = 0; i < p.work.size(); ++i) {
    total += bsp_superstep_time(p.work[i], p.packets[i], p.gap, p.latency);
  }
  return total;
}

// T_1 and T_K share one association order so that T_K(1) == T_1 bit for bit.
double iteration_time_single(const CostParams& p) {
  return p.send_overhead() + p.result_transfer() + p.result_process() + p.work();
}

double iteration_time(const CostParams& p, WorkerCount workers) {
  require_workers(workers);
  const auto k = static_cast<double>(workers);
  return k * p.send_overhead() + p.result_transfer() + p.result_process() + p.work() / k;
}

double ratio_to_send_time(double work, double v) {
  if (!(work > 0.0) || !std::isfinite(work)) throw InvalidParameter("t_w must be finite and > 0");
  if (!std::isfinite(v)) throw InvalidParameter("v must be finite");
  return std::pow(10.0, -v) * work;
}

double send_time_to_ratio(double work, double job_send) {
  if (!(work > 0.0) || !std::isfinite(work)) throw InvalidParameter("t_w must be finite and > 0");
  if (job_send == 0.0) throw UndefinedRatio("t_s = 0: lg(t_w/t_s) is undefined");
  if (!(job_send > 0.0) || !std::isfinite(job_send)) {
    throw InvalidParameter("t_s must be finite and > 0");
  }
  return std::log10(work / job_send);
}

double speedup(const CostParams& p, WorkerCount workers) {
  return iteration_time_single(p) / iteration_time(p, workers);
}

double speedup_derivative(const CostParams& p, double workers) {
  if (!(workers >= 1.0) || !std::isfinite(workers)) {
    throw InvalidParameter("derivative needs a finite K >= 1");
  }
  const double k = workers;
  const double c = p.send_overhead();
  const double denom = k * c + p.result_overhead() + p.work() / k;
  return iteration_time_single(p) * (p.work() / (k * k) - c) / (denom * denom);
}

double scalability_bound(const CostParams& p) {
  const double c = p.send_overhead();
  if (c <= 0.0) throw UnboundedScalability("2L + t_s = 0: speedup has no finite maximizer");
  return std::sqrt(p.work() / c);
}

GridArgmax argmax_speedup_grid(const CostParams& p, WorkerCount max_workers) {
  require_workers(max_workers);
  GridArgmax best{1, speedup(p, 1)};
  for (WorkerCount k = 2; k <= max_workers; ++k) {
    const double a = speedup(p, k);
    if (a > best.speedup) best = {k, a};
  }
  return best;
}

double efficiency_exact(const CostParams& p, WorkerCount workers) {
  return iteration_time_single(p) / (static_cast<double>(workers) * iteration_time(p, workers));
}

double efficiency_approx(const CostParams& p, WorkerCount workers) {
  require_workers(workers);
  const auto k = static_cast<double>(workers);
  return 1.0 / (1.0 + (k * k * p.send_overhead() + k * p.result_overhead()) / p.work());
}

std::string_view to_string(ScalabilityVerdict v) {
  switch (v) {
    case ScalabilityVerdict::WellScalable: return "WellScalable";
    case ScalabilityVerdict::LimitedScalable: return "LimitedScalable";
    case ScalabilityVerdict::PoorlyScalable: return "PoorlyScalable";
  }
  return "?";
}

ScalabilityClass classify_scaling(const ScalingLaw& law) {
  if (!std::isfinite(law.alpha) || !std::isfinite(law.beta)) {
    throw InvalidParameter("scaling exponents must be finite");
  }
  const double exponent = (law.beta - law.alpha) / 2.0;
  if (exponent >= 1.0) return {ScalabilityVerdict::WellScalable, exponent};
  if (exponent > 0.0) return {ScalabilityVerdict::LimitedScalable, exponent};
  return {ScalabilityVerdict::PoorlyScalable, exponent};
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Speedup: return "speedup";
    case Metric::Derivative: return "derivative";
    case Metric::EfficiencyExact: return "efficiency_exact";
    case Metric::EfficiencyApprox: return "efficiency_approx";
  }
  return "?";
}

Metric metric_from_string(std::string_view name) {
  for (auto m : {Metric::Speedup, Metric::Derivative, Metric::EfficiencyExact, Metric::EfficiencyApprox}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidParameter("unknown metric '" + std::string(name) + "'");
}

WorkerRange parse_worker_range(std::string_view text) {
  WorkerRange r;
  WorkerCount* fields[] = {&r.lo, &r.hi, &r.step};
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto colon = text.find(':', pos);
    const auto part = text.substr(pos, colon == std::string_view::npos ? std::string_view::npos : colon - pos);
    if (n == 3) throw InvalidParameter("worker range has too many fields: " + std::string(text));
    const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), *fields[n]);
    if (ec != std::errc{} || end != part.data() + part.size() || part.empty()) {
      throw InvalidParameter("bad worker range '" + std::string(text) + "' (want lo:hi[:step])");
    }
    ++n;
    if (colon == std::string_view::npos) break;
    pos = colon + 1;
  }
  if (n < 2) throw InvalidParameter("bad worker range '" + std::string(text) + "' (want lo:hi[:step])");
  return r;
}

double evaluate(Metric m, const CostParams& p, WorkerCount workers) {
  switch (m) {
    case Metric::Speedup: return speedup(p, workers);
    case Metric::Derivative: return speedup_derivative(p, static_cast<double>(workers));
    case Metric::EfficiencyExact: return efficiency_exact(p, workers);
    case Metric::EfficiencyApprox: return efficiency_approx(p, workers);
  }
  throw InvalidParameter("unknown metric");
}

CurveSeries emit_curve(const CostParams& p, Metric metric, const WorkerRange& range) {
  if (range.lo < 1 || range.hi < range.lo || range.step < 1) {
    throw InvalidParameter("empty worker range: need 1 <= lo <= hi and step >= 1");
  }
  CurveSeries series{metric, p, {}};
  series.points.reserve(static_cast<std::size_t>((range.hi - range.lo) / range.step + 1));
  for (WorkerCount k = range.lo; k <= range.hi; k += range.step) {
    series.points.push_back({k, evaluate(metric, p, k)});
  }
  return series;
}

std::string CurveSeries::to_csv() const {
  std::string out = "K,";
  out += to_string(metric);
  out += '\n';
  char buf[64];
  for (const auto& pt : points) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(pt.workers), pt.value);
    out += buf;
  }
  return out;
}

nlohmann::json CurveSeries::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& pt : points) pts.push_back({pt.workers, pt.value});
  return {{"metric", std::string(to_string(metric))}, {"params", params}, {"points", std::move(pts)}};
}

}  // namespace bsf
