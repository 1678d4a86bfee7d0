#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <variant>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bsf/calibration.hpp"
#include "bsf/cost_model.hpp"
#include "bsf/errors.hpp"
#include "bsf/farm.hpp"
#include "bsf/quadratic.hpp"
#include "bsf/simulator.hpp"
#include "bsf/synthetic.hpp"
#include "bsf/tcp.hpp"

namespace bsf::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Signals an adequacy or agreement verdict failure (exit code 4).
struct VerdictFailure : Error {
  using Error::Error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidParameter("cannot write " + path.string());
  out << content;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || end != item.data() + item.size() || v < 1) {
      throw InvalidParameter("bad worker list '" + text + "' (want e.g. 1,2,4,8)");
    }
    out.push_back(v);
  }
  if (out.empty()) throw InvalidParameter("worker list is empty");
  return out;
}

// Cost parameters given either as t_s or as one or more v ratios.
struct ParamOptions {
  double work = 0.0;
  std::optional<double> job_send;
  std::vector<double> ratios;
  double latency = 0.0;
  double result_transfer = 0.0;
  double result_process = 0.0;

  void attach(CLI::App& app) {
    app.add_option("--tw", work, "t_w: compute time of a one-worker brigade")->required();
    auto* ts = app.add_option("--ts", job_send, "t_s: time to send one job to one worker");
    auto* v = app.add_option("--v", ratios, "v = lg(t_w/t_s); several values allowed")->delimiter(',');
    ts->excludes(v);
    v->excludes(ts);
    app.add_option("--L", latency, "message initiation latency");
    app.add_option("--tr", result_transfer, "t_r: total result transfer time");
    app.add_option("--tp", result_process, "t_p: master result-processing time");
  }

  struct Labeled {
    std::string label;  // file suffix, empty for a single t_s set
    std::optional<double> ratio;
    CostParams params;
  };

  std::vector<Labeled> resolve() const {
    if (!job_send && ratios.empty()) throw InvalidParameter("give either --ts or --v");
    if (job_send) return {{"", std::nullopt, CostParams(latency, *job_send, result_transfer, result_process, work)}};
    std::vector<Labeled> out;
    for (double v : ratios) {
      std::string label = ratios.size() > 1 ? "_v" + fmt(v) : "";
      out.push_back({label, v, CostParams::from_ratio(work, v, latency, result_transfer, result_process)});
    }
    return out;
  }

  CostParams single() const {
    auto all = resolve();
    if (all.size() != 1) throw InvalidParameter("this command takes a single parameter set (one --v)");
    return all.front().params;
  }
};

// model ---------------------------------------------------------------------

struct ModelOptions {
  ParamOptions params;
  std::string range = "1:2000";
  fs::path out_dir = ".";
};

int cmd_model(const ModelOptions& o, std::ostream& out) {
  const auto range = parse_worker_range(o.range);
  json summary = json::array();
  for (const auto& set : o.params.resolve()) {
    for (auto metric : {Metric::Speedup, Metric::Derivative, Metric::EfficiencyExact, Metric::EfficiencyApprox}) {
      const auto curve = emit_curve(set.params, metric, range);
      write_file(o.out_dir / (std::string(to_string(metric)) + set.label + ".csv"), curve.to_csv());
    }
    json entry{{"params", set.params}, {"K_range", {range.lo, range.hi, range.step}}};
    if (set.ratio) entry["v"] = *set.ratio;
    std::string line = set.ratio ? "v=" + fmt(*set.ratio) + " " : "";
    try {
      const double bound = scalability_bound(set.params);
      entry["K_star"] = bound;
      line += "K*=" + fmt(bound);
    } catch (const UnboundedScalability&) {
      entry["K_star"] = nullptr;
      line += "K*=unbounded";
    }
    const auto best = argmax_speedup_grid(set.params, range.hi);
    entry["grid_argmax"] = {{"K", best.workers}, {"speedup", best.speedup}};
    line += " argmax_K=" + std::to_string(best.workers) + " max_speedup=" + fmt(best.speedup);
    out << line << '\n';
    summary.push_back(std::move(entry));
  }
  write_file(o.out_dir / "model_summary.json", summary.dump(2) + "\n");
  return kOk;
}

// classify ------------------------------------------------------------------

int cmd_classify(double alpha, double beta, std::ostream& out) {
  const auto c = classify_scaling({alpha, beta});
  out << to_string(c.verdict) << " bound_exponent=" << fmt(c.bound_exponent) << '\n';
  return kOk;
}

// simulate ------------------------------------------------------------------

struct SimulateOptions {
  ParamOptions params;
  long long workers = 1;
  std::size_t iterations = 1;
  std::string mode = "phase-seq";
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::optional<fs::path> out_path;
  std::optional<std::string> sweep;
  std::optional<fs::path> sweep_out;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const SimConfig cfg{o.params.single(), o.workers, o.iterations, sim_mode_from_string(o.mode), o.noise, o.seed};
  const auto report = simulate(cfg);
  out << "K=" << cfg.workers << " mean_T_K=" << fmt(report.mean_time) << " model_T_K=" << fmt(report.model_time)
      << " relative_error=" << fmt(report.model_relative_error) << " speedup=" << fmt(report.speedup) << '\n';
  const auto text = report.to_json().dump(2) + "\n";
  if (o.out_path) {
    write_file(*o.out_path, text);
  }
  if (o.sweep) {
    const auto curve = simulated_speedup_sweep(cfg.params, parse_worker_range(*o.sweep), cfg.mode, cfg.noise,
                                               cfg.seed, cfg.iterations);
    write_file(o.sweep_out.value_or("sim_speedup.csv"), curve.to_csv());
    const auto peak = std::max_element(curve.points.begin(), curve.points.end(),
                                       [](const auto& a, const auto& b) { return a.value < b.value; });
    out << "sweep_peak_K=" << peak->workers << " sweep_peak_speedup=" << fmt(peak->value) << '\n';
  }
  return kOk;
}

// workloads -----------------------------------------------------------------

struct WorkloadOptions {
  std::string workload = "quadratic";
  std::string fixture = "small64x16";
  std::optional<fs::path> matrix;
  std::optional<fs::path> rhs;
  std::optional<double> step;
  std::optional<double> tolerance;
  std::optional<std::size_t> max_iterations;
  std::optional<fs::path> synthetic_config;
  double work_ms = 200.0;
  std::size_t job_bytes = 0;
  std::size_t result_bytes = 0;
  std::size_t iterations = 3;

  void attach(CLI::App& app) {
    app.add_option("--workload", workload, "quadratic | synthetic")->check(CLI::IsMember({"quadratic", "synthetic"}));
    app.add_option("--fixture", fixture, "built-in quadratic fixture (small64x16, identity2)");
    app.add_option("--matrix", matrix, "matrix file for A (first line 'm n')");
    app.add_option("--rhs", rhs, "matrix file for b (m x 1)");
    app.add_option("--step", step, "gradient step size");
    app.add_option("--tol", tolerance, "gradient-norm tolerance");
    app.add_option("--max-iter", max_iterations, "iteration cap");
    app.add_option("--config", synthetic_config, "synthetic workload JSON");
    app.add_option("--tw-ms", work_ms, "synthetic t_w per iteration in milliseconds");
    app.add_option("--job-bytes", job_bytes, "synthetic job payload size");
    app.add_option("--result-bytes", result_bytes, "synthetic total result payload size");
    app.add_option("--iterations", iterations, "synthetic iteration count");
  }

  QuadraticFarm quadratic() const {
    QuadraticProblem q;
    if (matrix) {
      if (!rhs) throw InvalidParameter("--matrix needs --rhs");
      q.a = load_matrix(*matrix);
      const auto b = load_matrix(*rhs);
      if (b.cols() != 1) throw InvalidParameter("--rhs must be an m x 1 matrix");
      q.b.assign(b.data().begin(), b.data().end());
      q.step = 1.0 / (1.01 * gram_spectral_radius(q.a));
    } else {
      q = quadratic_fixture(fixture);
    }
    if (step) q.step = *step;
    if (tolerance) q.tolerance = *tolerance;
    if (max_iterations) q.max_iterations = *max_iterations;
    return make_quadratic(std::move(q));
  }

  SyntheticSpec synthetic_spec() const {
    if (synthetic_config) return load_synthetic_spec(*synthetic_config);
    return synthetic_spec_from_json(
        {{"work_seconds", work_ms / 1000.0}, {"job_bytes", job_bytes}, {"result_bytes", result_bytes},
         {"iterations", iterations}});
  }
};

struct RunOptions {
  WorkloadOptions workload;
  std::string workers = "1,2,4,8";
  std::string backend = "inproc";
  std::optional<int> listen_port;
  std::string host = "127.0.0.1";
  double threshold = kDefaultAdequacyThreshold;
  double agreement = 1e-6;
  std::optional<fs::path> out_path;
  std::optional<fs::path> trace_dir;
};

template <class Outcome>
void write_trace(const RunOptions& o, int k, const Outcome& outcome) {
  if (!o.trace_dir) return;
  write_file(*o.trace_dir / ("trace_K" + std::to_string(k) + ".csv"), traces_to_csv(outcome.traces));
}

QuadraticResult run_quadratic_once(const RunOptions& o, const QuadraticFarm& farm, int k, const BackendConfig& cfg) {
  if (o.listen_port) {
    TcpMaster master(o.host, static_cast<std::uint16_t>(*o.listen_port), k);
    master.accept_workers(cfg.timeout);
    auto outcome = run_master(farm, master);
    write_trace(o, k, outcome);
    return outcome.output;
  }
  auto outcome = run_farm(farm, cfg, k);
  write_trace(o, k, outcome);
  return outcome.output;
}

int cmd_run_quadratic(const RunOptions& o, const std::vector<int>& ks, const BackendConfig& cfg, std::ostream& out) {
  const auto farm = o.workload.quadratic();
  const auto baseline = o.listen_port ? std::optional<QuadraticResult>{} : std::optional(run_single(farm).output);
  json runs = json::array();
  bool agree = true;
  for (int k : ks) {
    const auto result = run_quadratic_once(o, farm, k, cfg);
    json entry{{"K", k}, {"result", result}};
    std::string line = "K=" + std::to_string(k) + " iterations=" + std::to_string(result.iterations) +
                       " grad_norm=" + fmt(result.grad_norm);
    if (baseline) {
      double diff = 0.0;
      for (std::size_t j = 0; j < result.x.size(); ++j) diff = std::max(diff, std::abs(result.x[j] - baseline->x[j]));
      entry["max_abs_diff_vs_K1"] = diff;
      entry["agrees"] = diff <= o.agreement;
      agree = agree && diff <= o.agreement;
      line += " max_abs_diff_vs_K1=" + fmt(diff);
    }
    out << line << '\n';
    runs.push_back(std::move(entry));
  }
  json report{{"workload", "quadratic"}, {"backend", o.backend}, {"agreement_tolerance", o.agreement},
              {"runs", std::move(runs)}, {"cross_K_agreement", agree}};
  out << "cross_K_agreement=" << (agree ? "yes" : "no") << '\n';
  if (o.out_path) write_file(*o.out_path, report.dump(2) + "\n");
  if (!agree) throw VerdictFailure("solutions disagree across K beyond " + fmt(o.agreement));
  return kOk;
}

int cmd_run_synthetic(const RunOptions& o, const std::vector<int>& ks, const BackendConfig& cfg, std::ostream& out) {
  if (o.listen_port) throw InvalidParameter("--listen is only supported for the quadratic workload");
  const auto spec = o.workload.synthetic_spec();
  const auto kernel = SpinKernel::calibrate();
  const auto farm = make_synthetic(spec, kernel);
  const auto samples = measure_speedup(farm, cfg, ks);

  const std::vector<std::size_t> sizes{1'000, 10'000, 100'000};
  const auto link = calibrate(cfg, sizes, 5);
  const CostParams model(link.latency, static_cast<double>(spec.job_bytes) * link.seconds_per_byte,
                         static_cast<double>(spec.result_bytes) * link.seconds_per_byte, 0.0, spec.work_seconds);

  json rows = json::array();
  std::vector<Observation> observed;
  bool adequate = true;
  for (const auto& s : samples) {
    const double predicted = speedup(model, s.workers);
    const double deviation = std::abs(s.speedup - predicted) / predicted;
    const bool ok = deviation <= o.threshold;
    adequate = adequate && ok;
    observed.push_back({s.workers, s.wall_seconds / static_cast<double>(spec.iterations)});
    json row = s;
    row["predicted_speedup"] = predicted;
    row["relative_deviation"] = deviation;
    row["within_threshold"] = ok;
    rows.push_back(std::move(row));
    out << "K=" << s.workers << " measured_speedup=" << fmt(s.speedup) << " predicted_speedup=" << fmt(predicted)
        << " relative_deviation=" << fmt(deviation) << " measured_efficiency=" << fmt(s.efficiency) << '\n';
  }
  const auto time_report = adequacy_report(model, observed, o.threshold);
  json report{{"workload", "synthetic"},
              {"backend", o.backend},
              {"spec", spec},
              {"spin_iterations_per_second", kernel.iterations_per_second()},
              {"model", model},
              {"link_calibration", link.to_json()},
              {"speedup", std::move(rows)},
              {"iteration_time_adequacy", time_report.to_json()},
              {"threshold", o.threshold},
              {"verdict", adequate ? "adequate" : "not adequate"}};
  out << "verdict=" << (adequate ? "adequate" : "not adequate") << '\n';
  if (o.out_path) write_file(*o.out_path, report.dump(2) + "\n");
  if (!adequate) throw VerdictFailure("measured speedup deviates from the model beyond " + fmt(o.threshold));
  return kOk;
}

int cmd_run(const RunOptions& o, std::ostream& out) {
  BackendConfig cfg;
  cfg.kind = backend_from_string(o.backend);
  cfg.host = o.host;
  if (cfg.kind == Backend::Virtual) throw InvalidParameter("farm runs need a real backend (inproc or tcp)");
  if (o.listen_port && cfg.kind != Backend::Tcp) throw InvalidParameter("--listen requires --backend tcp");
  const auto ks = parse_int_list(o.workers);
  if (o.listen_port && ks.size() != 1) throw InvalidParameter("--listen takes exactly one K");
  if (o.workload.workload == "quadratic") return cmd_run_quadratic(o, ks, cfg, out);
  return cmd_run_synthetic(o, ks, cfg, out);
}

// worker --------------------------------------------------------------------

struct WorkerOptions {
  WorkloadOptions workload;
  std::string host = "127.0.0.1";
  int port = 0;
  int rank = 1;
  int workers = 1;
};

int cmd_worker(const WorkerOptions& o, std::ostream& out) {
  TcpWorker ep(o.host, static_cast<std::uint16_t>(o.port), o.rank, o.workers + 1);
  if (o.workload.workload == "quadratic") {
    run_worker(o.workload.quadratic(), ep);
  } else {
    run_worker(make_synthetic(o.workload.synthetic_spec(), SpinKernel::calibrate()), ep);
  }
  out << "worker " << o.rank << " done\n";
  return kOk;
}

// calibrate -----------------------------------------------------------------

struct CalibrateOptions {
  std::string backend = "inproc";
  std::string sizes = "1k,10k,100k";
  std::size_t repetitions = 5;
  double planted_latency = 0.5;
  double planted_rate = 1e-3;
  std::optional<fs::path> out_path;
};

int cmd_calibrate(const CalibrateOptions& o, std::ostream& out) {
  BackendConfig cfg;
  cfg.kind = backend_from_string(o.backend);
  cfg.link = {o.planted_latency, o.planted_rate};
  const auto report = calibrate(cfg, parse_sizes(o.sizes), o.repetitions);
  out << "L=" << fmt(report.latency) << " seconds_per_byte=" << fmt(report.seconds_per_byte)
      << " r_squared=" << fmt(report.fit.r_squared) << '\n';
  const auto text = report.to_json().dump(2) + "\n";
  if (o.out_path) {
    write_file(*o.out_path, text);
  } else {
    out << text;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bulk-synchronous farm toolkit: cost model, simulator, farm runs, calibration", "bsf"};
  app.require_subcommand(1);

  ModelOptions model;
  auto* model_cmd = app.add_subcommand("model", "Write speedup/derivative/efficiency curves and the scalability bound");
  model.params.attach(*model_cmd);
  model_cmd->add_option("--k", model.range, "K range lo:hi[:step]");
  model_cmd->add_option("--out-dir", model.out_dir, "directory for CSV/JSON output");

  double alpha = 0.0, beta = 0.0;
  auto* classify_cmd = app.add_subcommand("classify", "Classify scalability from t_s ~ n^alpha, t_w ~ n^beta");
  classify_cmd->add_option("--alpha", alpha, "exponent of t_s in n")->required();
  classify_cmd->add_option("--beta", beta, "exponent of t_w in n")->required();

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Virtual-clock simulation of the iteration timeline");
  sim.params.attach(*sim_cmd);
  sim_cmd->add_option("--K", sim.workers, "worker count");
  sim_cmd->add_option("--iterations", sim.iterations, "iterations to simulate");
  sim_cmd->add_option("--mode", sim.mode, "phase-seq | overlapped");
  sim_cmd->add_option("--noise", sim.noise, "relative noise amplitude in [0, 1)");
  sim_cmd->add_option("--seed", sim.seed, "noise seed");
  sim_cmd->add_option("--out", sim.out_path, "SimReport JSON path");
  sim_cmd->add_option("--sweep", sim.sweep, "also sweep speedup over lo:hi[:step]");
  sim_cmd->add_option("--sweep-out", sim.sweep_out, "sweep CSV path (default sim_speedup.csv)");

  RunOptions runo;
  auto* run_cmd = app.add_subcommand("run", "Run a workload on the farm for several K");
  runo.workload.attach(*run_cmd);
  run_cmd->add_option("--K", runo.workers, "comma-separated worker counts");
  run_cmd->add_option("--backend", runo.backend, "inproc | tcp");
  run_cmd->add_option("--listen", runo.listen_port, "tcp: wait for external workers on this port");
  run_cmd->add_option("--host", runo.host, "tcp bind address");
  run_cmd->add_option("--threshold", runo.threshold, "synthetic adequacy threshold (relative)");
  run_cmd->add_option("--agreement", runo.agreement, "quadratic cross-K tolerance");
  run_cmd->add_option("--out", runo.out_path, "report JSON path");
  run_cmd->add_option("--trace-dir", runo.trace_dir, "write trace_K<k>.csv files here");

  WorkerOptions worker;
  auto* worker_cmd = app.add_subcommand("worker", "Serve one worker rank of a TCP farm");
  worker.workload.attach(*worker_cmd);
  worker_cmd->add_option("--host", worker.host, "master address");
  worker_cmd->add_option("--port", worker.port, "master port")->required();
  worker_cmd->add_option("--rank", worker.rank, "this worker's rank (1..K)")->required();
  worker_cmd->add_option("--workers", worker.workers, "K, the number of workers")->required();

  CalibrateOptions cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Estimate L and per-byte cost by ping-pong");
  cal_cmd->add_option("--backend", cal.backend, "inproc | tcp | virtual");
  cal_cmd->add_option("--sizes", cal.sizes, "payload sizes, e.g. 1k,10k,100k");
  cal_cmd->add_option("--reps", cal.repetitions, "repetitions per size (>= 5)");
  cal_cmd->add_option("--planted-L", cal.planted_latency, "virtual backend latency");
  cal_cmd->add_option("--planted-rate", cal.planted_rate, "virtual backend seconds per byte");
  cal_cmd->add_option("--out", cal.out_path, "report JSON path (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidArguments;
  }

  try {
    if (model_cmd->parsed()) return cmd_model(model, out);
    if (classify_cmd->parsed()) return cmd_classify(alpha, beta, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, out);
    if (run_cmd->parsed()) return cmd_run(runo, out);
    if (worker_cmd->parsed()) return cmd_worker(worker, out);
    if (cal_cmd->parsed()) return cmd_calibrate(cal, out);
  } catch (const VerdictFailure& e) {
    err << "verdict: " << e.what() << '\n';
    return kAdequacyFailure;
  } catch (const TransportFailure& e) {
    err << "transport failure: " << e.what() << '\n';
    return kTransportFailure;
  } catch (const InvalidParameter& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kInvalidArguments;
  } catch (const UndefinedRatio& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kInvalidArguments;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace bsf::cli
