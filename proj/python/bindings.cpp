#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "bsf/calibration.hpp"
#include "bsf/cost_model.hpp"
#include "bsf/errors.hpp"
#include "bsf/farm.hpp"
#include "bsf/quadratic.hpp"
#include "bsf/simulator.hpp"
#include "bsf/transport.hpp"

namespace py = pybind11;
using namespace bsf;

namespace {

// Structured results cross the boundary as JSON text; the package decodes them.
std::string dump(const nlohmann::json& j) { return j.dump(); }

std::vector<std::pair<WorkerCount, double>> points(const CurveSeries& c) {
  std::vector<std::pair<WorkerCount, double>> out;
  for (const auto& p : c.points) out.emplace_back(p.workers, p.value);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bulk-synchronous farm cost model, simulator and farm runner.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
  py::register_exception<UndefinedRatio>(m, "UndefinedRatio", base.ptr());
  py::register_exception<UnboundedScalability>(m, "UnboundedScalability", base.ptr());
  py::register_exception<TransportFailure>(m, "TransportFailure", base.ptr());

  py::class_<CostParams>(m, "CostParams")
      .def(py::init<double, double, double, double, double>(), py::arg("L"), py::arg("t_s"), py::arg("t_r"),
           py::arg("t_p"), py::arg("t_w"))
      .def_static("from_ratio", &CostParams::from_ratio, py::arg("t_w"), py::arg("v"), py::arg("L") = 0.0,
                  py::arg("t_r") = 0.0, py::arg("t_p") = 0.0)
      .def_property_readonly("L", &CostParams::latency)
      .def_property_readonly("t_s", &CostParams::job_send)
      .def_property_readonly("t_r", &CostParams::result_transfer)
      .def_property_readonly("t_p", &CostParams::result_process)
      .def_property_readonly("t_w", &CostParams::work)
      .def("__eq__", [](const CostParams& a, const CostParams& b) { return a == b; })
      .def("__repr__", [](const CostParams& p) { return "CostParams(" + nlohmann::json(p).dump() + ")"; });

  m.def("bsp_superstep_time", &bsp_superstep_time, py::arg("w"), py::arg("h"), py::arg("g"), py::arg("L"));
  m.def(
      "bsp_total_time",
      [](std::vector<double> w, std::vector<double> h, double g, double latency) {
        return bsp_total_time({std::move(w), std::move(h), g, latency});
      },
      py::arg("w"), py::arg("h"), py::arg("g"), py::arg("L"));

  m.def("iteration_time_single", &iteration_time_single);
  m.def("iteration_time", &iteration_time, py::arg("params"), py::arg("K"));
  m.def("v_to_ts", &ratio_to_send_time, py::arg("t_w"), py::arg("v"));
  m.def("ts_to_v", &send_time_to_ratio, py::arg("t_w"), py::arg("t_s"));
  m.def("speedup", &speedup, py::arg("params"), py::arg("K"));
  m.def("speedup_derivative", &speedup_derivative, py::arg("params"), py::arg("K"));
  m.def("scalability_bound", &scalability_bound);
  m.def(
      "argmax_speedup_grid",
      [](const CostParams& p, WorkerCount k_max) {
        const auto g = argmax_speedup_grid(p, k_max);
        return std::make_pair(g.workers, g.speedup);
      },
      py::arg("params"), py::arg("K_max"));
  m.def("efficiency_exact", &efficiency_exact, py::arg("params"), py::arg("K"));
  m.def("efficiency_approx", &efficiency_approx, py::arg("params"), py::arg("K"));
  m.def(
      "classify_scaling",
      [](double alpha, double beta) {
        const auto c = classify_scaling({alpha, beta});
        return std::make_pair(std::string(to_string(c.verdict)), c.bound_exponent);
      },
      py::arg("alpha"), py::arg("beta"));
  m.def(
      "emit_curve",
      [](const CostParams& p, const std::string& metric, WorkerCount lo, WorkerCount hi, WorkerCount step) {
        return points(emit_curve(p, metric_from_string(metric), {lo, hi, step}));
      },
      py::arg("params"), py::arg("metric"), py::arg("lo"), py::arg("hi"), py::arg("step") = 1);

  m.def(
      "simulate_json",
      [](const CostParams& p, WorkerCount k, std::size_t iterations, const std::string& mode, double noise,
         std::uint64_t seed) {
        return dump(simulate({p, k, iterations, sim_mode_from_string(mode), noise, seed}).to_json());
      },
      py::arg("params"), py::arg("K"), py::arg("iterations") = 1, py::arg("mode") = "phase-seq",
      py::arg("noise") = 0.0, py::arg("seed") = 0);
  m.def(
      "simulated_speedup_sweep",
      [](const CostParams& p, WorkerCount lo, WorkerCount hi, WorkerCount step, const std::string& mode, double noise,
         std::uint64_t seed, std::size_t iterations) {
        return points(simulated_speedup_sweep(p, {lo, hi, step}, sim_mode_from_string(mode), noise, seed, iterations));
      },
      py::arg("params"), py::arg("lo"), py::arg("hi"), py::arg("step") = 1, py::arg("mode") = "phase-seq",
      py::arg("noise") = 0.0, py::arg("seed") = 0, py::arg("iterations") = 1);
  m.def(
      "adequacy_report_json",
      [](const CostParams& p, const std::vector<std::pair<WorkerCount, double>>& observed, double threshold) {
        std::vector<Observation> obs;
        for (const auto& [k, t] : observed) obs.push_back({k, t});
        return dump(adequacy_report(p, obs, threshold).to_json());
      },
      py::arg("params"), py::arg("observed"), py::arg("threshold") = kDefaultAdequacyThreshold);

  m.def(
      "run_quadratic_json",
      [](const std::string& fixture, int k, const std::string& backend) {
        BackendConfig cfg;
        cfg.kind = backend_from_string(backend);
        py::gil_scoped_release release;
        const auto outcome = run_farm(make_quadratic(quadratic_fixture(fixture)), cfg, k);
        nlohmann::json j = outcome.output;
        j["iteration_count"] = outcome.iteration_count;
        j["wall_seconds"] = outcome.wall_seconds;
        return dump(j);
      },
      py::arg("fixture") = "small64x16", py::arg("K") = 1, py::arg("backend") = "inproc");

  m.def(
      "calibrate_json",
      [](const std::string& backend, const std::vector<std::size_t>& sizes, std::size_t repetitions, double latency,
         double seconds_per_byte) {
        BackendConfig cfg;
        cfg.kind = backend_from_string(backend);
        cfg.link = {latency, seconds_per_byte};
        py::gil_scoped_release release;
        return dump(calibrate(cfg, sizes, repetitions).to_json());
      },
      py::arg("backend") = "inproc", py::arg("sizes") = std::vector<std::size_t>{1'000, 10'000, 100'000},
      py::arg("repetitions") = 5, py::arg("L") = 0.0, py::arg("seconds_per_byte") = 0.0);

  m.def(
      "encode_frame",
      [](int tag, const py::bytes& payload) {
        if (tag < 0 || tag > 3) throw InvalidParameter("tag must be 0..3");
        const std::string s = payload;
        const auto frame = encode_frame({static_cast<Tag>(tag), Bytes(s.begin(), s.end())});
        return py::bytes(reinterpret_cast<const char*>(frame.data()), frame.size());
      },
      py::arg("tag"), py::arg("payload"));
  m.def("decode_frame", [](const py::bytes& frame) {
    const std::string s = frame;
    const Bytes raw(s.begin(), s.end());
    const auto msg = decode_frame(raw);
    return std::make_pair(static_cast<int>(msg.tag),
                          py::bytes(reinterpret_cast<const char*>(msg.payload.data()), msg.payload.size()));
  });
}
