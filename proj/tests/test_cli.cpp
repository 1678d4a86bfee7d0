#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "bsf/tcp.hpp"
#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = bsf::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("bsf_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("model prints the bound and writes every curve") {
  const auto dir = scratch("model");
  const auto r = run({"model", "--tw", "1e12", "--v", "5", "--L", "0.5", "--tr", "1e4", "--tp", "1e4", "--k", "1:2000",
                      "--out-dir", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("K*=316.22775") != std::string::npos);
  CHECK(r.out.find("argmax_K=316") != std::string::npos);
  for (auto name : {"speedup", "derivative", "efficiency_exact", "efficiency_approx"}) {
    const auto text = slurp(dir / (std::string(name) + ".csv"));
    CHECK(text.rfind("K," + std::string(name) + "\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2001);
  }
  const auto summary = json::parse(slurp(dir / "model_summary.json"));
  CHECK(summary[0]["grid_argmax"]["K"] == 316);
  CHECK(summary[0]["K_star"].get<double>() == doctest::Approx(316.2277502054508));
  fs::remove_all(dir);
}

TEST_CASE("model with unit parameters has K* = 1 and falling speedup") {
  const auto dir = scratch("unit");
  const auto r = run({"model", "--tw", "1", "--ts", "1", "--L", "0", "--tr", "0", "--tp", "0", "--k", "1:10",
                      "--out-dir", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("K*=1 ") != std::string::npos);
  std::istringstream csv(slurp(dir / "speedup.csv"));
  std::string line;
  std::getline(csv, line);
  double prev = 2.0;
  while (std::getline(csv, line)) {
    const double v = std::stod(line.substr(line.find(',') + 1));
    CHECK(v < prev);
    prev = v;
  }
  fs::remove_all(dir);
}

TEST_CASE("v sweep writes one file per v with ordered peaks") {
  const auto dir = scratch("sweep");
  const auto r = run({"model", "--tw", "1e12", "--v", "4,5,6", "--L", "0.5", "--tr", "1e4", "--tp", "1e4", "--k",
                      "1:2000", "--out-dir", dir.string()});
  CHECK(r.code == 0);
  for (auto v : {"4", "5", "6"}) CHECK(fs::exists(dir / ("speedup_v" + std::string(v) + ".csv")));
  const auto summary = json::parse(slurp(dir / "model_summary.json"));
  REQUIRE(summary.size() == 3);
  CHECK(summary[0]["grid_argmax"]["K"] < summary[1]["grid_argmax"]["K"]);
  CHECK(summary[1]["grid_argmax"]["K"] < summary[2]["grid_argmax"]["K"]);
  fs::remove_all(dir);
}

TEST_CASE("repeated model runs produce byte-identical files") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& dir : {a, b}) {
    CHECK(run({"model", "--tw", "1e12", "--v", "5", "--L", "0.5", "--k", "1:300", "--out-dir", dir.string()}).code == 0);
  }
  for (auto name : {"speedup.csv", "derivative.csv", "efficiency_exact.csv", "model_summary.json"}) {
    CHECK(slurp(a / name) == slurp(b / name));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("argument errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"nonsense"}).code == 2);
  CHECK(run({"model", "--tw", "1", "--ts", "1", "--v", "3"}).code == 2);
  CHECK(run({"model", "--tw", "1"}).code == 2);
  CHECK(run({"model", "--tw", "-1", "--ts", "1"}).code == 2);
  CHECK(run({"model", "--tw", "1", "--ts", "1", "--k", "9:1"}).code == 2);
  CHECK(run({"simulate", "--tw", "1", "--ts", "1", "--noise", "1.5"}).code == 2);
  CHECK(run({"run", "--K", "1,x"}).code == 2);
  CHECK(run({"run", "--workload", "bogus"}).code == 2);
  CHECK(run({"calibrate", "--sizes", "1k"}).code == 2);
  CHECK(run({"classify", "--alpha", "1"}).code == 2);
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("classify") {
  CHECK(run({"classify", "--alpha", "1", "--beta", "3"}).out == "WellScalable bound_exponent=1\n");
  CHECK(run({"classify", "--alpha", "1", "--beta", "2"}).out == "LimitedScalable bound_exponent=0.5\n");
  CHECK(run({"classify", "--alpha", "1", "--beta", "1"}).out == "PoorlyScalable bound_exponent=0\n");
}

TEST_CASE("simulate matches the model") {
  const auto dir = scratch("sim");
  const auto r = run({"simulate", "--tw", "1e12", "--v", "5", "--L", "0.5", "--tr", "1e4", "--tp", "1e4", "--K", "100",
                      "--mode", "phase-seq", "--noise", "0", "--out", (dir / "sim.json").string(), "--sweep", "1:600",
                      "--sweep-out", (dir / "sweep.csv").string()});
  CHECK(r.code == 0);
  const auto report = json::parse(slurp(dir / "sim.json"));
  CHECK(report["mean_time"].get<double>() == doctest::Approx(11000020100.0).epsilon(1e-9));
  CHECK(report["model_relative_error"].get<double>() <= 1e-9);
  CHECK(r.out.find("sweep_peak_K=316") != std::string::npos);
  CHECK(fs::exists(dir / "sweep.csv"));
  fs::remove_all(dir);
}

TEST_CASE("run quadratic reports cross-K agreement") {
  const auto dir = scratch("run");
  const auto r = run({"run", "--workload", "quadratic", "--fixture", "small64x16", "--K", "1,2,4,8", "--out",
                      (dir / "run.json").string(), "--trace-dir", dir.string()});
  CHECK(r.code == 0);
  const auto report = json::parse(slurp(dir / "run.json"));
  CHECK(report["cross_K_agreement"] == true);
  CHECK(report["runs"].size() == 4);
  for (int k : {1, 2, 4, 8}) CHECK(fs::exists(dir / ("trace_K" + std::to_string(k) + ".csv")));

  // A disagreement tolerance nobody can meet turns into the verdict exit code.
  CHECK(run({"run", "--fixture", "small64x16", "--K", "1,3", "--agreement", "0"}).code == 4);
  fs::remove_all(dir);
}

TEST_CASE("run quadratic over tcp, in-process and external workers") {
  CHECK(run({"run", "--fixture", "identity2", "--K", "2", "--backend", "tcp"}).code == 0);

  // Pick a free port, then serve it with a master waiting for two worker commands.
  std::uint16_t port = 0;
  {
    bsf::TcpMaster probe("127.0.0.1", 0, 1);
    port = probe.port();
  }
  std::vector<std::thread> workers;
  std::vector<int> codes(2, -1);
  for (int rank = 1; rank <= 2; ++rank) {
    workers.emplace_back([&, rank] {
      codes[std::size_t(rank - 1)] = run({"worker", "--port", std::to_string(port), "--rank", std::to_string(rank),
                                         "--workers", "2", "--fixture", "small64x16"})
                                         .code;
    });
  }
  const auto master = run({"run", "--fixture", "small64x16", "--K", "2", "--backend", "tcp", "--listen",
                           std::to_string(port)});
  for (auto& t : workers) t.join();
  CHECK(master.code == 0);
  CHECK(codes == std::vector<int>{0, 0});
}

TEST_CASE("transport failures exit with 3") {
  std::uint16_t port = 0;
  {
    bsf::TcpMaster probe("127.0.0.1", 0, 1);
    port = probe.port();
  }
  // The master accepts the worker, then hangs up at once.
  std::thread t([port] {
    bsf::TcpMaster m("127.0.0.1", port, 1);
    m.accept_workers(std::chrono::milliseconds(5000));
    m.close();
  });
  const auto r = run({"worker", "--port", std::to_string(port), "--rank", "1", "--workers", "1"});
  t.join();
  CHECK(r.code == 3);
}

TEST_CASE("calibrate on the virtual backend") {
  const auto dir = scratch("cal");
  const auto r = run({"calibrate", "--backend", "virtual", "--sizes", "1k,10k,100k", "--planted-L", "0.5",
                      "--planted-rate", "0.001", "--out", (dir / "cal.json").string()});
  CHECK(r.code == 0);
  const auto report = json::parse(slurp(dir / "cal.json"));
  CHECK(report["L"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(report["seconds_per_byte"].get<double>() == doctest::Approx(0.001).epsilon(1e-6));

  const auto inproc = run({"calibrate", "--backend", "inproc", "--sizes", "1k,10k,100k"});
  CHECK(inproc.code == 0);
  CHECK(inproc.out.find("\"fit\"") != std::string::npos);
  fs::remove_all(dir);
}
