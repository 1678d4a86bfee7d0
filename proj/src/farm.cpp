#include "bsf/farm.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

namespace bsf {

void to_json(nlohmann::json& j, const IterationTrace& t) {
  j = nlohmann::json{{"iteration", t.iteration},
                     {"distribute", t.distribute},
                     {"compute", t.compute},
                     {"gather", t.gather},
                     {"reduce", t.reduce},
                     {"worker_compute", t.worker_compute}};
}

std::string traces_to_csv(std::span<const IterationTrace> traces) {
  std::string out = "iteration,phase,rank,duration\n";
  char buf[96];
  auto row = [&](std::size_t it, const char* phase, std::size_t rank, double d) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%zu,%.17g\n", it, phase, rank, d);
    out += buf;
  };
  for (const auto& t : traces) {
    row(t.iteration, "distribute", 0, t.distribute);
    for (std::size_t i = 0; i < t.worker_compute.size(); ++i) row(t.iteration, "compute", i + 1, t.worker_compute[i]);
    row(t.iteration, "gather", 0, t.gather);
    row(t.iteration, "reduce", 0, t.reduce);
  }
  return out;
}

nlohmann::json traces_to_json(std::span<const IterationTrace> traces, std::size_t iteration_count,
                              double wall_seconds) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : traces) arr.push_back(t);
  return {{"iteration_count", iteration_count}, {"wall_seconds", wall_seconds}, {"traces", std::move(arr)}};
}

void to_json(nlohmann::json& j, const SpeedupSample& s) {
  j = nlohmann::json{
      {"K", s.workers}, {"wall_seconds", s.wall_seconds}, {"speedup", s.speedup}, {"efficiency", s.efficiency}};
}

}  // namespace bsf
