#include "bsf/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <set>

#include <nlohmann/json.hpp>

#include "bsf/errors.hpp"

namespace bsf {

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidParameter("line fit needs >= 2 paired points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidParameter("degenerate fit: all x values are equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    f.residuals.push_back(r);
    ss_res += r * r;
  }
  f.r_squared = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return f;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

CalibrationReport calibrate(const BackendConfig& backend, std::span<const std::size_t> payload_sizes,
                            std::size_t repetitions, const std::function<void()>& work_probe) {
  const std::set<std::size_t> distinct(payload_sizes.begin(), payload_sizes.end());
  if (distinct.size() < 2) throw InvalidParameter("degenerate fit: calibration needs distinct payload sizes");
  if (distinct.size() < 3) throw InvalidParameter("calibration needs at least 3 distinct payload sizes");
  if (repetitions < 5) throw InvalidParameter("calibration needs at least 5 repetitions per size");

  CalibrationReport report;
  report.backend = backend.kind;
  for (auto bytes : payload_sizes) report.samples.push_back({bytes, {}, 0.0});

  run_spmd(backend, 2, [&](Endpoint& ep) {
    if (ep.rank().is_master()) {
      for (auto& s : report.samples) {
        const Message ping{Tag::Job, Bytes(s.bytes, 0x5A)};
        // One warm-up exchange per size.
        for (std::size_t rep = 0; rep <= repetitions; ++rep) {
          const double t0 = ep.now();
          ep.send(1, ping);
          expect(ep, 1, Tag::Result, ep.default_timeout());
          if (rep > 0) s.round_trips.push_back(ep.now() - t0);
        }
        s.median = median(s.round_trips);
      }
      ep.send(1, {Tag::Control, {}});
    } else {
      while (true) {
        auto m = ep.recv(kMasterRank);
        if (m.tag == Tag::Control) break;
        ep.send(kMasterRank, {Tag::Result, std::move(m.payload)});
      }
    }
  });

  std::vector<double> x, y;
  for (const auto& s : report.samples) {
    x.push_back(static_cast<double>(s.bytes));
    y.push_back(s.median);
  }
  report.fit = fit_line(x, y);
  report.latency = std::max(0.0, report.fit.intercept / 2.0);
  report.seconds_per_byte = report.fit.slope / 2.0;

  if (work_probe) {
    std::vector<double> times;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      work_probe();
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    report.work_estimate = median(std::move(times));
  }
  return report;
}

nlohmann::json CalibrationReport::to_json() const {
  nlohmann::json samples_json = nlohmann::json::array();
  for (const auto& s : samples) {
    samples_json.push_back({{"bytes", s.bytes}, {"median_round_trip", s.median}, {"round_trips", s.round_trips}});
  }
  nlohmann::json j{{"backend", std::string(bsf::to_string(backend))},
                   {"L", latency},
                   {"seconds_per_byte", seconds_per_byte},
                   {"fit",
                    {{"intercept", fit.intercept},
                     {"slope", fit.slope},
                     {"r_squared", fit.r_squared},
                     {"residuals", fit.residuals}}},
                   {"samples", std::move(samples_json)}};
  if (work_estimate) j["t_w_estimate"] = *work_estimate;
  return j;
}

std::vector<std::size_t> parse_sizes(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    auto part = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    std::size_t scale = 1;
    if (!part.empty() && (part.back() == 'k' || part.back() == 'K')) {
      scale = 1000;
      part.remove_suffix(1);
    } else if (!part.empty() && (part.back() == 'm' || part.back() == 'M')) {
      scale = 1'000'000;
      part.remove_suffix(1);
    }
    std::size_t v = 0;
    const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc{} || end != part.data() + part.size()) {
      throw InvalidParameter("bad size list '" + std::string(text) + "'");
    }
    out.push_back(v * scale);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace bsf
