#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "bsf/inproc.hpp"
#include "bsf/transport.hpp"

namespace bsf {

enum class Backend { InProcess, Tcp, Virtual };

std::string_view to_string(Backend b);
Backend backend_from_string(std::string_view name);

struct BackendConfig {
  Backend kind = Backend::InProcess;
  LinkCost link{};                // Virtual only
  std::string host = "127.0.0.1";  // Tcp only
  Timeout timeout = kDefaultTimeout;
};

/// Runs `body` once per rank of a fresh local world, each rank on its own
/// thread, and joins them. A rank that throws closes its endpoint, which
/// unblocks its peers. The error reported is the first non-transport error by
/// rank order (the cause), else the first transport error.
void run_spmd(const BackendConfig& config, int world_size, const std::function<void(Endpoint&)>& body);

}  // namespace bsf
