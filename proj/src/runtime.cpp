#include "bsf/runtime.hpp"

#include <exception>
#include <memory>
#include <thread>
#include <vector>

#include "bsf/errors.hpp"
#include "bsf/tcp.hpp"

namespace bsf {

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::InProcess: return "inproc";
    case Backend::Tcp: return "tcp";
    case Backend::Virtual: return "virtual";
  }
  return "?";
}

Backend backend_from_string(std::string_view name) {
  for (auto b : {Backend::InProcess, Backend::Tcp, Backend::Virtual}) {
    if (to_string(b) == name) return b;
  }
  throw InvalidParameter("unknown backend '" + std::string(name) + "' (inproc, tcp, virtual)");
}

namespace {

std::exception_ptr pick_error(const std::vector<std::exception_ptr>& errors) {
  std::exception_ptr transport;
  for (const auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const TransportFailure&) {
      if (!transport) transport = e;
    } catch (...) {
      return e;
    }
  }
  return transport;
}

}  // namespace

void run_spmd(const BackendConfig& config, int world_size, const std::function<void(Endpoint&)>& body) {
  if (world_size < 2) throw InvalidParameter("world needs a master and at least one worker");
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(world_size));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(world_size));

  auto guarded = [&](int rank, auto make_endpoint) {
    return [&, rank, make_endpoint]() mutable {
      try {
        std::unique_ptr<Endpoint> ep = make_endpoint();
        ep->set_default_timeout(config.kind == Backend::Virtual ? std::nullopt : config.timeout);
        body(*ep);
      } catch (...) {
        errors[static_cast<std::size_t>(rank)] = std::current_exception();
      }
    };
  };

  if (config.kind == Backend::Tcp) {
    auto master = std::make_shared<TcpMaster>(config.host, std::uint16_t{0}, world_size - 1);
    const auto port = master->port();
    for (int r = 1; r < world_size; ++r) {
      threads.emplace_back(guarded(r, [&config, port, r, world_size]() -> std::unique_ptr<Endpoint> {
        return std::make_unique<TcpWorker>(config.host, port, r, world_size, config.timeout);
      }));
    }
    threads.emplace_back(guarded(kMasterRank, [master, &config]() mutable -> std::unique_ptr<Endpoint> {
      master->accept_workers(config.timeout);
      struct Owned final : Endpoint {
        std::shared_ptr<TcpMaster> inner;
        explicit Owned(std::shared_ptr<TcpMaster> m) : inner(std::move(m)) {}
        ~Owned() override { inner->close(); }
        Rank rank() const override { return inner->rank(); }
        void send(int to, Message m) override { inner->send(to, std::move(m)); }
        Message recv(int from, Timeout t) override { return inner->recv(from, t); }
        double now() const override { return inner->now(); }
        void close() override { inner->close(); }
      };
      return std::make_unique<Owned>(std::move(master));
    }));
  } else {
    std::optional<LinkCost> costs;
    if (config.kind == Backend::Virtual) costs = config.link;
    auto world = InProcWorld::create(world_size, costs);
    for (int r = 0; r < world_size; ++r) {
      threads.emplace_back(guarded(r, [world, r]() { return world->endpoint(r); }));
    }
  }

  for (auto& t : threads) t.join();
  if (auto e = pick_error(errors)) std::rethrow_exception(e);
}

}  // namespace bsf
