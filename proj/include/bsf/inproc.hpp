#pragma once

#include <memory>
#include <optional>

#include "bsf/transport.hpp"

namespace bsf {

/// Cost charged per Job/Result message by the virtual-time backend:
/// latency + payload bytes * seconds_per_byte. Barrier and Control traffic is free.
struct LinkCost {
  double latency = 0.0;
  double seconds_per_byte = 0.0;

  double message_cost(std::size_t bytes) const noexcept {
    return latency + static_cast<double>(bytes) * seconds_per_byte;
  }
};

/// A world of ranks living in one process, connected by FIFO queues.
///
/// With `virtual_costs` set, endpoints report virtual time instead of wall
/// time. The master's clock is serialized: each job it sends and each result it
/// receives advances it by LinkCost::message_cost, and a worker's clock jumps
/// to the send stamp of whatever it receives. Distributing a job of cost t_s to
/// K workers therefore takes exactly K (L + t_s) on the master's clock.
class InProcWorld {
 public:
  static std::shared_ptr<InProcWorld> create(int world_size, std::optional<LinkCost> virtual_costs = std::nullopt);

  ~InProcWorld();
  InProcWorld(const InProcWorld&) = delete;
  InProcWorld& operator=(const InProcWorld&) = delete;

  int size() const noexcept;

  /// Each rank may be claimed once.
  std::unique_ptr<Endpoint> endpoint(int rank);

  struct State;

 private:
  explicit InProcWorld(std::unique_ptr<State> state);
  std::shared_ptr<State> state_;
};

}  // namespace bsf
