#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "bsf/transport.hpp"

namespace bsf {

/// Master side of the TCP star: one connection per worker.
///
/// Connection handshake: the worker's first frame is a Control message whose
/// payload is its 2-byte big-endian rank id.
class TcpMaster final : public Endpoint {
 public:
  /// Binds and listens; port 0 picks an ephemeral port (see port()).
  TcpMaster(const std::string& host, std::uint16_t port, int workers);
  ~TcpMaster() override;

  std::uint16_t port() const noexcept { return port_; }

  /// Blocks until every worker rank has connected and sent its handshake.
  void accept_workers(Timeout timeout);

  Rank rank() const override { return {kMasterRank, workers_ + 1}; }
  void send(int to, Message m) override;
  Message recv(int from, Timeout timeout) override;
  double now() const override;
  void close() override;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
  int workers_;
  std::uint16_t port_ = 0;
};

class TcpWorker final : public Endpoint {
 public:
  /// Connects to the master and performs the rank handshake. Retries the
  /// connect until `timeout` so workers may start before the master listens.
  TcpWorker(const std::string& host, std::uint16_t port, int rank, int world_size, Timeout timeout = kDefaultTimeout);
  ~TcpWorker() override;

  Rank rank() const override { return rank_; }
  void send(int to, Message m) override;
  Message recv(int from, Timeout timeout) override;
  double now() const override;
  void close() override;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
  Rank rank_;
};

}  // namespace bsf
