#include "bsf/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>
#include <vector>

#include "bsf/errors.hpp"

namespace bsf {

namespace {

using Clock = std::chrono::steady_clock;

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

/// Owning socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { reset(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }

  void reset() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res); rc != 0 || res == nullptr) {
    throw TransportFailure("cannot resolve host '" + host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

void write_all(int fd, ByteView bytes, int peer) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportFailure(sys_error("send to rank " + std::to_string(peer) + " failed"));
    }
    done += static_cast<std::size_t>(n);
  }
}

/// Reads until one full frame is decoded or the deadline passes.
Message read_frame(int fd, FrameDecoder& decoder, Timeout timeout, int self, int peer) {
  const auto deadline = timeout ? std::optional(Clock::now() + *timeout) : std::nullopt;
  std::uint8_t buf[64 * 1024];
  while (true) {
    if (auto m = decoder.next()) return std::move(*m);
    int wait_ms = -1;
    if (deadline) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now()).count();
      if (left <= 0) {
        throw TransportTimeout("rank " + std::to_string(self) + " timed out waiting for rank " + std::to_string(peer));
      }
      wait_ms = static_cast<int>(left);
    }
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw TransportFailure(sys_error("poll failed"));
    }
    if (ready == 0) continue;
    const auto n = ::recv(fd, buf, sizeof buf, 0);
    if (n == 0) {
      throw TransportFailure("rank " + std::to_string(peer) + " disconnected (recv at rank " + std::to_string(self) +
                             ")");
    }
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw TransportFailure(sys_error("recv from rank " + std::to_string(peer) + " failed"));
    }
    decoder.feed(ByteView(buf, static_cast<std::size_t>(n)));
  }
}

struct Connection {
  Socket socket;
  FrameDecoder decoder;
};

}  // namespace

struct TcpMaster::Impl {
  Socket listener;
  std::vector<Connection> workers;  // index r-1 holds rank r
  Clock::time_point epoch = Clock::now();
};

TcpMaster::TcpMaster(const std::string& host, std::uint16_t port, int workers)
    : impl_(std::make_unique<Impl>()), workers_(workers) {
  if (workers < 1) throw InvalidParameter("TCP world needs at least one worker");
  impl_->workers.resize(static_cast<std::size_t>(workers));
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw TransportFailure(sys_error("socket"));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  auto addr = resolve(host, port);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw TransportFailure(sys_error("bind " + host + ":" + std::to_string(port)));
  }
  if (::listen(s.fd(), workers) != 0) throw TransportFailure(sys_error("listen"));
  socklen_t len = sizeof addr;
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  impl_->listener = std::move(s);
}

TcpMaster::~TcpMaster() { close(); }

void TcpMaster::accept_workers(Timeout timeout) {
  const auto deadline = timeout ? std::optional(Clock::now() + *timeout) : std::nullopt;
  int connected = 0;
  while (connected < workers_) {
    int wait_ms = -1;
    if (deadline) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now()).count();
      if (left <= 0) {
        throw TransportTimeout("only " + std::to_string(connected) + " of " + std::to_string(workers_) +
                               " workers connected before the timeout");
      }
      wait_ms = static_cast<int>(left);
    }
    pollfd pfd{impl_->listener.fd(), POLLIN, 0};
    if (::poll(&pfd, 1, wait_ms) <= 0) continue;
    Socket conn(::accept(impl_->listener.fd(), nullptr, nullptr));
    if (!conn.valid()) continue;
    set_nodelay(conn.fd());
    FrameDecoder decoder;
    const auto hello = read_frame(conn.fd(), decoder, timeout, kMasterRank, -1);
    if (hello.tag != Tag::Control || hello.payload.size() != 2) {
      throw TransportFailure("bad handshake: expected a 2-byte Control frame");
    }
    const int r = ByteReader(hello.payload).u16();
    if (r < 1 || r > workers_) throw TransportFailure("handshake from out-of-range rank " + std::to_string(r));
    auto& slot = impl_->workers[static_cast<std::size_t>(r - 1)];
    if (slot.socket.valid()) throw TransportFailure("rank " + std::to_string(r) + " connected twice");
    slot.socket = std::move(conn);
    slot.decoder = std::move(decoder);
    ++connected;
  }
  impl_->listener.reset();
}

void TcpMaster::send(int to, Message m) {
  if (to < 1 || to > workers_) throw InvalidParameter("master cannot address rank " + std::to_string(to));
  auto& c = impl_->workers[static_cast<std::size_t>(to - 1)];
  if (!c.socket.valid()) throw TransportFailure("rank " + std::to_string(to) + " is not connected");
  write_all(c.socket.fd(), encode_frame(m), to);
}

Message TcpMaster::recv(int from, Timeout timeout) {
  if (from < 1 || from > workers_) throw InvalidParameter("master cannot address rank " + std::to_string(from));
  auto& c = impl_->workers[static_cast<std::size_t>(from - 1)];
  if (!c.socket.valid()) throw TransportFailure("rank " + std::to_string(from) + " is not connected");
  return read_frame(c.socket.fd(), c.decoder, timeout, kMasterRank, from);
}

double TcpMaster::now() const { return std::chrono::duration<double>(Clock::now() - impl_->epoch).count(); }

void TcpMaster::close() {
  if (!impl_) return;
  impl_->listener.reset();
  for (auto& c : impl_->workers) c.socket.reset();
}

struct TcpWorker::Impl {
  Connection master;
  Clock::time_point epoch = Clock::now();
};

TcpWorker::TcpWorker(const std::string& host, std::uint16_t port, int rank, int world_size, Timeout timeout)
    : impl_(std::make_unique<Impl>()), rank_(rank, world_size) {
  if (rank_.is_master()) throw InvalidParameter("TcpWorker rank must be >= 1");
  const auto addr = resolve(host, port);
  const auto deadline = timeout ? std::optional(Clock::now() + *timeout) : std::nullopt;
  while (true) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw TransportFailure(sys_error("socket"));
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      set_nodelay(s.fd());
      impl_->master.socket = std::move(s);
      break;
    }
    if (deadline && Clock::now() >= *deadline) {
      throw TransportFailure(sys_error("connect to " + host + ":" + std::to_string(port)));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  send(kMasterRank, {Tag::Control, std::move(ByteWriter{}.u16(static_cast<std::uint16_t>(rank))).take()});
}

TcpWorker::~TcpWorker() { close(); }

void TcpWorker::send(int to, Message m) {
  if (to != kMasterRank) throw InvalidParameter("workers may only talk to the master");
  if (!impl_->master.socket.valid()) throw TransportFailure("send on closed endpoint");
  write_all(impl_->master.socket.fd(), encode_frame(m), to);
}

Message TcpWorker::recv(int from, Timeout timeout) {
  if (from != kMasterRank) throw InvalidParameter("workers may only talk to the master");
  if (!impl_->master.socket.valid()) throw TransportFailure("recv on closed endpoint");
  return read_frame(impl_->master.socket.fd(), impl_->master.decoder, timeout, rank_.id, from);
}

double TcpWorker::now() const { return std::chrono::duration<double>(Clock::now() - impl_->epoch).count(); }

void TcpWorker::close() {
  if (impl_) impl_->master.socket.reset();
}

}  // namespace bsf
