#include "bsf/inproc.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "bsf/errors.hpp"

namespace bsf {

namespace {

using Clock = std::chrono::steady_clock;

struct Envelope {
  Message message;
  double stamp;
};

struct Channel {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Envelope> queue;
};

bool charged(Tag t) { return t == Tag::Job || t == Tag::Result; }

}  // namespace

struct InProcWorld::State {
  State(int n, std::optional<LinkCost> costs)
      : size(n), virtual_costs(costs), channels(static_cast<std::size_t>(n * n)), closed(static_cast<std::size_t>(n)),
        claimed(static_cast<std::size_t>(n)), epoch(Clock::now()) {}

  Channel& channel(int from, int to) { return channels[static_cast<std::size_t>(from * size + to)]; }

  void close(int rank) {
    closed[static_cast<std::size_t>(rank)].store(true);
    for (int peer = 0; peer < size; ++peer) {
      for (auto* ch : {&channel(rank, peer), &channel(peer, rank)}) {
        std::lock_guard lock(ch->mu);
        ch->cv.notify_all();
      }
    }
  }

  bool is_closed(int rank) const { return closed[static_cast<std::size_t>(rank)].load(); }

  const int size;
  const std::optional<LinkCost> virtual_costs;
  std::vector<Channel> channels;
  std::vector<std::atomic<bool>> closed;
  std::vector<std::atomic<bool>> claimed;
  const Clock::time_point epoch;
};

namespace {

class InProcEndpoint final : public Endpoint {
 public:
  InProcEndpoint(std::shared_ptr<InProcWorld::State> world, int id) : world_(std::move(world)), rank_(id, world_->size) {}

  ~InProcEndpoint() override { close(); }

  Rank rank() const override { return rank_; }

  void send(int to, Message m) override {
    check_peer(to);
    if (world_->is_closed(rank_.id)) throw TransportFailure("send on closed endpoint " + std::to_string(rank_.id));
    if (world_->is_closed(to)) {
      throw TransportFailure("rank " + std::to_string(to) + " disconnected (send from rank " +
                             std::to_string(rank_.id) + ")");
    }
    double stamp = clock_;
    if (world_->virtual_costs && rank_.is_master() && charged(m.tag)) {
      clock_ += world_->virtual_costs->message_cost(m.payload.size());
      stamp = clock_;
    }
    auto& ch = world_->channel(rank_.id, to);
    {
      std::lock_guard lock(ch.mu);
      ch.queue.push_back({std::move(m), stamp});
    }
    ch.cv.notify_all();
  }

  Message recv(int from, Timeout timeout) override {
    check_peer(from);
    auto& ch = world_->channel(from, rank_.id);
    std::unique_lock lock(ch.mu);
    const auto ready = [&] {
      return !ch.queue.empty() || world_->is_closed(from) || world_->is_closed(rank_.id);
    };
    if (timeout) {
      if (!ch.cv.wait_for(lock, *timeout, ready)) {
        throw TransportTimeout("rank " + std::to_string(rank_.id) + " timed out after " +
                               std::to_string(timeout->count()) + " ms waiting for rank " + std::to_string(from));
      }
    } else {
      ch.cv.wait(lock, ready);
    }
    if (ch.queue.empty()) {
      throw TransportFailure("rank " + std::to_string(from) + " disconnected (recv at rank " +
                             std::to_string(rank_.id) + ")");
    }
    auto env = std::move(ch.queue.front());
    ch.queue.pop_front();
    lock.unlock();

    if (world_->virtual_costs) {
      clock_ = std::max(clock_, env.stamp);
      if (rank_.is_master() && charged(env.message.tag)) {
        clock_ += world_->virtual_costs->message_cost(env.message.payload.size());
      }
    }
    return std::move(env.message);
  }

  double now() const override {
    if (world_->virtual_costs) return clock_;
    return std::chrono::duration<double>(Clock::now() - world_->epoch).count();
  }

  void close() override {
    if (!closed_) {
      closed_ = true;
      world_->close(rank_.id);
    }
  }

 private:
  void check_peer(int peer) const {
    if (peer < 0 || peer >= rank_.world_size || peer == rank_.id) {
      throw InvalidParameter("rank " + std::to_string(rank_.id) + " cannot address rank " + std::to_string(peer));
    }
    if (!rank_.is_master() && peer != kMasterRank) {
      throw InvalidParameter("workers may only talk to the master");
    }
  }

  std::shared_ptr<InProcWorld::State> world_;
  Rank rank_;
  double clock_ = 0.0;
  bool closed_ = false;
};

}  // namespace

std::shared_ptr<InProcWorld> InProcWorld::create(int world_size, std::optional<LinkCost> virtual_costs) {
  if (world_size < 2) throw InvalidParameter("world needs a master and at least one worker");
  if (virtual_costs && (virtual_costs->latency < 0 || virtual_costs->seconds_per_byte < 0)) {
    throw InvalidParameter("link costs must be >= 0");
  }
  return std::shared_ptr<InProcWorld>(new InProcWorld(std::make_unique<State>(world_size, virtual_costs)));
}

InProcWorld::InProcWorld(std::unique_ptr<State> state) : state_(std::move(state)) {}

InProcWorld::~InProcWorld() = default;

int InProcWorld::size() const noexcept { return state_->size; }

std::unique_ptr<Endpoint> InProcWorld::endpoint(int rank) {
  if (rank < 0 || rank >= state_->size) throw InvalidParameter("no rank " + std::to_string(rank) + " in world");
  if (state_->claimed[static_cast<std::size_t>(rank)].exchange(true)) {
    throw InvalidParameter("rank " + std::to_string(rank) + " already claimed");
  }
  auto ep = std::make_unique<InProcEndpoint>(state_, rank);
  if (state_->virtual_costs) ep->set_default_timeout(std::nullopt);
  return ep;
}

}  // namespace bsf
