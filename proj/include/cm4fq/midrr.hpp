#pragma once

#include "cm4fq/core.hpp"
#include "cm4fq/scheduler.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace cm4fq {

/// Multi-interface deficit round robin baseline: every server runs its own
/// DRR over the shared per-user queues, coordinated by binary service flags.
/// A server considers a flow only while its flag is set; considering resets
/// the flag, and a completed service on one server re-arms the flow's flag
/// on every other server. Flags start armed so the first round serves
/// everyone; server cursors start staggered by server index.
class MiDrrScheduler {
 public:
  MiDrrScheduler(SystemState state, std::vector<Rat> quanta);

  std::function<void(SystemState&, int user)> refill_hook;
  std::function<void(int user, bool backlogged)> backlog_hook;

  const SystemState& state() const { return state_; }
  SystemState& state() { return state_; }

  std::vector<int> on_arrival(const Packet& packet);
  std::optional<DispatchRecord> try_dispatch(int server);
  Packet complete(int server);

 private:
  std::optional<DispatchRecord> serve_head(int server, int user);

  SystemState state_;
  std::vector<Rat> quanta_;                  // per user
  std::vector<std::vector<uint8_t>> flags_;  // [user][server]
  std::vector<std::vector<Rat>> deficit_;    // [server][user]
  std::vector<int> cursor_;                  // next flow to consider, per server
  std::vector<int> visiting_;                // flow mid-visit, -1 if none
};

}  // namespace cm4fq
