#pragma once

#include "cm4fq/core.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace cm4fq {

enum class Variant {
  Full,     // tag scheduling + work-level gap regulation
  Reduced,  // gap regulation disabled
  SfqBased  // dispatching server's level pinned to the chosen user's start tag
};

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

struct DispatchRecord {
  Rat time;
  int server = 0;
  int user = 0;
  int64_t length = 0;
  Rat tag_before;  // F before the increment; also the packet's start tag
  Rat tag_after;   // tag_before + length/weight
};

/// Default gap-regulation threshold: (K+1) * L_max / min weight.
Rat default_delta(const EligibilityMatrix& matrix, const std::vector<Rat>& weights,
                  int64_t max_length);

/// The packet scheduler. A free server picks the eligible backlogged user
/// with the smallest service tag (ties to the lowest index), charges the
/// packet's normalized work to the tag, and refreshes server work levels.
class Scheduler {
 public:
  Scheduler(SystemState state, Variant variant);

  const SystemState& state() const { return state_; }
  SystemState& state() { return state_; }
  Variant variant() const { return variant_; }

  // Called after a dequeue leaves a queue empty, before work levels are
  // recomputed; lets always-backlogged sources top the queue back up so the
  // user never observably leaves the backlogged set.
  std::function<void(SystemState&, int user)> refill_hook;
  // Fired when a user enters/leaves the backlogged set.
  std::function<void(int user, bool backlogged)> backlog_hook;

  // Enqueue a packet at the current clock. If the user was idle its tag is
  // first caught up to the work level of its eligible servers. Returns the
  // user's eligible servers that are currently idle; the caller must attempt
  // dispatch on them at this same timestamp.
  std::vector<int> on_arrival(const Packet& packet);

  // One dispatch attempt for a free server. Empty eligible backlog leaves
  // the server idle and returns nothing.
  std::optional<DispatchRecord> try_dispatch(int server);

  // Service completion; frees the server and returns the packet.
  Packet complete(int server);

 private:
  void activate_servers(int user);
  void update_v(int user, int server, const WorkLevel& v_hat, const Rat& tag_before);
  void recompute_level(int server);

  SystemState state_;
  Variant variant_;
};

}  // namespace cm4fq
