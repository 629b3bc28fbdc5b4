#pragma once

#include "cm4fq/rational.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cm4fq {

/// Binary user-by-server constraint matrix. entry(i,k)==1 means user i may be
/// served by server k.
class EligibilityMatrix {
 public:
  EligibilityMatrix() = default;
  EligibilityMatrix(int n_users, int n_servers)
      : n_users_(n_users), n_servers_(n_servers), bits_(n_users * n_servers, 0) {}

  int n_users() const { return n_users_; }
  int n_servers() const { return n_servers_; }

  bool eligible(int user, int server) const { return bits_[user * n_servers_ + server] != 0; }
  void set(int user, int server, bool v = true) { bits_[user * n_servers_ + server] = v ? 1 : 0; }

  std::vector<int> servers_of(int user) const {
    std::vector<int> out;
    for (int k = 0; k < n_servers_; ++k)
      if (eligible(user, k)) out.push_back(k);
    return out;
  }
  std::vector<int> users_of(int server) const {
    std::vector<int> out;
    for (int i = 0; i < n_users_; ++i)
      if (eligible(i, server)) out.push_back(i);
    return out;
  }

  // Every user must reach at least one server and every server at least one
  // user. Throws std::invalid_argument naming the offending row/column.
  void validate() const;

  friend bool operator==(const EligibilityMatrix& a, const EligibilityMatrix& b) {
    return a.n_users_ == b.n_users_ && a.n_servers_ == b.n_servers_ && a.bits_ == b.bits_;
  }

 private:
  int n_users_ = 0;
  int n_servers_ = 0;
  std::vector<uint8_t> bits_;
};

struct Packet {
  int owner = 0;
  int64_t length = 0;  // bits; the packet's required work
  Rat arrival_time;
  int64_t seq = 0;  // per-user monotone sequence number
};

struct UserState {
  Rat weight{1};
  std::deque<Packet> queue;
  Rat service_tag{0};  // F_i, work per unit weight
  Rat bonus{0};        // D_i, regulation credit not reflected in F_i
};

struct InService {
  Packet packet;
  Rat completion_time;
};

struct ServerState {
  Rat rate;                          // bits per second, constant
  WorkLevel work_level{Rat(0)};      // V^k
  Rat bonus{0};                      // D^k
  std::optional<InService> in_service;

  bool busy() const { return in_service.has_value(); }
};

struct SystemState {
  Rat clock{0};
  std::vector<UserState> users;
  std::vector<ServerState> servers;
  EligibilityMatrix matrix;
  Rat delta{0};  // gap-regulation threshold, work per unit weight

  int n_users() const { return static_cast<int>(users.size()); }
  int n_servers() const { return static_cast<int>(servers.size()); }

  bool backlogged(int user) const { return !users[user].queue.empty(); }
};

// Users with a nonempty queue. A user whose only packet is in service does
// not count as backlogged.
std::vector<int> backlogged_set(const SystemState& state);

// Backlogged users eligible to be served by server k.
std::vector<int> eligible_backlogged_set(const SystemState& state, int server);

// Max work level over the user's eligible servers (infinite if any of them
// is infinite).
WorkLevel respective_work_level(const SystemState& state, int user);

}  // namespace cm4fq
