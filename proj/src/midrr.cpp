#include "cm4fq/midrr.hpp"

#include <stdexcept>

namespace cm4fq {

MiDrrScheduler::MiDrrScheduler(SystemState state, std::vector<Rat> quanta)
    : state_(std::move(state)), quanta_(std::move(quanta)) {
  state_.matrix.validate();
  const int n = state_.n_users();
  const int k = state_.n_servers();
  if (static_cast<int>(quanta_.size()) != n) throw std::invalid_argument("quantum per user required");
  flags_.assign(n, std::vector<uint8_t>(k, 1));
  deficit_.assign(k, std::vector<Rat>(n, Rat(0)));
  cursor_.resize(k);
  for (int s = 0; s < k; ++s) cursor_[s] = n > 0 ? s % n : 0;
  visiting_.assign(k, -1);
}

std::vector<int> MiDrrScheduler::on_arrival(const Packet& packet) {
  UserState& user = state_.users[packet.owner];
  if (user.queue.empty() && backlog_hook) backlog_hook(packet.owner, true);
  user.queue.push_back(packet);

  std::vector<int> idle;
  for (int k = 0; k < state_.n_servers(); ++k)
    if (state_.matrix.eligible(packet.owner, k) && !state_.servers[k].busy()) idle.push_back(k);
  return idle;
}

std::optional<DispatchRecord> MiDrrScheduler::serve_head(int server, int user) {
  UserState& u = state_.users[user];
  Packet packet = u.queue.front();
  u.queue.pop_front();
  if (u.queue.empty() && refill_hook) refill_hook(state_, user);
  if (u.queue.empty() && backlog_hook) backlog_hook(user, false);

  deficit_[server][user] -= Rat(packet.length);
  state_.servers[server].in_service =
      InService{packet, state_.clock + Rat(packet.length) / state_.servers[server].rate};
  return DispatchRecord{state_.clock, server, user, packet.length, Rat(0), Rat(0)};
}

std::optional<DispatchRecord> MiDrrScheduler::try_dispatch(int server) {
  if (state_.servers[server].busy()) throw std::logic_error("dispatch attempted on a busy server");
  const int n = state_.n_users();

  // Continue an open visit while the deficit still covers the head packet.
  if (visiting_[server] >= 0) {
    int user = visiting_[server];
    UserState& u = state_.users[user];
    if (u.queue.empty()) {
      deficit_[server][user] = 0;  // drained during the visit
      visiting_[server] = -1;
    } else if (Rat(u.queue.front().length) <= deficit_[server][user]) {
      return serve_head(server, user);
    } else {
      visiting_[server] = -1;
    }
  }

  for (int attempts = 0; attempts < n; ++attempts) {
    int user = cursor_[server];
    cursor_[server] = (user + 1) % n;
    if (!state_.matrix.eligible(user, server)) continue;
    UserState& u = state_.users[user];
    if (u.queue.empty()) {
      deficit_[server][user] = 0;
      continue;
    }
    if (!flags_[user][server]) continue;  // not re-armed since last consideration
    flags_[user][server] = 0;
    deficit_[server][user] += quanta_[user];
    if (Rat(u.queue.front().length) <= deficit_[server][user]) {
      visiting_[server] = user;
      return serve_head(server, user);
    }
  }
  return std::nullopt;  // nothing eligible this round; retried on the next event
}

Packet MiDrrScheduler::complete(int server) {
  ServerState& srv = state_.servers[server];
  if (!srv.busy()) throw std::logic_error("completion on an idle server");
  Packet packet = srv.in_service->packet;
  srv.in_service.reset();
  // Completed service re-arms the flow at every other server.
  for (int j = 0; j < state_.n_servers(); ++j)
    if (j != server) flags_[packet.owner][j] = 1;
  return packet;
}

}  // namespace cm4fq
