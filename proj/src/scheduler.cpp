#include "cm4fq/scheduler.hpp"

#include <stdexcept>

namespace cm4fq {

Variant variant_from_string(const std::string& name) {
  if (name == "full") return Variant::Full;
  if (name == "reduced") return Variant::Reduced;
  if (name == "sfq") return Variant::SfqBased;
  throw std::invalid_argument("unknown variant: " + name + " (expected full|reduced|sfq)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Reduced: return "reduced";
    case Variant::SfqBased: return "sfq";
  }
  return "?";
}

Rat default_delta(const EligibilityMatrix& matrix, const std::vector<Rat>& weights,
                  int64_t max_length) {
  if (weights.empty()) throw std::invalid_argument("no users");
  Rat min_weight = weights[0];
  for (const Rat& w : weights)
    if (w < min_weight) min_weight = w;
  return Rat(matrix.n_servers() + 1) * Rat(max_length) / min_weight;
}

Scheduler::Scheduler(SystemState state, Variant variant)
    : state_(std::move(state)), variant_(variant) {
  state_.matrix.validate();
}

std::vector<int> Scheduler::on_arrival(const Packet& packet) {
  if (packet.arrival_time != state_.clock)
    throw std::logic_error("arrival timestamp disagrees with the simulation clock");
  UserState& user = state_.users[packet.owner];

  if (user.queue.empty()) {
    activate_servers(packet.owner);
    WorkLevel level = respective_work_level(state_, packet.owner);
    if (level.is_infinite())
      throw std::logic_error("eligible work level still infinite after server activation");
    if (user.service_tag < level.value()) user.service_tag = level.value();
    if (backlog_hook) backlog_hook(packet.owner, true);
  }
  user.queue.push_back(packet);

  std::vector<int> idle;
  for (int k = 0; k < state_.n_servers(); ++k)
    if (state_.matrix.eligible(packet.owner, k) && !state_.servers[k].busy()) idle.push_back(k);
  return idle;
}

void Scheduler::activate_servers(int user) {
  Rat v0(0);
  bool any_finite = false;
  for (const ServerState& s : state_.servers) {
    if (s.work_level.is_infinite()) continue;
    if (!any_finite || v0 < s.work_level.value()) v0 = s.work_level.value();
    any_finite = true;
  }
  if (any_finite) v0 += state_.delta;

  for (int k = 0; k < state_.n_servers(); ++k)
    if (state_.matrix.eligible(user, k) && state_.servers[k].work_level.is_infinite())
      state_.servers[k].work_level = WorkLevel(v0);
}

std::optional<DispatchRecord> Scheduler::try_dispatch(int server) {
  ServerState& srv = state_.servers[server];
  if (srv.busy()) throw std::logic_error("dispatch attempted on a busy server");

  int chosen = -1;
  for (int i = 0; i < state_.n_users(); ++i) {
    if (!state_.backlogged(i) || !state_.matrix.eligible(i, server)) continue;
    if (chosen < 0 || state_.users[i].service_tag < state_.users[chosen].service_tag) chosen = i;
  }
  if (chosen < 0) return std::nullopt;  // idle; level is already infinite (or untouched since init)

  UserState& user = state_.users[chosen];
  Packet packet = user.queue.front();
  user.queue.pop_front();
  if (user.queue.empty() && refill_hook) refill_hook(state_, chosen);
  if (user.queue.empty() && backlog_hook) backlog_hook(chosen, false);

  const WorkLevel v_hat = srv.work_level;
  const Rat tag_before = user.service_tag;
  user.service_tag += Rat(packet.length) / user.weight;
  update_v(chosen, server, v_hat, tag_before);

  srv.in_service = InService{packet, state_.clock + Rat(packet.length) / srv.rate};
  return DispatchRecord{state_.clock, server, chosen, packet.length, tag_before, user.service_tag};
}

Packet Scheduler::complete(int server) {
  ServerState& srv = state_.servers[server];
  if (!srv.busy()) throw std::logic_error("completion on an idle server");
  Packet packet = srv.in_service->packet;
  srv.in_service.reset();
  return packet;
}

void Scheduler::recompute_level(int server) {
  WorkLevel level = WorkLevel::infinity();
  bool any = false;
  Rat min_tag;
  for (int i = 0; i < state_.n_users(); ++i) {
    if (!state_.backlogged(i) || !state_.matrix.eligible(i, server)) continue;
    if (!any || state_.users[i].service_tag < min_tag) min_tag = state_.users[i].service_tag;
    any = true;
  }
  state_.servers[server].work_level = any ? WorkLevel(min_tag) : WorkLevel::infinity();
}

void Scheduler::update_v(int user, int server, const WorkLevel& v_hat, const Rat& tag_before) {
  if (variant_ == Variant::SfqBased) {
    // The dispatching server's level is pinned to the chosen packet's start
    // tag and stays put while the packet is in service; other servers keep
    // their own last value. Emptied backlogs still switch levels to infinity
    // so idle servers are re-activated correctly.
    for (int l = 0; l < state_.n_servers(); ++l) {
      if (!state_.matrix.eligible(user, l)) continue;
      if (eligible_backlogged_set(state_, l).empty())
        state_.servers[l].work_level = WorkLevel::infinity();
      else if (l == server)
        state_.servers[l].work_level = WorkLevel(tag_before);
    }
    return;
  }

  // Refresh the level of every server the chosen user is eligible on.
  for (int l = 0; l < state_.n_servers(); ++l)
    if (state_.matrix.eligible(user, l)) recompute_level(l);

  if (variant_ != Variant::Full) return;
  if (v_hat.is_infinite()) return;
  const Rat& pivot = v_hat.value();

  // Gap regulation: if the levels at or above the server's previous level
  // have pulled more than delta ahead of the levels below it, shift the
  // leading tags and levels down by the excess and bank it as bonus.
  bool any_below = false, any_above = false;
  Rat max_below, min_above;
  for (const ServerState& s : state_.servers) {
    if (s.work_level.is_infinite()) continue;
    const Rat& v = s.work_level.value();
    if (v < pivot) {
      if (!any_below || max_below < v) max_below = v;
      any_below = true;
    } else {
      if (!any_above || v < min_above) min_above = v;
      any_above = true;
    }
  }
  if (!any_below || !any_above) return;
  Rat d = min_above - max_below - state_.delta;
  if (d <= 0) return;

  for (UserState& u : state_.users) {
    if (u.service_tag >= pivot) {
      u.service_tag -= d;
      u.bonus += d;
    }
  }
  for (ServerState& s : state_.servers) {
    if (!s.work_level.is_infinite() && s.work_level.value() >= pivot) {
      s.work_level = WorkLevel(s.work_level.value() - d);
      s.bonus += d;
    }
  }
}

}  // namespace cm4fq
