#include "cm4fq/sim.hpp"

#include "cm4fq/midrr.hpp"

#include <algorithm>
#include <queue>
#include <random>

namespace cm4fq {

int64_t LengthLaw::max_length() const {
  switch (kind) {
    case Kind::Fixed: return fixed;
    case Kind::Uniform: return hi;
    case Kind::Cycle: {
      int64_t m = 0;
      for (int64_t v : cycle) m = std::max(m, v);
      return m;
    }
  }
  return 0;
}

int64_t LengthLaw::min_length() const {
  switch (kind) {
    case Kind::Fixed: return fixed;
    case Kind::Uniform: return lo;
    case Kind::Cycle: {
      int64_t m = cycle.empty() ? 0 : cycle[0];
      for (int64_t v : cycle) m = std::min(m, v);
      return m;
    }
  }
  return 0;
}

Rat Scenario::effective_delta() const {
  if (delta) return *delta;
  return default_delta(matrix, weights(), max_length);
}

std::vector<Rat> Scenario::weights() const {
  std::vector<Rat> w;
  w.reserve(users.size());
  for (const auto& u : users) w.push_back(u.weight);
  return w;
}

void Scenario::validate() const {
  if (users.empty()) throw ConfigError("scenario has no users");
  if (server_rates.empty()) throw ConfigError("scenario has no servers");
  if (matrix.n_users() != n_users() || matrix.n_servers() != n_servers())
    throw ConfigError("eligibility matrix dimensions disagree with users/servers");
  try {
    matrix.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (int k = 0; k < n_servers(); ++k)
    if (server_rates[k] <= 0)
      throw ConfigError("server " + std::to_string(k) + " has non-positive rate");
  if (max_length <= 0) throw ConfigError("max_length must be positive");
  if (horizon < 0) throw ConfigError("horizon must be non-negative");
  if (delta && *delta <= 0) throw ConfigError("delta must be positive");
  if (sample_period && *sample_period <= 0) throw ConfigError("sample_period must be positive");
  if (fluid_epsilon && *fluid_epsilon <= 0) throw ConfigError("fluid_epsilon must be positive");

  for (int i = 0; i < n_users(); ++i) {
    const UserSpec& u = users[i];
    if (u.weight <= 0) throw ConfigError("user " + u.name + " has non-positive weight");
    if (u.quantum && *u.quantum <= 0) throw ConfigError("user " + u.name + " has non-positive quantum");
    for (const SourceSpec& s : u.sources) {
      switch (s.kind) {
        case SourceSpec::Kind::Deterministic:
          for (const auto& [t, len] : s.packets) {
            if (t < 0) throw ConfigError("user " + u.name + ": packet before time zero");
            if (len <= 0 || len > max_length)
              throw ConfigError("user " + u.name + ": packet length outside (0, max_length]");
          }
          break;
        case SourceSpec::Kind::Iid:
          if (s.interarrival_lo_us <= 0 || s.interarrival_hi_us < s.interarrival_lo_us)
            throw ConfigError("user " + u.name + ": bad iid inter-arrival bounds");
          [[fallthrough]];
        case SourceSpec::Kind::BackloggedForever:
        case SourceSpec::Kind::OnOff: {
          if (s.length.min_length() <= 0 || s.length.max_length() > max_length)
            throw ConfigError("user " + u.name + ": length law outside (0, max_length]");
          if (s.length.kind == LengthLaw::Kind::Cycle && s.length.cycle.empty())
            throw ConfigError("user " + u.name + ": empty length cycle");
          break;
        }
      }
      if (s.kind == SourceSpec::Kind::OnOff) {
        if (s.intervals.empty()) throw ConfigError("user " + u.name + ": onoff without intervals");
        for (size_t n = 0; n < s.intervals.size(); ++n) {
          const auto& [start, end] = s.intervals[n];
          if (start < 0) throw ConfigError("user " + u.name + ": interval before time zero");
          if (end && *end <= start) throw ConfigError("user " + u.name + ": empty onoff interval");
          if (n > 0) {
            const auto& prev = s.intervals[n - 1];
            if (!prev.second || *prev.second > start)
              throw ConfigError("user " + u.name + ": onoff intervals overlap or are unsorted");
          }
        }
      }
    }
  }
}

SystemState Scenario::initial_state() const {
  SystemState st;
  st.matrix = matrix;
  st.delta = effective_delta();
  st.users.resize(users.size());
  for (size_t i = 0; i < users.size(); ++i) st.users[i].weight = users[i].weight;
  st.servers.resize(server_rates.size());
  for (size_t k = 0; k < server_rates.size(); ++k) st.servers[k].rate = server_rates[k];
  return st;
}

std::vector<int> Scenario::initially_backlogged() const {
  std::vector<int> out;
  for (int i = 0; i < n_users(); ++i) {
    bool active = false;
    for (const SourceSpec& s : users[i].sources) {
      switch (s.kind) {
        case SourceSpec::Kind::BackloggedForever: active = true; break;
        case SourceSpec::Kind::Deterministic:
          for (const auto& [t, len] : s.packets) active |= t == 0;
          break;
        case SourceSpec::Kind::OnOff:
          for (const auto& [start, end] : s.intervals) active |= start == 0;
          break;
        case SourceSpec::Kind::Iid: break;
      }
    }
    if (active) out.push_back(i);
  }
  return out;
}

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t user, uint64_t source) {
  uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL + user * 0xbf58476d1ce4e5b9ULL +
                       source * 0x94d049bb133111ebULL);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  return x;
}

// Rejection sampling keeps the draw identical across standard libraries.
uint64_t uniform_below(std::mt19937_64& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

struct SourceRuntime {
  const SourceSpec* spec = nullptr;
  std::mt19937_64 rng;
  size_t cycle_pos = 0;

  int64_t draw_length() {
    const LengthLaw& law = spec->length;
    switch (law.kind) {
      case LengthLaw::Kind::Fixed: return law.fixed;
      case LengthLaw::Kind::Uniform:
        return law.lo + static_cast<int64_t>(uniform_below(rng, law.hi - law.lo + 1));
      case LengthLaw::Kind::Cycle: {
        int64_t v = law.cycle[cycle_pos];
        cycle_pos = (cycle_pos + 1) % law.cycle.size();
        return v;
      }
    }
    return 0;
  }

  Rat draw_gap() {
    int64_t us = spec->interarrival_lo_us +
                 static_cast<int64_t>(uniform_below(
                     rng, spec->interarrival_hi_us - spec->interarrival_lo_us + 1));
    return Rat(us, 1000000);
  }

  bool refills_at(const Rat& t) const {
    if (spec->kind == SourceSpec::Kind::BackloggedForever) return true;
    if (spec->kind != SourceSpec::Kind::OnOff) return false;
    for (const auto& [start, end] : spec->intervals)
      if (t >= start && (!end || t < *end)) return true;
    return false;
  }
};

struct Event {
  Rat time;
  int klass = 0;  // 0 = arrival, 1 = service completion
  int index = 0;  // user (arrival) or server (completion)
  int64_t seq = 0;
  int64_t length = -1;  // -1: draw from the source law when processed
  int source = -1;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.klass != b.klass) return a.klass > b.klass;
    if (a.index != b.index) return a.index > b.index;
    return a.seq > b.seq;
  }
};

void snapshot_into(StateSample& out, const SystemState& st, const Rat& time,
                   const char* phase, const std::vector<int64_t>& work) {
  out.time = time;
  out.phase = phase;
  const int n = st.n_users();
  const int k = st.n_servers();
  out.tags.resize(n);
  out.user_bonus.resize(n);
  out.levels.resize(k);
  out.server_bonus.resize(k);
  out.busy.resize(k);
  for (int i = 0; i < n; ++i) {
    out.tags[i] = st.users[i].service_tag;
    out.user_bonus[i] = st.users[i].bonus;
  }
  for (int s = 0; s < k; ++s) {
    out.levels[s] = st.servers[s].work_level;
    out.server_bonus[s] = st.servers[s].bonus;
    out.busy[s] = st.servers[s].busy();
  }
  out.work = work;
}

Rat level_gap(const SystemState& st) {
  bool any = false;
  Rat lo, hi;
  for (const ServerState& s : st.servers) {
    if (s.work_level.is_infinite()) continue;
    const Rat& v = s.work_level.value();
    if (!any) {
      lo = hi = v;
      any = true;
    } else {
      if (v < lo) lo = v;
      if (hi < v) hi = v;
    }
  }
  return any ? Rat(hi - lo) : Rat(0);
}

template <typename SchedulerT>
Trace run_engine(const Scenario& scenario, SchedulerT& sched, bool retry_all_idle,
                 const std::vector<DispatchObserver*>& observers) {
  const int n_users = scenario.n_users();
  const int n_servers = scenario.n_servers();

  Trace trace;
  trace.n_users = n_users;
  trace.n_servers = n_servers;
  trace.horizon = scenario.horizon;
  trace.total_work.assign(n_users, 0);

  SystemState& st = sched.state();
  std::vector<int64_t> work(n_users, 0);
  std::vector<int64_t> seq_counter(n_users, 0);

  // Sources and their initial arrival events.
  std::vector<std::vector<SourceRuntime>> sources(n_users);
  std::priority_queue<Event, std::vector<Event>, EventAfter> heap;
  for (int i = 0; i < n_users; ++i) {
    const auto& specs = scenario.users[i].sources;
    sources[i].resize(specs.size());
    for (size_t s = 0; s < specs.size(); ++s) {
      SourceRuntime& rt = sources[i][s];
      rt.spec = &specs[s];
      rt.rng.seed(mix_seed(scenario.seed, i, s));
      switch (specs[s].kind) {
        case SourceSpec::Kind::BackloggedForever:
          heap.push(Event{Rat(0), 0, i, 0, -1, static_cast<int>(s)});
          break;
        case SourceSpec::Kind::Deterministic: {
          int64_t n = 0;
          for (const auto& [t, len] : specs[s].packets)
            heap.push(Event{t, 0, i, n++, len, static_cast<int>(s)});
          break;
        }
        case SourceSpec::Kind::OnOff: {
          int64_t n = 0;
          for (const auto& [start, end] : specs[s].intervals)
            heap.push(Event{start, 0, i, n++, -1, static_cast<int>(s)});
          break;
        }
        case SourceSpec::Kind::Iid:
          heap.push(Event{rt.draw_gap(), 0, i, 0, -1, static_cast<int>(s)});
          break;
      }
    }
  }

  std::vector<BacklogChange> pending_backlog;
  sched.refill_hook = [&](SystemState& state, int user) {
    for (SourceRuntime& rt : sources[user]) {
      if (!rt.refills_at(state.clock)) continue;
      state.users[user].queue.push_back(
          Packet{user, rt.draw_length(), state.clock, seq_counter[user]++});
      return;
    }
  };
  sched.backlog_hook = [&](int user, bool backlogged) {
    pending_backlog.push_back(BacklogChange{st.clock, user, backlogged});
  };

  const bool events_mode = scenario.trace_mode == TraceMode::Events;
  const bool have_observers = !observers.empty();
  std::optional<Rat> period = scenario.sample_period;
  Rat next_tick = period ? *period : Rat(0);

  StateSample prev_post;
  snapshot_into(prev_post, st, Rat(0), "post", work);
  Rat last_post_sample_time(-1);

  std::vector<WorkLevel> v_pre, v_post;
  std::vector<Rat> d_pre, d_post;
  auto capture_levels = [&](std::vector<WorkLevel>& v, std::vector<Rat>& d) {
    v.resize(n_servers);
    d.resize(n_servers);
    for (int k = 0; k < n_servers; ++k) {
      v[k] = st.servers[k].work_level;
      d[k] = st.servers[k].bonus;
    }
  };

  auto emit_ticks_before = [&](const Rat& t) {
    if (!period) return;
    while (next_tick < t) {
      if (next_tick >= scenario.horizon) return;
      StateSample s = prev_post;
      s.time = next_tick;
      s.phase = "post";
      trace.samples.push_back(std::move(s));
      next_tick += *period;
    }
  };

  auto note_gap = [&]() {
    Rat gap = level_gap(st);
    if (trace.max_work_level_gap < gap) trace.max_work_level_gap = gap;
  };

  std::vector<Event> batch;
  while (!heap.empty()) {
    const Rat t = heap.top().time;
    if (t >= scenario.horizon) break;
    emit_ticks_before(t);

    batch.clear();
    while (!heap.empty() && heap.top().time == t) {
      batch.push_back(heap.top());
      heap.pop();
    }
    st.clock = t;
    pending_backlog.clear();

    std::vector<uint8_t> candidates(n_servers, 0);
    bool had_arrival = false;

    for (const Event& ev : batch) {
      if (ev.klass != 0) continue;
      had_arrival = true;
      SourceRuntime& rt = sources[ev.index][ev.source];
      int64_t length = ev.length >= 0 ? ev.length : rt.draw_length();
      Packet packet{ev.index, length, t, seq_counter[ev.index]++};
      trace.arrivals.push_back(ArrivalRecord{t, ev.index, length, packet.seq});
      for (int k : sched.on_arrival(packet)) candidates[k] = 1;
      if (rt.spec->kind == SourceSpec::Kind::Iid)
        heap.push(Event{t + rt.draw_gap(), 0, ev.index, ev.seq + 1, -1, ev.source});
    }

    bool entered_backlog = !pending_backlog.empty();
    if (had_arrival) note_gap();  // activation can move levels
    if (had_arrival && (events_mode || entered_backlog)) {
      StateSample s;
      snapshot_into(s, st, t, "arrivals", work);
      trace.samples.push_back(std::move(s));
    }

    for (const Event& ev : batch) {
      if (ev.klass != 1) continue;
      Packet packet = sched.complete(ev.index);
      trace.completions.push_back(CompletionRecord{t, ev.index, packet.owner, packet.length});
      candidates[ev.index] = 1;
    }

    for (int k = 0; k < n_servers; ++k) {
      if (st.servers[k].busy()) continue;
      if (!retry_all_idle && !candidates[k]) continue;
      if (have_observers) capture_levels(v_pre, d_pre);
      auto rec = sched.try_dispatch(k);
      if (!rec) continue;
      trace.dispatches.push_back(*rec);
      work[rec->user] += rec->length;
      heap.push(Event{st.servers[k].in_service->completion_time, 1, k, 0, -1, -1});
      note_gap();  // excursions between same-timestamp dispatches count
      if (have_observers) {
        capture_levels(v_post, d_post);
        for (DispatchObserver* obs : observers)
          obs->on_dispatch(*rec, v_pre, d_pre, v_post, d_post);
      }
    }

    // Post-batch bookkeeping: samples and backlog changes.
    note_gap();
    bool boundary = !pending_backlog.empty();
    bool tick_now = period && next_tick == t;
    if (!events_mode && boundary && prev_post.time < t && last_post_sample_time < prev_post.time) {
      // State just before this boundary, so left-continuous readings exist.
      trace.samples.push_back(prev_post);
    }
    if (events_mode || boundary || tick_now) {
      StateSample s;
      snapshot_into(s, st, t, "post", work);
      trace.samples.push_back(std::move(s));
      last_post_sample_time = t;
    }
    if (tick_now) next_tick += *period;
    snapshot_into(prev_post, st, t, "post", work);

    for (auto& change : pending_backlog) trace.backlog_changes.push_back(change);
  }

  emit_ticks_before(scenario.horizon);
  st.clock = scenario.horizon;
  StateSample final_sample;
  snapshot_into(final_sample, st, scenario.horizon, "post", work);
  trace.samples.push_back(std::move(final_sample));
  trace.total_work = work;

  if (have_observers) {
    capture_levels(v_post, d_post);
    for (DispatchObserver* obs : observers) obs->on_finish(scenario.horizon, v_post, d_post);
  }
  return trace;
}

}  // namespace

Trace run(const Scenario& scenario, const std::vector<DispatchObserver*>& observers) {
  Scenario sc = scenario;
  if (scenario.fluid_epsilon) {
    sc = fluid_approx(scenario, *scenario.fluid_epsilon);
    sc.fluid_epsilon.reset();
  }
  sc.validate();
  Scheduler sched(sc.initial_state(), sc.variant);
  return run_engine(sc, sched, /*retry_all_idle=*/false, observers);
}

Trace run_midrr(const Scenario& scenario) {
  Scenario sc = scenario;
  if (scenario.fluid_epsilon) {
    sc = fluid_approx(scenario, *scenario.fluid_epsilon);
    sc.fluid_epsilon.reset();
  }
  sc.validate();
  std::vector<Rat> quanta;
  for (const UserSpec& u : sc.users) quanta.push_back(u.quantum ? *u.quantum : Rat(sc.max_length));
  MiDrrScheduler sched(sc.initial_state(), quanta);
  // Completions re-arm flows on other servers, so every idle server gets a
  // fresh look after each event.
  return run_engine(sc, sched, /*retry_all_idle=*/true, {});
}

Scenario fluid_approx(const Scenario& base, int64_t epsilon) {
  if (epsilon <= 0) throw ConfigError("fluid epsilon must be positive");
  Scenario out = base;
  out.max_length = epsilon;
  for (UserSpec& u : out.users) {
    for (SourceSpec& s : u.sources) {
      switch (s.kind) {
        case SourceSpec::Kind::BackloggedForever:
        case SourceSpec::Kind::OnOff:
        case SourceSpec::Kind::Iid:
          s.length = LengthLaw{LengthLaw::Kind::Fixed, epsilon, 0, 0, {}};
          break;
        case SourceSpec::Kind::Deterministic: {
          std::vector<std::pair<Rat, int64_t>> split;
          for (const auto& [t, len] : s.packets) {
            int64_t rest = len;
            while (rest > 0) {
              int64_t piece = std::min(rest, epsilon);
              split.emplace_back(t, piece);
              rest -= piece;
            }
          }
          s.packets = std::move(split);
          break;
        }
      }
    }
  }
  return out;
}

const StateSample* Trace::state_at(const Rat& t) const {
  const StateSample* best = nullptr;
  for (const auto& s : samples) {
    if (s.phase != "post") continue;
    if (s.time <= t) best = &s;
    if (s.time > t) break;
  }
  return best;
}

const StateSample* Trace::state_before(const Rat& t) const {
  const StateSample* best = nullptr;
  for (const auto& s : samples) {
    if (s.phase != "post") continue;
    if (s.time < t) best = &s;
    if (s.time >= t) break;
  }
  return best;
}

const StateSample* Trace::arrivals_phase_at(const Rat& t) const {
  for (const auto& s : samples) {
    if (s.time == t && s.phase == "arrivals") return &s;
    if (s.time > t) break;
  }
  return nullptr;
}

int64_t Trace::work_in(int user, const Rat& t0, const Rat& t1) const {
  int64_t sum = 0;
  for (const auto& d : dispatches) {
    if (d.time >= t1) break;
    if (d.user == user && d.time >= t0) sum += d.length;
  }
  return sum;
}

int64_t Trace::work_in_open(int user, const Rat& t0, const Rat& t1) const {
  int64_t sum = 0;
  for (const auto& d : dispatches) {
    if (d.time >= t1) break;
    if (d.user == user && d.time > t0) sum += d.length;
  }
  return sum;
}

}  // namespace cm4fq
