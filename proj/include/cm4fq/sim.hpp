#pragma once

#include "cm4fq/core.hpp"
#include "cm4fq/scheduler.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cm4fq {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LengthLaw {
  enum class Kind { Fixed, Uniform, Cycle };
  Kind kind = Kind::Fixed;
  int64_t fixed = 0;
  int64_t lo = 0, hi = 0;      // uniform integers, inclusive bounds
  std::vector<int64_t> cycle;  // repeating deterministic lengths

  int64_t max_length() const;
  int64_t min_length() const;
};

struct SourceSpec {
  enum class Kind {
    BackloggedForever,  // queue kept nonempty from t=0 on
    Deterministic,      // explicit (time, length) arrivals
    Iid,                // random inter-arrival gaps, random lengths
    OnOff               // kept backlogged during each interval
  };
  Kind kind = Kind::BackloggedForever;
  LengthLaw length;
  std::vector<std::pair<Rat, int64_t>> packets;            // Deterministic
  int64_t interarrival_lo_us = 0, interarrival_hi_us = 0;  // Iid, microseconds
  // OnOff: [start, end) pairs; missing end means open-ended.
  std::vector<std::pair<Rat, std::optional<Rat>>> intervals;
};

struct UserSpec {
  std::string name;
  Rat weight{1};
  std::vector<SourceSpec> sources;
  std::optional<Rat> quantum;  // deficit-round-robin quantum (baseline runs)
};

struct CheckSpec {
  std::string kind;
  std::optional<Rat> limit;
  std::optional<Rat> after;
  std::optional<Rat> t0, t1;
};

enum class TraceMode { Events, Sampled };

struct Scenario {
  std::string name;
  std::string description;
  std::vector<UserSpec> users;
  std::vector<std::string> server_names;
  std::vector<Rat> server_rates;  // bits per second
  EligibilityMatrix matrix;
  Variant variant = Variant::Full;
  std::optional<Rat> delta;
  int64_t max_length = 0;
  Rat horizon;
  uint64_t seed = 1;
  std::optional<Rat> sample_period;
  std::optional<int64_t> fluid_epsilon;  // run through fluid_approx first
  TraceMode trace_mode = TraceMode::Events;
  std::vector<CheckSpec> checks;

  int n_users() const { return static_cast<int>(users.size()); }
  int n_servers() const { return static_cast<int>(server_rates.size()); }
  Rat effective_delta() const;
  std::vector<Rat> weights() const;
  void validate() const;
  SystemState initial_state() const;
  // Users whose queue is nonempty the moment the clock starts.
  std::vector<int> initially_backlogged() const;
};

struct ArrivalRecord {
  Rat time;
  int user = 0;
  int64_t length = 0;
  int64_t seq = 0;
};

struct CompletionRecord {
  Rat time;
  int server = 0;
  int user = 0;
  int64_t length = 0;
};

struct BacklogChange {
  Rat time;
  int user = 0;
  bool backlogged = false;
};

struct StateSample {
  Rat time;
  // "post" = after the whole same-timestamp batch; "arrivals" = after the
  // batch's arrivals but before its dispatches.
  std::string phase;
  std::vector<Rat> tags;
  std::vector<Rat> user_bonus;
  std::vector<WorkLevel> levels;
  std::vector<Rat> server_bonus;
  std::vector<bool> busy;
  std::vector<int64_t> work;  // cumulative dispatched bits per user
};

struct Trace {
  int n_users = 0;
  int n_servers = 0;
  Rat horizon;
  std::vector<DispatchRecord> dispatches;
  std::vector<ArrivalRecord> arrivals;  // source arrivals; queue refills are not events
  std::vector<CompletionRecord> completions;
  std::vector<BacklogChange> backlog_changes;
  std::vector<StateSample> samples;
  Rat max_work_level_gap{0};  // streaming max over every event boundary
  std::vector<int64_t> total_work;

  // Latest "post" sample with time <= t / strictly < t.
  const StateSample* state_at(const Rat& t) const;
  const StateSample* state_before(const Rat& t) const;
  const StateSample* arrivals_phase_at(const Rat& t) const;
  // Total dispatched bits of packets chosen in [t0, t1).
  int64_t work_in(int user, const Rat& t0, const Rat& t1) const;
  // Same with both endpoints open, which is what the bound checkers use.
  int64_t work_in_open(int user, const Rat& t0, const Rat& t1) const;
};

/// Exact pre/post work-level view of one dispatch, for streaming checkers.
class DispatchObserver {
 public:
  virtual ~DispatchObserver() = default;
  virtual void on_dispatch(const DispatchRecord& rec, const std::vector<WorkLevel>& v_pre,
                           const std::vector<Rat>& d_pre, const std::vector<WorkLevel>& v_post,
                           const std::vector<Rat>& d_post) = 0;
  virtual void on_finish(const Rat& time, const std::vector<WorkLevel>& v,
                         const std::vector<Rat>& d) = 0;
};

/// Runs the scenario under its scheduler variant. Identical scenarios and
/// seeds produce identical traces.
Trace run(const Scenario& scenario, const std::vector<DispatchObserver*>& observers = {});

/// Same event loop driving the deficit-round-robin baseline.
Trace run_midrr(const Scenario& scenario);

/// Replaces every source with epsilon-length packet trains of the same total
/// work so packetized rates converge to the fluid ones.
Scenario fluid_approx(const Scenario& base, int64_t epsilon);

}  // namespace cm4fq
