#pragma once

#include "cm4fq/fluid_oracle.hpp"
#include "cm4fq/sim.hpp"

#include <string>
#include <vector>

namespace cm4fq {

struct SystemParams {
  EligibilityMatrix matrix;
  std::vector<Rat> rates;
  std::vector<Rat> weights;
  int64_t max_length = 0;
  Rat delta;

  static SystemParams from_scenario(const Scenario& sc);
  Rat lambda0() const;  // max_length / min weight
};

/// One evaluated inequality. pass holds exactly when `lhs relation rhs` does,
/// in exact rational arithmetic; slack is the margin left (negative = broken).
struct BoundReport {
  std::string bound_id;
  std::string scope;
  Rat t0, t1;
  Rat lhs, rhs;
  std::string relation;  // "<=", ">=", "=="
  bool pass = false;
  Rat slack;
};

struct SteadyIntervalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Maximal windows with a constant backlogged set, derived from the trace's
/// backlog change times. The set is the one holding just after t0.
struct SteadyInterval {
  Rat t0, t1;
  std::vector<int> backlogged;
};
std::vector<SteadyInterval> steady_intervals(const Trace& trace);

/// Total work of the user's packets chosen in [t0, t1): full length of a
/// packet chosen before t1 counts even if it completes later; work chosen
/// before t0 does not.
int64_t allocated_work(const Trace& trace, int user, const Rat& t0, const Rat& t1);

Rat average_rate(const Trace& trace, int user, const Rat& t0, const Rat& t1);

/// Spread of the finite server work levels at time t (0 if fewer than two).
Rat work_level_gap(const Trace& trace, const Rat& t);

/// Steady-state throughput bound: the user's normalized work over (t0, t1)
/// stays within K*lambda0 + max(initial leads) of its fair share. Rejects
/// windows where the backlog set changes or the user is not continuously
/// backlogged.
BoundReport check_steady_state(const SystemParams& params, const Trace& trace, int user,
                               const Rat& t0, const Rat& t1);

/// Worst-case throughput bounds over an arbitrary window: the lower bound
/// against the union backlogged set, the upper against the intersection set,
/// plus the coarse K*delta form of both.
std::vector<BoundReport> check_worst_case(const SystemParams& params, const Trace& trace, int user,
                                          const Rat& t0, const Rat& t1);

/// The exact identity between allocated work and tag+bonus movement for every
/// continuously backlogged user of every steady interval inside [t0, t1).
std::vector<BoundReport> check_tag_work_identity(const SystemParams& params, const Trace& trace,
                                                 const Rat& t0, const Rat& t1);

/// Cluster separation: once every higher cluster's minimum work level leads
/// the slowest cluster's maximum by at least delta, servers of the slowest
/// cluster serve only their own users.
std::vector<BoundReport> check_cluster_separation(const SystemParams& params, const Trace& trace,
                                                  const Rat& t_hat0, const Rat& t1);

/// Streaming checker for an isolated cluster under a steady backlog: per-
/// dispatch work bounds against the cluster rate and the bounded jump of a
/// freed server's level over the cluster minimum. Feed it to run() as an
/// observer; hypotheses (steady backlog, isolation, equal initial levels,
/// delta large enough) are verified as it goes and violations reported by
/// name instead of bound results.
class IsolatedClusterCheck : public DispatchObserver {
 public:
  IsolatedClusterCheck(SystemParams params, Cluster cluster);

  void on_dispatch(const DispatchRecord& rec, const std::vector<WorkLevel>& v_pre,
                   const std::vector<Rat>& d_pre, const std::vector<WorkLevel>& v_post,
                   const std::vector<Rat>& d_post) override;
  void on_finish(const Rat& time, const std::vector<WorkLevel>& v,
                 const std::vector<Rat>& d) override;

  // Call after the run (and, for steadiness, pass the trace).
  std::vector<BoundReport> reports(const Trace* trace = nullptr) const;

 private:
  void fail_hypothesis(const std::string& which);
  Rat w_of(int server, const std::vector<WorkLevel>& v, const std::vector<Rat>& d) const;

  SystemParams params_;
  Cluster cluster_;
  std::vector<bool> in_cluster_users_, in_cluster_servers_;
  Rat lambda_c_;
  int k_c_ = 0;

  bool started_ = false;
  Rat t0_;
  Rat v0_;                  // common initial level
  std::vector<Rat> d0_;     // initial bonuses
  std::vector<std::string> hypothesis_failures_;

  struct Tightest {
    bool any = false;
    Rat lhs, rhs, time;
    bool violated = false;
    Rat worst_lhs, worst_rhs, worst_time;
    void feed(const Rat& lhs_v, const Rat& rhs_v, const Rat& t, bool upper);
  };
  Tightest upper_, lower_, jump_;
  Rat finish_time_;
  bool finished_ = false;
};

}  // namespace cm4fq
