#include "cm4fq/metrics.hpp"

#include <algorithm>

namespace cm4fq {

SystemParams SystemParams::from_scenario(const Scenario& sc) {
  SystemParams p;
  p.matrix = sc.matrix;
  p.rates = sc.server_rates;
  p.weights = sc.weights();
  p.max_length = sc.fluid_epsilon ? *sc.fluid_epsilon : sc.max_length;
  p.delta = sc.effective_delta();
  return p;
}

Rat SystemParams::lambda0() const {
  Rat min_w = weights.at(0);
  for (const Rat& w : weights)
    if (w < min_w) min_w = w;
  return Rat(max_length) / min_w;
}

std::vector<SteadyInterval> steady_intervals(const Trace& trace) {
  std::vector<SteadyInterval> out;
  std::vector<bool> backlogged(trace.n_users, false);
  Rat start(0);
  auto flush = [&](const Rat& end) {
    if (end <= start) return;
    SteadyInterval iv;
    iv.t0 = start;
    iv.t1 = end;
    for (int i = 0; i < trace.n_users; ++i)
      if (backlogged[i]) iv.backlogged.push_back(i);
    out.push_back(std::move(iv));
  };
  size_t pos = 0;
  while (pos < trace.backlog_changes.size()) {
    const Rat t = trace.backlog_changes[pos].time;
    if (t != start) {
      flush(t);
      start = t;
    }
    while (pos < trace.backlog_changes.size() && trace.backlog_changes[pos].time == t) {
      backlogged[trace.backlog_changes[pos].user] = trace.backlog_changes[pos].backlogged;
      ++pos;
    }
  }
  flush(trace.horizon);
  return out;
}

int64_t allocated_work(const Trace& trace, int user, const Rat& t0, const Rat& t1) {
  return trace.work_in(user, t0, t1);
}

Rat average_rate(const Trace& trace, int user, const Rat& t0, const Rat& t1) {
  if (t1 <= t0) throw std::invalid_argument("empty window");
  return Rat(trace.work_in(user, t0, t1)) / (t1 - t0);
}

Rat work_level_gap(const Trace& trace, const Rat& t) {
  const StateSample* s = trace.state_at(t);
  if (!s) throw std::invalid_argument("no sample at or before requested time");
  bool any = false;
  Rat lo, hi;
  for (const WorkLevel& v : s->levels) {
    if (v.is_infinite()) continue;
    if (!any) {
      lo = hi = v.value();
      any = true;
    } else {
      if (v.value() < lo) lo = v.value();
      if (hi < v.value()) hi = v.value();
    }
  }
  return any ? Rat(hi - lo) : Rat(0);
}

namespace {

// The steady interval covering [t0, t1); throws when the window straddles a
// backlog change.
const SteadyInterval& covering_interval(const std::vector<SteadyInterval>& intervals,
                                        const Rat& t0, const Rat& t1) {
  for (const auto& iv : intervals)
    if (iv.t0 <= t0 && t1 <= iv.t1) return iv;
  throw SteadyIntervalError("backlogged set changes inside the requested window");
}

bool contains(const std::vector<int>& xs, int x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

// Minimum finite work level among the servers of clusters index >= m
// (>(=) by position in the rate-sorted list, zero-rate cluster excluded).
std::optional<Rat> min_level_from(const Foc& foc, int m, const StateSample& s) {
  std::optional<Rat> best;
  for (size_t l = m; l < foc.clusters.size(); ++l) {
    for (int k : foc.clusters[l].servers) {
      if (s.levels[k].is_infinite()) continue;
      if (!best || s.levels[k].value() < *best) best = s.levels[k].value();
    }
  }
  return best;
}

std::optional<Rat> max_level_upto(const Foc& foc, int m, const StateSample& s) {
  std::optional<Rat> best;
  for (int l = 0; l <= m; ++l) {
    if (foc.clusters[l].rate == 0) continue;
    for (int k : foc.clusters[l].servers) {
      if (s.levels[k].is_infinite()) continue;
      if (!best || *best < s.levels[k].value()) best = s.levels[k].value();
    }
  }
  return best;
}

Rat delta_init(const Foc& foc, int m, int user, const StateSample& s) {
  auto low = min_level_from(foc, m, s);
  if (!low) throw SteadyIntervalError("all reference work levels are infinite at the window start");
  return s.tags[user] - *low;
}

Rat delta_init_tilde(const SystemParams& params, const Foc& foc, int m, int user,
                     const StateSample& s) {
  auto high = max_level_upto(foc, m, s);
  if (!high) throw SteadyIntervalError("all reference work levels are infinite at the window start");
  return *high - s.tags[user] + Rat(params.max_length) / params.weights[user];
}

BoundReport make_report(std::string id, std::string scope, Rat t0, Rat t1, Rat lhs, Rat rhs,
                        const std::string& relation) {
  BoundReport r;
  r.bound_id = std::move(id);
  r.scope = std::move(scope);
  r.t0 = std::move(t0);
  r.t1 = std::move(t1);
  r.lhs = lhs;
  r.rhs = rhs;
  r.relation = relation;
  if (relation == "<=") {
    r.pass = lhs <= rhs;
    r.slack = rhs - lhs;
  } else if (relation == ">=") {
    r.pass = lhs >= rhs;
    r.slack = lhs - rhs;
  } else {
    r.pass = lhs == rhs;
    r.slack = lhs - rhs;
  }
  return r;
}

}  // namespace

BoundReport check_steady_state(const SystemParams& params, const Trace& trace, int user,
                               const Rat& t0, const Rat& t1) {
  if (t1 <= t0) throw std::invalid_argument("empty window");
  auto intervals = steady_intervals(trace);
  const SteadyInterval& iv = covering_interval(intervals, t0, t1);
  if (!contains(iv.backlogged, user))
    throw SteadyIntervalError("user is not continuously backlogged over the window");

  Foc foc = compute_foc(params.matrix, params.rates, params.weights, iv.backlogged);
  int m = foc.cluster_of_user(user);
  Rat fair_rate = params.weights[user] * foc.clusters[m].rate;

  const StateSample* start = trace.state_at(t0);
  if (!start) throw SteadyIntervalError("no state sample at the window start");

  Rat d_init = delta_init(foc, m, user, *start);
  Rat d_init_tilde = delta_init_tilde(params, foc, m, user, *start);
  Rat rhs = Rat(params.matrix.n_servers()) * params.lambda0() +
            (d_init < d_init_tilde ? d_init_tilde : d_init);

  Rat normalized_work = Rat(trace.work_in_open(user, t0, t1)) / params.weights[user];
  Rat fair_share = fair_rate * (t1 - t0) / params.weights[user];
  Rat lhs = normalized_work - fair_share;
  if (lhs < 0) lhs = -lhs;

  return make_report("steady_state_throughput", "user " + std::to_string(user), t0, t1, lhs, rhs,
                     "<=");
}

std::vector<BoundReport> check_worst_case(const SystemParams& params, const Trace& trace, int user,
                                          const Rat& t0, const Rat& t1) {
  if (t1 <= t0) throw std::invalid_argument("empty window");
  // Union and intersection backlogged sets over (t0, t1).
  auto intervals = steady_intervals(trace);
  std::vector<bool> in_union(trace.n_users, false), in_all(trace.n_users, true);
  bool any_interval = false;
  for (const auto& iv : intervals) {
    if (iv.t1 <= t0 || iv.t0 >= t1) continue;
    any_interval = true;
    std::vector<bool> here(trace.n_users, false);
    for (int i : iv.backlogged) here[i] = true;
    for (int i = 0; i < trace.n_users; ++i) {
      in_union[i] = in_union[i] || here[i];
      in_all[i] = in_all[i] && here[i];
    }
  }
  if (!any_interval) throw SteadyIntervalError("window lies outside the trace");
  if (!in_all[user])
    throw SteadyIntervalError("user is not continuously backlogged over the window");

  std::vector<int> union_set, inter_set;
  for (int i = 0; i < trace.n_users; ++i) {
    if (in_union[i]) union_set.push_back(i);
    if (in_all[i]) inter_set.push_back(i);
  }

  const StateSample* start = trace.state_at(t0);
  if (!start) throw SteadyIntervalError("no state sample at the window start");

  const Rat span = t1 - t0;
  const Rat lambda0 = params.lambda0();
  const int n_servers = params.matrix.n_servers();
  Rat normalized_work = Rat(trace.work_in_open(user, t0, t1)) / params.weights[user];
  std::string scope = "user " + std::to_string(user);
  std::vector<BoundReport> out;

  {
    Foc foc = compute_foc(params.matrix, params.rates, params.weights, union_set);
    int m = foc.cluster_of_user(user);
    Rat fair_share = foc.clusters[m].rate * span;  // already normalized per unit weight
    Rat d_init = delta_init(foc, m, user, *start);
    int servers_from_m = 0;
    for (size_t l = m; l < foc.clusters.size(); ++l)
      servers_from_m += static_cast<int>(foc.clusters[l].servers.size());
    out.push_back(make_report("worst_case_lower", scope, t0, t1, normalized_work,
                              fair_share - d_init - lambda0 * servers_from_m, ">="));
    out.push_back(make_report("worst_case_lower_coarse", scope, t0, t1, normalized_work,
                              fair_share - Rat(n_servers) * params.delta, ">="));
    out.push_back(make_report("initial_lead_bound", scope, t0, t1, d_init,
                              Rat(n_servers - 1) * params.delta +
                                  Rat(params.max_length) / params.weights[user],
                              "<="));
  }
  {
    Foc foc = compute_foc(params.matrix, params.rates, params.weights, inter_set);
    int m = foc.cluster_of_user(user);
    Rat fair_share = foc.clusters[m].rate * span;
    Rat d_init_tilde = delta_init_tilde(params, foc, m, user, *start);
    int servers_upto_m = 0;
    for (int l = 0; l <= m; ++l) {
      if (foc.clusters[l].rate == 0) continue;
      servers_upto_m += static_cast<int>(foc.clusters[l].servers.size());
    }
    out.push_back(make_report("worst_case_upper", scope, t0, t1, normalized_work,
                              fair_share + d_init_tilde + lambda0 * servers_upto_m, "<="));
    out.push_back(make_report("worst_case_upper_coarse", scope, t0, t1, normalized_work,
                              fair_share + Rat(n_servers) * params.delta, "<="));
  }
  return out;
}

std::vector<BoundReport> check_tag_work_identity(const SystemParams& params, const Trace& trace,
                                                 const Rat& t0, const Rat& t1) {
  std::vector<BoundReport> out;
  for (const SteadyInterval& iv : steady_intervals(trace)) {
    if (iv.t1 <= t0 || iv.t0 >= t1) continue;
    Rat a = iv.t0 < t0 ? t0 : iv.t0;
    Rat b = iv.t1 > t1 ? t1 : iv.t1;
    const StateSample* start = trace.state_at(a);
    const StateSample* end = b == trace.horizon ? trace.state_at(b) : trace.state_before(b);
    if (!start || !end) continue;
    for (int i : iv.backlogged) {
      Rat lhs = Rat(trace.work_in_open(i, a, b)) / params.weights[i];
      Rat rhs = (end->tags[i] - start->tags[i]) + (end->user_bonus[i] - start->user_bonus[i]);
      out.push_back(
          make_report("tag_work_identity", "user " + std::to_string(i), a, b, lhs, rhs, "=="));
    }
  }
  return out;
}

std::vector<BoundReport> check_cluster_separation(const SystemParams& params, const Trace& trace,
                                                  const Rat& t_hat0, const Rat& t1) {
  std::vector<BoundReport> out;
  // Backlogged union over (t_hat0, t1) fixes the clustering.
  std::vector<bool> in_union(trace.n_users, false);
  for (const auto& iv : steady_intervals(trace)) {
    if (iv.t1 <= t_hat0 || iv.t0 >= t1) continue;
    for (int i : iv.backlogged) in_union[i] = true;
  }
  std::vector<int> union_set;
  for (int i = 0; i < trace.n_users; ++i)
    if (in_union[i]) union_set.push_back(i);
  Foc foc = compute_foc(params.matrix, params.rates, params.weights, union_set);

  const Cluster* slowest = nullptr;
  for (const Cluster& c : foc.clusters) {
    if (c.rate == 0) continue;
    slowest = &c;
    break;
  }
  if (!slowest || foc.clusters.back().rate == slowest->rate) {
    out.push_back(make_report("cluster_separation_hypothesis", "single cluster", t_hat0, t1, Rat(0),
                              Rat(1), ">="));
    out.back().pass = false;
    return out;
  }

  // Gap hypothesis at t_hat0: every faster cluster's minimum level leads the
  // slowest cluster's maximum by at least delta, read right after arrivals.
  const StateSample* at = trace.arrivals_phase_at(t_hat0);
  if (!at) at = trace.state_at(t_hat0);
  if (!at) throw SteadyIntervalError("no sample at separation start");

  Rat slow_max;
  bool any_slow = false;
  for (int k : slowest->servers) {
    if (at->levels[k].is_infinite()) continue;
    if (!any_slow || slow_max < at->levels[k].value()) slow_max = at->levels[k].value();
    any_slow = true;
  }
  Rat min_gap;
  bool any_gap = false;
  for (const Cluster& c : foc.clusters) {
    if (c.rate <= slowest->rate) continue;
    Rat c_min;
    bool any = false;
    for (int k : c.servers) {
      if (at->levels[k].is_infinite()) continue;
      if (!any || at->levels[k].value() < c_min) c_min = at->levels[k].value();
      any = true;
    }
    if (!any) continue;
    Rat gap = c_min - slow_max;
    if (!any_gap || gap < min_gap) min_gap = gap;
    any_gap = true;
  }
  if (!any_slow || !any_gap) throw SteadyIntervalError("work levels unavailable at separation start");
  out.push_back(make_report("cluster_separation_gap", "slowest cluster", t_hat0, t1, min_gap,
                            params.delta, ">="));

  // Conclusion: within (t_hat0, t1), slowest-cluster servers serve only
  // slowest-cluster users.
  std::vector<bool> slow_server(trace.n_servers, false), slow_user(trace.n_users, false);
  for (int k : slowest->servers) slow_server[k] = true;
  for (int i : slowest->users) slow_user[i] = true;
  int64_t foreign = 0;
  for (const auto& d : trace.dispatches) {
    if (d.time <= t_hat0 || d.time >= t1) continue;
    if (slow_server[d.server] && !slow_user[d.user]) ++foreign;
  }
  out.push_back(make_report("cluster_separation", "slowest cluster", t_hat0, t1, Rat(foreign),
                            Rat(0), "=="));
  return out;
}

void IsolatedClusterCheck::Tightest::feed(const Rat& lhs_v, const Rat& rhs_v, const Rat& t,
                                          bool upper) {
  Rat margin = upper ? rhs_v - lhs_v : lhs_v - rhs_v;
  bool worse = !any || margin < (upper ? rhs - lhs : lhs - rhs);
  if (worse) {
    lhs = lhs_v;
    rhs = rhs_v;
    time = t;
  }
  any = true;
  if (margin < 0) violated = true;
}

IsolatedClusterCheck::IsolatedClusterCheck(SystemParams params, Cluster cluster)
    : params_(std::move(params)), cluster_(std::move(cluster)) {
  in_cluster_users_.assign(params_.matrix.n_users(), false);
  in_cluster_servers_.assign(params_.matrix.n_servers(), false);
  for (int i : cluster_.users) in_cluster_users_[i] = true;
  for (int k : cluster_.servers) in_cluster_servers_[k] = true;
  Rat min_w;
  bool any = false;
  for (int i : cluster_.users) {
    if (!any || params_.weights[i] < min_w) min_w = params_.weights[i];
    any = true;
  }
  if (!any) throw std::invalid_argument("cluster without users");
  lambda_c_ = Rat(params_.max_length) / min_w;
  k_c_ = static_cast<int>(cluster_.servers.size());
  if (params_.delta < Rat(k_c_ + 1) * lambda_c_)
    fail_hypothesis("delta smaller than (K_C+1)*lambda_C");
}

void IsolatedClusterCheck::fail_hypothesis(const std::string& which) {
  for (const auto& h : hypothesis_failures_)
    if (h == which) return;
  hypothesis_failures_.push_back(which);
}

Rat IsolatedClusterCheck::w_of(int server, const std::vector<WorkLevel>& v,
                               const std::vector<Rat>& d) const {
  if (v[server].is_infinite()) return Rat(0);  // guarded by hypothesis checks
  return (v[server].value() - v0_) + (d[server] - d0_[server]);
}

void IsolatedClusterCheck::on_dispatch(const DispatchRecord& rec, const std::vector<WorkLevel>& v_pre,
                                       const std::vector<Rat>& d_pre,
                                       const std::vector<WorkLevel>& v_post,
                                       const std::vector<Rat>& /*d_post*/) {
  bool server_in = in_cluster_servers_[rec.server];
  bool user_in = in_cluster_users_[rec.user];
  if (server_in != user_in) fail_hypothesis("cluster not isolated (cross dispatch)");
  if (!server_in) return;

  if (!started_) {
    started_ = true;
    t0_ = rec.time;
    d0_.assign(params_.matrix.n_servers(), Rat(0));
    bool any = false;
    for (int k : cluster_.servers) {
      if (v_pre[k].is_infinite()) {
        fail_hypothesis("initial work level infinite inside the cluster");
        continue;
      }
      if (!any) {
        v0_ = v_pre[k].value();
        any = true;
      } else if (v_pre[k].value() != v0_) {
        fail_hypothesis("initial work levels unequal inside the cluster");
      }
      d0_[k] = d_pre[k];
    }
  }

  if (v_pre[rec.server].is_infinite() || v_post[rec.server].is_infinite()) {
    fail_hypothesis("work level infinite at a dispatch inside the cluster");
    return;
  }

  const Rat elapsed = rec.time - t0_;
  Rat w = w_of(rec.server, v_pre, d_pre);
  upper_.feed(w, cluster_.rate * elapsed + Rat(k_c_) * lambda_c_, rec.time, true);
  lower_.feed(w, cluster_.rate * elapsed - Rat(k_c_) * lambda_c_, rec.time, false);

  Rat cluster_min;
  bool any = false;
  for (int k : cluster_.servers) {
    if (v_pre[k].is_infinite()) continue;
    if (!any || v_pre[k].value() < cluster_min) cluster_min = v_pre[k].value();
    any = true;
  }
  if (any)
    jump_.feed(v_post[rec.server].value() - cluster_min, Rat(k_c_ + 1) * lambda_c_, rec.time, true);
}

void IsolatedClusterCheck::on_finish(const Rat& time, const std::vector<WorkLevel>& v,
                                     const std::vector<Rat>& d) {
  if (!started_) return;
  finished_ = true;
  finish_time_ = time;
  const Rat elapsed = time - t0_;
  for (int k : cluster_.servers) {
    if (v[k].is_infinite()) continue;
    lower_.feed(w_of(k, v, d), cluster_.rate * elapsed - Rat(k_c_) * lambda_c_, time, false);
  }
}

std::vector<BoundReport> IsolatedClusterCheck::reports(const Trace* trace) const {
  std::vector<BoundReport> out;
  std::string scope = "cluster rate " + to_fraction_string(cluster_.rate);
  std::vector<std::string> failures = hypothesis_failures_;
  if (trace) {
    for (const auto& change : trace->backlog_changes)
      if (change.time > 0) {
        failures.push_back("backlogged set changes during the run");
        break;
      }
  }
  Rat t1 = finished_ ? finish_time_ : Rat(0);
  if (!failures.empty()) {
    for (const auto& f : failures) {
      BoundReport r = make_report("isolated_cluster_hypothesis", scope + ": " + f, t0_, t1, Rat(1),
                                  Rat(0), "==");
      r.pass = false;
      out.push_back(std::move(r));
    }
    return out;
  }
  auto emit = [&](const char* id, const Tightest& t, const char* relation) {
    if (!t.any) return;
    BoundReport r = make_report(id, scope, t0_, t1, t.lhs, t.rhs, relation);
    r.pass = !t.violated;
    out.push_back(std::move(r));
  };
  emit("cluster_work_upper", upper_, "<=");
  emit("cluster_work_lower", lower_, ">=");
  emit("cluster_level_jump", jump_, "<=");
  return out;
}

}  // namespace cm4fq
