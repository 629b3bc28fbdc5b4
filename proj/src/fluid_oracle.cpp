#include "cm4fq/fluid_oracle.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>

namespace cm4fq {

int Foc::cluster_of_user(int user) const {
  for (int m = 0; m < static_cast<int>(clusters.size()); ++m)
    for (int u : clusters[m].users)
      if (u == user) return m;
  throw std::out_of_range("user not in any cluster");
}

int Foc::cluster_of_server(int server) const {
  for (int m = 0; m < static_cast<int>(clusters.size()); ++m)
    for (int s : clusters[m].servers)
      if (s == server) return m;
  throw std::out_of_range("server not in any cluster");
}

Foc compute_foc(const EligibilityMatrix& matrix, const std::vector<Rat>& rates,
                const std::vector<Rat>& weights, const std::vector<int>& backlogged) {
  matrix.validate();
  const int n_users = matrix.n_users();
  const int n_servers = matrix.n_servers();
  if (static_cast<int>(rates.size()) != n_servers || static_cast<int>(weights.size()) != n_users)
    throw std::invalid_argument("rates/weights dimension mismatch");
  for (const Rat& r : rates)
    if (r <= 0) throw std::invalid_argument("server rates must be positive");
  for (const Rat& w : weights)
    if (w <= 0) throw std::invalid_argument("user weights must be positive");

  std::vector<bool> is_backlogged(n_users, false);
  for (int i : backlogged) {
    if (i < 0 || i >= n_users) throw std::invalid_argument("backlogged id out of range");
    is_backlogged[i] = true;
  }

  // Zero-rate cluster: idle users together with servers none of whose
  // eligible users are backlogged. Present only when some user is idle.
  Cluster zero;
  zero.rate = Rat(0);
  std::vector<bool> server_removed(n_servers, false);
  for (int i = 0; i < n_users; ++i)
    if (!is_backlogged[i]) zero.users.push_back(i);
  for (int k = 0; k < n_servers; ++k) {
    bool any = false;
    for (int i = 0; i < n_users; ++i) any |= is_backlogged[i] && matrix.eligible(i, k);
    if (!any) {
      zero.servers.push_back(k);
      server_removed[k] = true;
    }
  }

  std::vector<int> remaining_users;
  for (int i = 0; i < n_users; ++i)
    if (is_backlogged[i]) remaining_users.push_back(i);

  std::vector<Cluster> positive;
  while (!remaining_users.empty()) {
    std::vector<int> remaining_servers;
    for (int k = 0; k < n_servers; ++k)
      if (!server_removed[k]) remaining_servers.push_back(k);
    const int ns = static_cast<int>(remaining_servers.size());
    if (ns == 0) throw std::logic_error("backlogged users left with no servers");

    // For each remaining user, its eligibility restricted to the remaining
    // servers, as a bitmask over remaining_servers positions.
    std::vector<uint32_t> user_mask(remaining_users.size(), 0);
    for (size_t ui = 0; ui < remaining_users.size(); ++ui)
      for (int p = 0; p < ns; ++p)
        if (matrix.eligible(remaining_users[ui], remaining_servers[p])) user_mask[ui] |= 1u << p;

    bool found = false;
    Rat best_ratio;
    uint32_t best_union = 0;
    for (uint32_t subset = 1; subset < (1u << ns); ++subset) {
      Rat weight_sum(0);
      bool any_user = false;
      for (size_t ui = 0; ui < remaining_users.size(); ++ui) {
        if ((user_mask[ui] & ~subset) == 0) {
          weight_sum += weights[remaining_users[ui]];
          any_user = true;
        }
      }
      if (!any_user) continue;
      Rat capacity(0);
      for (int p = 0; p < ns; ++p)
        if (subset & (1u << p)) capacity += rates[remaining_servers[p]];
      Rat ratio = capacity / weight_sum;
      if (!found || ratio < best_ratio) {
        found = true;
        best_ratio = ratio;
        best_union = subset;
      } else if (ratio == best_ratio) {
        best_union |= subset;  // merge equal-ratio bottlenecks into one cluster
      }
    }
    if (!found) throw std::logic_error("no bottleneck subset found");

    Cluster c;
    c.rate = best_ratio;
    std::vector<int> still_remaining;
    for (size_t ui = 0; ui < remaining_users.size(); ++ui) {
      if ((user_mask[ui] & ~best_union) == 0)
        c.users.push_back(remaining_users[ui]);
      else
        still_remaining.push_back(remaining_users[ui]);
    }
    for (int p = 0; p < ns; ++p)
      if (best_union & (1u << p)) {
        c.servers.push_back(remaining_servers[p]);
        server_removed[remaining_servers[p]] = true;
      }
    positive.push_back(std::move(c));
    remaining_users = std::move(still_remaining);
  }

  // Servers that never joined a bottleneck have no backlogged eligible users
  // left; they belong with the zero-rate cluster.
  for (int k = 0; k < n_servers; ++k)
    if (!server_removed[k]) zero.servers.push_back(k);

  Foc foc;
  if (!zero.users.empty()) foc.clusters.push_back(std::move(zero));
  std::sort(positive.begin(), positive.end(),
            [](const Cluster& a, const Cluster& b) { return a.rate < b.rate; });
  for (auto& c : positive) foc.clusters.push_back(std::move(c));

  for (auto& c : foc.clusters) {
    std::sort(c.users.begin(), c.users.end());
    std::sort(c.servers.begin(), c.servers.end());
  }
  return foc;
}

std::vector<Rat> fair_rates(const Foc& foc, const std::vector<Rat>& weights) {
  int n_users = 0;
  for (const auto& c : foc.clusters) n_users += static_cast<int>(c.users.size());
  std::vector<Rat> out(n_users, Rat(0));
  for (const auto& c : foc.clusters)
    for (int u : c.users) out[u] = weights[u] * c.rate;
  return out;
}

FairnessReport verify_cm4_fairness(const EligibilityMatrix& matrix, const std::vector<Rat>& rates,
                                   const std::vector<Rat>& weights,
                                   const std::vector<int>& backlogged,
                                   const RateMatrix& candidate) {
  FairnessReport report;
  const int n_users = matrix.n_users();
  const int n_servers = matrix.n_servers();
  if (candidate.n_users != n_users || candidate.n_servers != n_servers) {
    report.invariant_violation = true;
    report.violations.push_back("candidate matrix has wrong dimensions");
    return report;
  }

  std::vector<bool> is_backlogged(n_users, false);
  for (int i : backlogged) is_backlogged[i] = true;

  for (int i = 0; i < n_users; ++i)
    for (int k = 0; k < n_servers; ++k) {
      const Rat& r = candidate.at(i, k);
      if (r < 0) {
        report.invariant_violation = true;
        report.violations.push_back("negative rate at user " + std::to_string(i) + ", server " +
                                    std::to_string(k));
      }
      if (!is_backlogged[i] && r != 0) {
        report.invariant_violation = true;
        report.violations.push_back("idle user " + std::to_string(i) + " has nonzero rate");
      }
      if (!matrix.eligible(i, k) && r != 0) {
        report.invariant_violation = true;
        report.violations.push_back("rate across missing eligibility edge (" + std::to_string(i) +
                                    "," + std::to_string(k) + ")");
      }
    }
  for (int k = 0; k < n_servers; ++k) {
    bool server_backlogged = false;
    for (int i = 0; i < n_users; ++i) server_backlogged |= is_backlogged[i] && matrix.eligible(i, k);
    if (server_backlogged && candidate.server_total(k) != rates[k]) {
      report.invariant_violation = true;
      report.violations.push_back("server " + std::to_string(k) +
                                  " column does not sum to its rate (not work conserving)");
    }
  }
  if (report.invariant_violation) return report;

  std::vector<Rat> normalized(n_users, Rat(0));
  for (int i = 0; i < n_users; ++i) normalized[i] = candidate.user_total(i) / weights[i];

  for (int j = 0; j < n_users; ++j) {
    if (!is_backlogged[j]) continue;
    for (int k = 0; k < n_servers; ++k) {
      if (!matrix.eligible(j, k)) continue;
      for (int i = 0; i < n_users; ++i) {
        if (candidate.at(i, k) > 0 && normalized[j] < normalized[i]) {
          report.violations.push_back(
              "user " + std::to_string(j) + " (normalized " + to_fraction_string(normalized[j]) +
              ") is eligible on server " + std::to_string(k) + " which serves user " +
              std::to_string(i) + " at higher normalized rate " + to_fraction_string(normalized[i]));
        }
      }
    }
  }
  report.ok = report.violations.empty();
  return report;
}

namespace {

// Plain BFS augmenting-path max flow on exact rationals. The graphs here are
// a handful of nodes per cluster, so no need for anything fancier.
class MaxFlow {
 public:
  explicit MaxFlow(int n) : head_(n, -1) {}

  void add_edge(int from, int to, Rat capacity) {
    edges_.push_back({to, head_[from], std::move(capacity)});
    head_[from] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({from, head_[to], Rat(0)});
    head_[to] = static_cast<int>(edges_.size()) - 1;
  }

  Rat run(int source, int sink) {
    Rat total(0);
    while (true) {
      std::vector<int> parent_edge(head_.size(), -1);
      std::vector<bool> seen(head_.size(), false);
      std::queue<int> q;
      q.push(source);
      seen[source] = true;
      while (!q.empty() && !seen[sink]) {
        int u = q.front();
        q.pop();
        for (int e = head_[u]; e != -1; e = edges_[e].next) {
          if (edges_[e].capacity > 0 && !seen[edges_[e].to]) {
            seen[edges_[e].to] = true;
            parent_edge[edges_[e].to] = e;
            q.push(edges_[e].to);
          }
        }
      }
      if (!seen[sink]) break;
      Rat push;
      bool first = true;
      for (int v = sink; v != source;) {
        int e = parent_edge[v];
        if (first || edges_[e].capacity < push) push = edges_[e].capacity;
        first = false;
        v = edges_[e ^ 1].to;
      }
      for (int v = sink; v != source;) {
        int e = parent_edge[v];
        edges_[e].capacity -= push;
        edges_[e ^ 1].capacity += push;
        v = edges_[e ^ 1].to;
      }
      total += push;
    }
    return total;
  }

  // Flow actually sent along a forward edge (by its insertion order).
  Rat flow_on(int edge_index) const { return edges_[2 * edge_index + 1].capacity; }

 private:
  struct Edge {
    int to;
    int next;
    Rat capacity;
  };
  std::vector<int> head_;
  std::vector<Edge> edges_;
};

}  // namespace

RateMatrix witness_allocation(const Foc& foc, const EligibilityMatrix& matrix,
                              const std::vector<Rat>& rates, const std::vector<Rat>& weights) {
  RateMatrix out(matrix.n_users(), matrix.n_servers());
  for (const auto& cluster : foc.clusters) {
    if (cluster.rate == 0) continue;
    const int nu = static_cast<int>(cluster.users.size());
    const int ns = static_cast<int>(cluster.servers.size());
    // source=0, users 1..nu, servers nu+1..nu+ns, sink=nu+ns+1
    MaxFlow flow(nu + ns + 2);
    const int sink = nu + ns + 1;
    struct EdgeRef {
      int user, server, index;
    };
    std::vector<EdgeRef> refs;
    int edge_count = 0;
    Rat demand_total(0);
    for (int ui = 0; ui < nu; ++ui) {
      Rat demand = weights[cluster.users[ui]] * cluster.rate;
      demand_total += demand;
      flow.add_edge(0, 1 + ui, demand);
      ++edge_count;
      for (int sj = 0; sj < ns; ++sj) {
        if (matrix.eligible(cluster.users[ui], cluster.servers[sj])) {
          refs.push_back({cluster.users[ui], cluster.servers[sj], edge_count});
          flow.add_edge(1 + ui, 1 + nu + sj, demand);
          ++edge_count;
        }
      }
    }
    for (int sj = 0; sj < ns; ++sj) {
      flow.add_edge(1 + nu + sj, sink, rates[cluster.servers[sj]]);
      ++edge_count;
    }
    Rat sent = flow.run(0, sink);
    if (sent != demand_total)
      throw std::logic_error("witness flow infeasible inside a cluster (oracle bug)");
    for (const auto& ref : refs) out.at(ref.user, ref.server) = flow.flow_on(ref.index);
  }
  return out;
}

}  // namespace cm4fq
