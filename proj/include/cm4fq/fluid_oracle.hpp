#pragma once

#include "cm4fq/core.hpp"

#include <string>
#include <vector>

namespace cm4fq {

/// One cluster of the fairness-oriented clustering: a set of users, the
/// servers that carry their traffic, and the common normalized service rate.
struct Cluster {
  std::vector<int> users;    // sorted user ids
  std::vector<int> servers;  // sorted server ids
  Rat rate;                  // normalized rate, work units/sec per unit weight
};

/// The unique clustering for a given backlogged set, sorted by strictly
/// increasing rate. Clusters partition both the user set and the server set;
/// the zero-rate cluster (idle users plus servers with no backlogged eligible
/// user) is present exactly when some user is idle.
struct Foc {
  std::vector<Cluster> clusters;

  int cluster_of_user(int user) const;
  int cluster_of_server(int server) const;
  const Rat& rate_of_user(int user) const { return clusters[cluster_of_user(user)].rate; }
};

/// A fluid rate allocation r_{i,k} in bits per second.
struct RateMatrix {
  int n_users = 0;
  int n_servers = 0;
  std::vector<Rat> cells;  // user-major

  RateMatrix() = default;
  RateMatrix(int nu, int ns) : n_users(nu), n_servers(ns), cells(nu * ns, Rat(0)) {}
  Rat& at(int user, int server) { return cells[user * n_servers + server]; }
  const Rat& at(int user, int server) const { return cells[user * n_servers + server]; }

  Rat user_total(int user) const {
    Rat sum(0);
    for (int k = 0; k < n_servers; ++k) sum += at(user, k);
    return sum;
  }
  Rat server_total(int server) const {
    Rat sum(0);
    for (int i = 0; i < n_users; ++i) sum += at(i, server);
    return sum;
  }
};

struct FairnessReport {
  bool ok = false;
  // Violations of the rate-allocation-matrix conditions (work conservation,
  // eligibility, idle users) are a distinct failure class from fairness
  // violations proper.
  bool invariant_violation = false;
  std::vector<std::string> violations;
};

/// Computes the fairness-oriented clustering by iterative bottleneck
/// extraction. Subsets of the remaining servers are enumerated; among those
/// whose confined-user set is nonempty the minimum capacity/weight ratio is
/// the next cluster rate, and the union of all minimizing subsets forms the
/// cluster (the union attains the minimum too, which is what keeps rates
/// strictly increasing across clusters).
Foc compute_foc(const EligibilityMatrix& matrix, const std::vector<Rat>& rates,
                const std::vector<Rat>& weights, const std::vector<int>& backlogged);

/// Per-user fair rates implied by a clustering: r_i = weight_i * cluster rate.
std::vector<Rat> fair_rates(const Foc& foc, const std::vector<Rat>& weights);

/// Checks a candidate allocation for constrained max-min fairness: whenever
/// r_{i,k} > 0 and backlogged user j is eligible on server k, j's normalized
/// rate must be at least i's.
FairnessReport verify_cm4_fairness(const EligibilityMatrix& matrix, const std::vector<Rat>& rates,
                                   const std::vector<Rat>& weights,
                                   const std::vector<int>& backlogged,
                                   const RateMatrix& candidate);

/// Builds one concrete allocation realizing the clustering's fair rates,
/// routing each cluster's demand through its own servers by feasibility flow.
RateMatrix witness_allocation(const Foc& foc, const EligibilityMatrix& matrix,
                              const std::vector<Rat>& rates, const std::vector<Rat>& weights);

}  // namespace cm4fq
