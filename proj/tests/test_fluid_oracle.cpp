#include "cm4fq/fluid_oracle.hpp"

#include "support/random_instances.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace cm4fq;
using cm4fq::test::progressive_filling_rates;
using cm4fq::test::random_instance;

namespace {

const Rat kMbps(1000000);

// Users a,b on both servers, c on the second; rates forced by the stated
// fair shares 1.25/1.25/1.0 Mbps.
struct TwoServer {
  EligibilityMatrix matrix{3, 2};
  std::vector<Rat> rates{Rat(2500000), Rat(1000000)};
  std::vector<Rat> weights{Rat(1), Rat(1), Rat(1)};
  TwoServer() {
    matrix.set(0, 0);
    matrix.set(0, 1);
    matrix.set(1, 0);
    matrix.set(1, 1);
    matrix.set(2, 1);
  }
};

// a,b,c on two 1.8 Mbps servers; d alone on a 1.0 Mbps server.
struct ThreeServer {
  EligibilityMatrix matrix{4, 3};
  std::vector<Rat> rates{Rat(1800000), Rat(1800000), Rat(1000000)};
  std::vector<Rat> weights{Rat(1), Rat(1), Rat(1), Rat(1)};
  ThreeServer() {
    for (int i = 0; i < 3; ++i) {
      matrix.set(i, 0);
      matrix.set(i, 1);
    }
    matrix.set(3, 2);
  }
};

// a,b on the fast server only; c on the slow one; d bridges both.
struct BridgedPair {
  EligibilityMatrix matrix{4, 2};
  std::vector<Rat> rates{Rat(2500000), Rat(1000000)};
  std::vector<Rat> weights{Rat(1), Rat(1), Rat(1), Rat(1)};
  BridgedPair() {
    matrix.set(0, 0);
    matrix.set(1, 0);
    matrix.set(2, 1);
    matrix.set(3, 0);
    matrix.set(3, 1);
  }
};

}  // namespace

TEST_CASE("clustering of the two-server system") {
  TwoServer sys;
  Foc foc = compute_foc(sys.matrix, sys.rates, sys.weights, {0, 1, 2});
  REQUIRE(foc.clusters.size() == 2);
  CHECK(foc.clusters[0].users == std::vector<int>{2});
  CHECK(foc.clusters[0].servers == std::vector<int>{1});
  CHECK(foc.clusters[0].rate == kMbps);
  CHECK(foc.clusters[1].users == std::vector<int>{0, 1});
  CHECK(foc.clusters[1].servers == std::vector<int>{0});
  CHECK(foc.clusters[1].rate == Rat(1250000));

  auto r = fair_rates(foc, sys.weights);
  CHECK(r == std::vector<Rat>{Rat(1250000), Rat(1250000), Rat(1000000)});
}

TEST_CASE("clustering of the three-server system") {
  ThreeServer sys;
  Foc foc = compute_foc(sys.matrix, sys.rates, sys.weights, {0, 1, 2, 3});
  REQUIRE(foc.clusters.size() == 2);
  // Ordered by increasing rate: d's cluster first.
  CHECK(foc.clusters[0].users == std::vector<int>{3});
  CHECK(foc.clusters[0].servers == std::vector<int>{2});
  CHECK(foc.clusters[0].rate == kMbps);
  CHECK(foc.clusters[1].users == std::vector<int>{0, 1, 2});
  CHECK(foc.clusters[1].servers == std::vector<int>{0, 1});
  CHECK(foc.clusters[1].rate == Rat(1200000));

  auto r = fair_rates(foc, sys.weights);
  CHECK(r == std::vector<Rat>{Rat(1200000), Rat(1200000), Rat(1200000), Rat(1000000)});
}

TEST_CASE("clustering of the bridged pair with and without the bridge user") {
  BridgedPair sys;

  Foc idle_d = compute_foc(sys.matrix, sys.rates, sys.weights, {0, 1, 2});
  REQUIRE(idle_d.clusters.size() == 3);
  CHECK(idle_d.clusters[0].rate == Rat(0));
  CHECK(idle_d.clusters[0].users == std::vector<int>{3});
  CHECK(idle_d.clusters[0].servers.empty());
  CHECK(idle_d.clusters[1].users == std::vector<int>{2});
  CHECK(idle_d.clusters[1].rate == kMbps);
  CHECK(idle_d.clusters[2].users == std::vector<int>{0, 1});
  CHECK(idle_d.clusters[2].rate == Rat(1250000));

  Foc all = compute_foc(sys.matrix, sys.rates, sys.weights, {0, 1, 2, 3});
  REQUIRE(all.clusters.size() == 1);
  CHECK(all.clusters[0].rate == Rat(875000));
  auto r = fair_rates(all, sys.weights);
  for (const Rat& x : r) CHECK(x == Rat(875000));
}

TEST_CASE("single user single server ratio") {
  EligibilityMatrix m(1, 1);
  m.set(0, 0);
  Foc foc = compute_foc(m, {Rat(7)}, {Rat(2)}, {0});
  REQUIRE(foc.clusters.size() == 1);
  CHECK(foc.clusters[0].rate == Rat(7, 2));
  CHECK(fair_rates(foc, {Rat(2)}) == std::vector<Rat>{Rat(7)});
}

TEST_CASE("fair rates scale with weight") {
  Foc foc;
  foc.clusters.push_back(Cluster{{0}, {0}, Rat(1250000)});
  CHECK(fair_rates(foc, {Rat(2)}) == std::vector<Rat>{Rat(2500000)});
}

TEST_CASE("everyone idle collapses to the zero cluster") {
  TwoServer sys;
  Foc foc = compute_foc(sys.matrix, sys.rates, sys.weights, {});
  REQUIRE(foc.clusters.size() == 1);
  CHECK(foc.clusters[0].rate == Rat(0));
  CHECK(foc.clusters[0].users.size() == 3);
  CHECK(foc.clusters[0].servers.size() == 2);
}

TEST_CASE("fairness verifier on hand-built allocations") {
  TwoServer sys;
  std::vector<int> backlogged{0, 1, 2};

  RateMatrix good(3, 2);
  good.at(0, 0) = Rat(1250000);
  good.at(1, 0) = Rat(1250000);
  good.at(2, 1) = Rat(1000000);
  CHECK(verify_cm4_fairness(sys.matrix, sys.rates, sys.weights, backlogged, good).ok);

  // All of server 2 handed to user a starves eligible user c.
  RateMatrix starving(3, 2);
  starving.at(0, 0) = Rat(1250000);
  starving.at(0, 1) = Rat(1000000);
  starving.at(1, 0) = Rat(1250000);
  auto rep = verify_cm4_fairness(sys.matrix, sys.rates, sys.weights, backlogged, starving);
  CHECK_FALSE(rep.ok);
  CHECK_FALSE(rep.invariant_violation);
  CHECK_FALSE(rep.violations.empty());

  // Violating the allocation-matrix conditions is a distinct failure class.
  RateMatrix lazy(3, 2);
  lazy.at(0, 0) = Rat(1000000);  // server 1 not fully used
  lazy.at(1, 0) = Rat(1250000);
  lazy.at(2, 1) = Rat(1000000);
  auto rep2 = verify_cm4_fairness(sys.matrix, sys.rates, sys.weights, backlogged, lazy);
  CHECK_FALSE(rep2.ok);
  CHECK(rep2.invariant_violation);
}

TEST_CASE("witness allocation realizes the fair rates") {
  TwoServer two;
  Foc foc = compute_foc(two.matrix, two.rates, two.weights, {0, 1, 2});
  RateMatrix w = witness_allocation(foc, two.matrix, two.rates, two.weights);
  CHECK(w.user_total(0) == Rat(1250000));
  CHECK(w.user_total(1) == Rat(1250000));
  CHECK(w.at(2, 1) == Rat(1000000));
  CHECK(w.server_total(0) == two.rates[0]);
  CHECK(w.server_total(1) == two.rates[1]);
  CHECK(verify_cm4_fairness(two.matrix, two.rates, two.weights, {0, 1, 2}, w).ok);

  ThreeServer three;
  Foc foc3 = compute_foc(three.matrix, three.rates, three.weights, {0, 1, 2, 3});
  RateMatrix w3 = witness_allocation(foc3, three.matrix, three.rates, three.weights);
  CHECK(w3.at(3, 2) == Rat(1000000));
  for (int i = 0; i < 3; ++i) CHECK(w3.at(i, 2) == Rat(0));  // last server serves only d

  EligibilityMatrix single(1, 1);
  single.set(0, 0);
  Foc foc1 = compute_foc(single, {Rat(9)}, {Rat(1)}, {0});
  RateMatrix w1 = witness_allocation(foc1, single, {Rat(9)}, {Rat(1)});
  CHECK(w1.at(0, 0) == Rat(9));
}

namespace {

// Canonical form: sorted vector of (rate, users, servers).
std::vector<std::tuple<Rat, std::vector<int>, std::vector<int>>> canonical(const Foc& foc) {
  std::vector<std::tuple<Rat, std::vector<int>, std::vector<int>>> out;
  for (const auto& c : foc.clusters) out.emplace_back(c.rate, c.users, c.servers);
  return out;
}

}  // namespace

TEST_CASE("clustering is invariant under index permutations") {
  std::mt19937_64 rng(20240811);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng);
    Foc base = compute_foc(inst.matrix, inst.rates, inst.weights, inst.backlogged);

    int n = inst.matrix.n_users(), k = inst.matrix.n_servers();
    std::vector<int> uperm(n), sperm(k);
    for (int i = 0; i < n; ++i) uperm[i] = i;
    for (int i = 0; i < k; ++i) sperm[i] = i;
    std::shuffle(uperm.begin(), uperm.end(), rng);
    std::shuffle(sperm.begin(), sperm.end(), rng);

    EligibilityMatrix pm(n, k);
    std::vector<Rat> prates(k), pweights(n);
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < k; ++s) pm.set(uperm[i], sperm[s], inst.matrix.eligible(i, s));
    for (int s = 0; s < k; ++s) prates[sperm[s]] = inst.rates[s];
    for (int i = 0; i < n; ++i) pweights[uperm[i]] = inst.weights[i];
    std::vector<int> pback;
    for (int i : inst.backlogged) pback.push_back(uperm[i]);
    std::sort(pback.begin(), pback.end());

    Foc permuted = compute_foc(pm, prates, pweights, pback);

    // Map the permuted result back and compare canonically.
    Foc mapped;
    for (const auto& c : permuted.clusters) {
      Cluster back;
      back.rate = c.rate;
      for (int u : c.users)
        back.users.push_back(static_cast<int>(std::find(uperm.begin(), uperm.end(), u) -
                                               uperm.begin()));
      for (int s : c.servers)
        back.servers.push_back(static_cast<int>(std::find(sperm.begin(), sperm.end(), s) -
                                                 sperm.begin()));
      std::sort(back.users.begin(), back.users.end());
      std::sort(back.servers.begin(), back.servers.end());
      mapped.clusters.push_back(std::move(back));
    }
    CHECK(canonical(mapped) == canonical(base));
  }
}

TEST_CASE("clustering agrees with progressive filling") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng);
    Foc foc = compute_foc(inst.matrix, inst.rates, inst.weights, inst.backlogged);
    auto via_foc = fair_rates(foc, inst.weights);
    auto via_filling =
        progressive_filling_rates(inst.matrix, inst.rates, inst.weights, inst.backlogged);
    CHECK(via_foc == via_filling);
  }
}

TEST_CASE("structural properties hold on random instances") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng);
    Foc foc = compute_foc(inst.matrix, inst.rates, inst.weights, inst.backlogged);

    // Partition of users and servers.
    std::vector<int> ucount(inst.matrix.n_users(), 0), scount(inst.matrix.n_servers(), 0);
    for (const auto& c : foc.clusters) {
      for (int u : c.users) ++ucount[u];
      for (int s : c.servers) ++scount[s];
    }
    for (int c : ucount) CHECK(c == 1);
    for (int c : scount) CHECK(c == 1);

    // Strictly increasing rates.
    for (size_t m = 1; m < foc.clusters.size(); ++m)
      CHECK(foc.clusters[m - 1].rate < foc.clusters[m].rate);

    // A positive-rate user eligible on another cluster's server outranks it.
    for (size_t m = 0; m < foc.clusters.size(); ++m) {
      if (foc.clusters[m].rate == 0) continue;
      for (int u : foc.clusters[m].users)
        for (size_t l = 0; l < foc.clusters.size(); ++l) {
          if (l == m) continue;
          for (int s : foc.clusters[l].servers)
            if (inst.matrix.eligible(u, s)) CHECK(foc.clusters[m].rate > foc.clusters[l].rate);
        }
    }

    // Conservation: fair rates absorb exactly the positive clusters' capacity.
    Rat total(0);
    for (const Rat& r : fair_rates(foc, inst.weights)) total += r;
    Rat capacity(0);
    for (const auto& c : foc.clusters) {
      if (c.rate == 0) continue;
      for (int s : c.servers) capacity += inst.rates[s];
    }
    CHECK(total == capacity);

    // Verifier closure through the witness allocation.
    RateMatrix w = witness_allocation(foc, inst.matrix, inst.rates, inst.weights);
    CHECK(verify_cm4_fairness(inst.matrix, inst.rates, inst.weights, inst.backlogged, w).ok);
  }
}
