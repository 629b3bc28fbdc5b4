#pragma once

// Programmatic scenario construction shared by the engine-level tests.

#include "cm4fq/sim.hpp"

#include <string>
#include <vector>

namespace cm4fq::test {

inline SourceSpec backlogged_fixed(int64_t length) {
  SourceSpec s;
  s.kind = SourceSpec::Kind::BackloggedForever;
  s.length = LengthLaw{LengthLaw::Kind::Fixed, length, 0, 0, {}};
  return s;
}

inline SourceSpec backlogged_uniform(int64_t lo, int64_t hi) {
  SourceSpec s;
  s.kind = SourceSpec::Kind::BackloggedForever;
  s.length = LengthLaw{LengthLaw::Kind::Uniform, 0, lo, hi, {}};
  return s;
}

inline SourceSpec backlogged_cycle(std::vector<int64_t> lengths) {
  SourceSpec s;
  s.kind = SourceSpec::Kind::BackloggedForever;
  s.length = LengthLaw{LengthLaw::Kind::Cycle, 0, 0, 0, std::move(lengths)};
  return s;
}

inline SourceSpec onoff_fixed(int64_t length, const Rat& from,
                              std::optional<Rat> until = std::nullopt) {
  SourceSpec s;
  s.kind = SourceSpec::Kind::OnOff;
  s.length = LengthLaw{LengthLaw::Kind::Fixed, length, 0, 0, {}};
  s.intervals.emplace_back(from, until);
  return s;
}

inline SourceSpec burst(const Rat& at, int64_t length, int count) {
  SourceSpec s;
  s.kind = SourceSpec::Kind::Deterministic;
  for (int i = 0; i < count; ++i) s.packets.emplace_back(at, length);
  return s;
}

struct ScenarioBuilder {
  Scenario sc;

  ScenarioBuilder(std::vector<Rat> server_rates, int n_users) {
    sc.server_rates = std::move(server_rates);
    sc.matrix = EligibilityMatrix(n_users, static_cast<int>(sc.server_rates.size()));
    sc.users.resize(n_users);
    for (int i = 0; i < n_users; ++i) sc.users[i].name = std::string(1, static_cast<char>('a' + i));
    sc.max_length = 1000;
    sc.horizon = Rat(1);
    sc.name = "test";
  }

  ScenarioBuilder& eligible(int user, std::initializer_list<int> servers) {
    for (int k : servers) sc.matrix.set(user, k);
    return *this;
  }
  ScenarioBuilder& all_eligible() {
    for (int i = 0; i < sc.n_users(); ++i)
      for (int k = 0; k < sc.n_servers(); ++k) sc.matrix.set(i, k);
    return *this;
  }
  ScenarioBuilder& source(int user, SourceSpec s) {
    sc.users[user].sources.push_back(std::move(s));
    return *this;
  }
  ScenarioBuilder& weight(int user, Rat w) {
    sc.users[user].weight = std::move(w);
    return *this;
  }
  ScenarioBuilder& variant(Variant v) {
    sc.variant = v;
    return *this;
  }
  ScenarioBuilder& delta(Rat d) {
    sc.delta = std::move(d);
    return *this;
  }
  ScenarioBuilder& horizon(Rat h) {
    sc.horizon = std::move(h);
    return *this;
  }
  ScenarioBuilder& max_length(int64_t l) {
    sc.max_length = l;
    return *this;
  }
  ScenarioBuilder& seed(uint64_t s) {
    sc.seed = s;
    return *this;
  }
  Scenario build() const { return sc; }
};

}  // namespace cm4fq::test
