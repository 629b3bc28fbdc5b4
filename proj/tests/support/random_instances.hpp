#pragma once

// Test-side helpers: random system instances and an independent progressive
// filling oracle for max-min fair rates. Kept out of the library on purpose
// so the cross-checks do not share code with the implementation they verify.

#include "cm4fq/core.hpp"
#include "cm4fq/rational.hpp"

#include <optional>
#include <random>
#include <vector>

namespace cm4fq::test {

struct RandomInstance {
  EligibilityMatrix matrix;
  std::vector<Rat> rates;
  std::vector<Rat> weights;
  std::vector<int> backlogged;
};

inline RandomInstance random_instance(std::mt19937_64& rng, int max_users = 6,
                                      int max_servers = 4) {
  RandomInstance inst;
  int n = 1 + static_cast<int>(rng() % max_users);
  int k = 1 + static_cast<int>(rng() % max_servers);
  while (true) {
    inst.matrix = EligibilityMatrix(n, k);
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < k; ++s) inst.matrix.set(i, s, rng() % 2 == 0);
    try {
      inst.matrix.validate();
      break;
    } catch (const std::invalid_argument&) {
    }
  }
  inst.rates.clear();
  inst.weights.clear();
  for (int s = 0; s < k; ++s) inst.rates.emplace_back(1 + rng() % 40, 1 + rng() % 4);
  for (int i = 0; i < n; ++i) inst.weights.emplace_back(1 + rng() % 8, 1 + rng() % 3);
  inst.backlogged.clear();
  for (int i = 0; i < n; ++i)
    if (rng() % 10 < 7) inst.backlogged.push_back(i);
  return inst;
}

// Water-filling by global constraint scan: raise the common normalized rate
// of all unfrozen users until some server subset saturates (its capacity met
// by the demand of users confined to it), freeze those users, repeat.
inline std::vector<Rat> progressive_filling_rates(const EligibilityMatrix& matrix,
                                                  const std::vector<Rat>& rates,
                                                  const std::vector<Rat>& weights,
                                                  const std::vector<int>& backlogged) {
  const int n = matrix.n_users();
  const int k = matrix.n_servers();
  std::vector<Rat> out(n, Rat(0));
  std::vector<bool> is_backlogged(n, false);
  for (int i : backlogged) is_backlogged[i] = true;

  std::vector<uint32_t> elig(n, 0);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < k; ++s)
      if (matrix.eligible(i, s)) elig[i] |= 1u << s;

  std::vector<bool> frozen(n, false);
  for (int i = 0; i < n; ++i)
    if (!is_backlogged[i]) frozen[i] = true;

  while (true) {
    bool any_unfrozen = false;
    for (int i = 0; i < n; ++i) any_unfrozen |= !frozen[i];
    if (!any_unfrozen) break;

    std::optional<Rat> lambda;
    for (uint32_t subset = 1; subset < (1u << k); ++subset) {
      Rat cap(0);
      for (int s = 0; s < k; ++s)
        if (subset & (1u << s)) cap += rates[s];
      Rat fixed(0), rising(0);
      for (int i = 0; i < n; ++i) {
        if ((elig[i] & ~subset) != 0) continue;  // can route outside the subset
        if (frozen[i])
          fixed += out[i];
        else
          rising += weights[i];
      }
      if (rising == 0) continue;
      Rat level = (cap - fixed) / rising;
      if (!lambda || level < *lambda) lambda = level;
    }
    if (!lambda) throw std::logic_error("progressive filling found no binding subset");

    // Freeze users confined to the union of all tight subsets.
    uint32_t tight_union = 0;
    for (uint32_t subset = 1; subset < (1u << k); ++subset) {
      Rat cap(0);
      for (int s = 0; s < k; ++s)
        if (subset & (1u << s)) cap += rates[s];
      Rat fixed(0), rising(0);
      for (int i = 0; i < n; ++i) {
        if ((elig[i] & ~subset) != 0) continue;
        if (frozen[i])
          fixed += out[i];
        else
          rising += weights[i];
      }
      if (rising == 0) continue;
      if (fixed + *lambda * rising == cap) tight_union |= subset;
    }
    bool froze_any = false;
    for (int i = 0; i < n; ++i) {
      if (frozen[i] || (elig[i] & ~tight_union) != 0) continue;
      out[i] = weights[i] * *lambda;
      frozen[i] = true;
      froze_any = true;
    }
    if (!froze_any) throw std::logic_error("progressive filling stalled");
  }
  return out;
}

}  // namespace cm4fq::test
