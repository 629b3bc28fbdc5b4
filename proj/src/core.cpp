#include "cm4fq/core.hpp"

#include <stdexcept>

namespace cm4fq {

void EligibilityMatrix::validate() const {
  if (n_users_ <= 0 || n_servers_ <= 0)
    throw std::invalid_argument("eligibility matrix must have at least one user and one server");
  for (int i = 0; i < n_users_; ++i) {
    bool any = false;
    for (int k = 0; k < n_servers_; ++k) any |= eligible(i, k);
    if (!any)
      throw std::invalid_argument("eligibility row " + std::to_string(i) +
                                  " is all zero: user has no server");
  }
  for (int k = 0; k < n_servers_; ++k) {
    bool any = false;
    for (int i = 0; i < n_users_; ++i) any |= eligible(i, k);
    if (!any)
      throw std::invalid_argument("eligibility column " + std::to_string(k) +
                                  " is all zero: server has no user");
  }
}

std::vector<int> backlogged_set(const SystemState& state) {
  std::vector<int> out;
  for (int i = 0; i < state.n_users(); ++i)
    if (state.backlogged(i)) out.push_back(i);
  return out;
}

std::vector<int> eligible_backlogged_set(const SystemState& state, int server) {
  std::vector<int> out;
  for (int i = 0; i < state.n_users(); ++i)
    if (state.backlogged(i) && state.matrix.eligible(i, server)) out.push_back(i);
  return out;
}

WorkLevel respective_work_level(const SystemState& state, int user) {
  WorkLevel best;
  bool any = false;
  for (int k = 0; k < state.n_servers(); ++k) {
    if (!state.matrix.eligible(user, k)) continue;
    const WorkLevel& v = state.servers[k].work_level;
    if (!any || best < v) best = v;
    any = true;
  }
  if (!any) throw std::logic_error("user has no eligible server");
  return best;
}

}  // namespace cm4fq
