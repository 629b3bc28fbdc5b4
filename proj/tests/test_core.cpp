#include "cm4fq/core.hpp"

#include <doctest.h>

using namespace cm4fq;

namespace {

// The three-user, two-server topology where a and b reach both servers and c
// only the second.
SystemState two_server_state() {
  SystemState st;
  st.matrix = EligibilityMatrix(3, 2);
  st.matrix.set(0, 0);
  st.matrix.set(0, 1);
  st.matrix.set(1, 0);
  st.matrix.set(1, 1);
  st.matrix.set(2, 1);
  st.users.resize(3);
  st.servers.resize(2);
  st.servers[0].rate = Rat(2500000);
  st.servers[1].rate = Rat(1000000);
  return st;
}

Packet packet_of(int owner, int64_t len) { return Packet{owner, len, Rat(0), 0}; }

}  // namespace

TEST_CASE("matrix coverage validation") {
  EligibilityMatrix m(2, 2);
  m.set(0, 0);
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("row 1"), std::invalid_argument);
  m.set(1, 0);
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("column 1"), std::invalid_argument);
  m.set(1, 1);
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("backlogged set ignores packets in service") {
  SystemState st = two_server_state();
  CHECK(backlogged_set(st).empty());

  st.users[0].queue.push_back(packet_of(0, 1000));
  st.servers[1].in_service = InService{packet_of(1, 1000), Rat(1, 1000)};
  // user b's only packet is in service, queue empty: not backlogged
  CHECK(backlogged_set(st) == std::vector<int>{0});

  st.users[1].queue.push_back(packet_of(1, 500));
  st.users[2].queue.push_back(packet_of(2, 500));
  CHECK(backlogged_set(st) == std::vector<int>{0, 1, 2});
}

TEST_CASE("eligible backlogged set intersects the matrix column") {
  SystemState st = two_server_state();
  st.users[0].queue.push_back(packet_of(0, 1));
  st.users[1].queue.push_back(packet_of(1, 1));
  st.users[2].queue.push_back(packet_of(2, 1));
  CHECK(eligible_backlogged_set(st, 0) == std::vector<int>{0, 1});
  CHECK(eligible_backlogged_set(st, 1) == std::vector<int>{0, 1, 2});
  st.users[0].queue.clear();
  st.users[1].queue.clear();
  st.users[2].queue.clear();
  CHECK(eligible_backlogged_set(st, 0).empty());
  CHECK(eligible_backlogged_set(st, 1).empty());
}

TEST_CASE("respective work level is the max over eligible servers") {
  SystemState st = two_server_state();
  st.servers[0].work_level = WorkLevel(Rat(5));
  st.servers[1].work_level = WorkLevel(Rat(3));
  CHECK(respective_work_level(st, 0) == WorkLevel(Rat(5)));
  CHECK(respective_work_level(st, 2) == WorkLevel(Rat(3)));
  st.servers[0].work_level = WorkLevel::infinity();
  CHECK(respective_work_level(st, 0).is_infinite());
  CHECK(respective_work_level(st, 2) == WorkLevel(Rat(3)));
}
