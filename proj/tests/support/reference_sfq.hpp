#pragma once

// Independent single-server start-time fair queue used as the dispatch-order
// oracle for the one-server reduction. Packets are tagged at enqueue time:
// start = max(flow's previous finish, virtual time), where the virtual time
// is the minimum start tag among packets queued just before the arrival
// batch (zero after a full drain). Service order is (start tag, flow index).

#include "cm4fq/rational.hpp"

#include <cstdint>
#include <deque>
#include <tuple>
#include <vector>

namespace cm4fq::test {

class ReferenceSfq {
 public:
  explicit ReferenceSfq(std::vector<Rat> weights, Rat server_rate)
      : weights_(std::move(weights)), rate_(std::move(server_rate)) {
    queues_.resize(weights_.size());
    last_finish_.assign(weights_.size(), Rat(0));
  }

  struct Served {
    Rat time;
    int user;
    int64_t length;
  };

  // Runs the server over a fixed arrival list and returns the dispatch order.
  std::vector<Served> run(const std::vector<std::tuple<Rat, int, int64_t>>& arrivals,
                          const Rat& horizon) {
    std::vector<Served> out;
    size_t next = 0;
    Rat now(0);
    Rat busy_until(0);
    bool busy = false;
    while (true) {
      // Admit all arrivals up to the current time, batch by timestamp so
      // same-instant arrivals are tagged against the pre-batch virtual time.
      while (next < arrivals.size() && std::get<0>(arrivals[next]) <= now) {
        Rat batch_time = std::get<0>(arrivals[next]);
        Rat v = virtual_time();
        while (next < arrivals.size() && std::get<0>(arrivals[next]) == batch_time) {
          enqueue(std::get<1>(arrivals[next]), std::get<2>(arrivals[next]), v);
          ++next;
        }
      }
      if (busy && now < busy_until) {
        now = busy_until;
        continue;
      }
      busy = false;
      int chosen = -1;
      for (size_t i = 0; i < queues_.size(); ++i) {
        if (queues_[i].empty()) continue;
        if (chosen < 0 || queues_[i].front().start < queues_[chosen].front().start)
          chosen = static_cast<int>(i);
      }
      if (chosen < 0) {
        if (next >= arrivals.size()) break;
        now = std::get<0>(arrivals[next]);
        continue;
      }
      if (now >= horizon) break;
      TaggedPacket p = queues_[chosen].front();
      queues_[chosen].pop_front();
      out.push_back(Served{now, chosen, p.length});
      busy = true;
      busy_until = now + Rat(p.length) / rate_;
      now = busy_until;
    }
    return out;
  }

 private:
  struct TaggedPacket {
    Rat start, finish;
    int64_t length;
  };

  Rat virtual_time() const {
    Rat v(0);
    bool any = false;
    for (const auto& q : queues_)
      for (const auto& p : q)
        if (!any || p.start < v) {
          v = p.start;
          any = true;
        }
    return v;  // zero when nothing is queued: a drained system restarts
  }

  void enqueue(int user, int64_t length, const Rat& batch_v) {
    Rat start;
    if (!queues_[user].empty()) {
      start = queues_[user].back().finish;
    } else {
      start = last_finish_[user];
      if (start < batch_v) start = batch_v;
    }
    Rat finish = start + Rat(length) / weights_[user];
    queues_[user].push_back(TaggedPacket{start, finish, length});
    last_finish_[user] = finish;
  }

  std::vector<Rat> weights_;
  Rat rate_;
  std::vector<std::deque<TaggedPacket>> queues_;
  std::vector<Rat> last_finish_;
};

}  // namespace cm4fq::test
