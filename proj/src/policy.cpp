#include "htlab/policy.hpp"

#include "htlab/error.hpp"
#include "htlab/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace htlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cached structure shared by the greedy allocators.
struct Layout {
  int num_buffers = 0;
  int num_servers = 0;
  int num_activities = 0;
  std::vector<IndexList> by_buffer;  // activities of each buffer, ascending
  std::vector<int> server;           // server of each activity

  explicit Layout(const NetworkTopology& t)
      : num_buffers(t.num_buffers), num_servers(t.num_servers), num_activities(t.num_activities) {
    for (int i = 0; i < t.num_buffers; ++i) by_buffer.push_back(t.activities_of_buffer(i));
    for (int j = 0; j < t.num_activities; ++j) server.push_back(t.server_of(j));
  }
};

void check_ranking(const std::vector<int>& ranking, int num_buffers) {
  std::vector<int> sorted = ranking;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expected(static_cast<std::size_t>(num_buffers));
  std::iota(expected.begin(), expected.end(), 0);
  if (sorted != expected) {
    std::ostringstream os;
    os << "ranking must be a permutation of the " << num_buffers << " buffers";
    fail(ErrorCode::BadRanking, os.str());
  }
}

// Buffers in `order` claim free servers through their activities, one job
// per activity. Servers left unclaimed idle.
template <typename Eligible>
void greedy(const Layout& lay, const std::vector<int>& order, const std::vector<std::int64_t>& queue,
            Eligible eligible, Allocation& out) {
  out.assign(static_cast<std::size_t>(lay.num_activities), 0);
  std::uint64_t busy_small = 0;
  std::vector<std::uint8_t> busy_large;
  const bool small = lay.num_servers <= 64;
  if (!small) busy_large.assign(static_cast<std::size_t>(lay.num_servers), 0);
  auto is_busy = [&](int k) { return small ? ((busy_small >> k) & 1U) != 0 : busy_large[static_cast<std::size_t>(k)] != 0; };
  auto set_busy = [&](int k) {
    if (small) {
      busy_small |= std::uint64_t{1} << k;
    } else {
      busy_large[static_cast<std::size_t>(k)] = 1;
    }
  };
  for (int i : order) {
    std::int64_t left = queue[static_cast<std::size_t>(i)];
    if (left <= 0 || !eligible(i)) continue;
    for (int j : lay.by_buffer[static_cast<std::size_t>(i)]) {
      if (left == 0) break;
      const int k = lay.server[static_cast<std::size_t>(j)];
      if (is_busy(k)) continue;
      out[static_cast<std::size_t>(j)] = 1;
      set_busy(k);
      --left;
    }
  }
}

class StaticPriority final : public Policy {
 public:
  StaticPriority(const NetworkTopology& t, std::vector<int> ranking) : lay_(t), ranking_(std::move(ranking)) {
    check_ranking(ranking_, t.num_buffers);
  }
  std::string name() const override { return "static_priority"; }
  void decide(const History& h, Allocation& out) const override {
    greedy(lay_, ranking_, h.latest().queue, [](int) { return true; }, out);
  }

 private:
  Layout lay_;
  std::vector<int> ranking_;
};

class Threshold final : public Policy {
 public:
  Threshold(const NetworkTopology& t, std::vector<int> ranking, std::vector<std::int64_t> levels)
      : lay_(t), ranking_(std::move(ranking)), levels_(std::move(levels)) {
    check_ranking(ranking_, t.num_buffers);
    if (levels_.empty()) levels_.assign(static_cast<std::size_t>(t.num_buffers), 0);
    if (static_cast<int>(levels_.size()) != t.num_buffers) {
      fail(ErrorCode::InvalidParams, "threshold levels need one entry per buffer");
    }
    for (auto l : levels_) {
      if (l < 0) fail(ErrorCode::InvalidParams, "threshold levels must be >= 0");
    }
  }
  std::string name() const override { return "threshold"; }
  void decide(const History& h, Allocation& out) const override {
    const auto& q = h.latest().queue;
    greedy(lay_, ranking_, q,
           [&](int i) { return q[static_cast<std::size_t>(i)] > levels_[static_cast<std::size_t>(i)]; }, out);
  }

 private:
  Layout lay_;
  std::vector<int> ranking_;
  std::vector<std::int64_t> levels_;
};

class LongestNonemptyFirst final : public Policy {
 public:
  explicit LongestNonemptyFirst(const NetworkTopology& t) : lay_(t) {
    for (int i = 0; i < t.num_buffers; ++i) {
      if (lay_.by_buffer[static_cast<std::size_t>(i)].size() > 1) {
        lay_.by_buffer[static_cast<std::size_t>(i)].resize(1);
      }
    }
  }
  std::string name() const override { return "fifo"; }
  void decide(const History& h, Allocation& out) const override {
    std::vector<int> order(static_cast<std::size_t>(lay_.num_buffers));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return h.nonempty_since(a) < h.nonempty_since(b); });
    greedy(lay_, order, h.latest().queue, [](int) { return true; }, out);
  }

 private:
  Layout lay_;
};

class RandomFeasible final : public Policy {
 public:
  RandomFeasible(const NetworkTopology& t, std::uint64_t seed, double idle_prob)
      : lay_(t), seed_(seed), idle_prob_(idle_prob) {
    if (!(idle_prob >= 0.0 && idle_prob < 1.0)) fail(ErrorCode::InvalidParams, "idle_prob must be in [0, 1)");
  }
  std::string name() const override { return "random_feasible"; }
  void decide(const History& h, Allocation& out) const override {
    const HistoryRecord& rec = h.latest();
    std::uint64_t key = rng::mix64(seed_ ^ 0x5eedULL);
    key = rng::mix64(key ^ std::bit_cast<std::uint64_t>(rec.time));
    key = rng::mix64(key ^ static_cast<std::uint64_t>(h.size()));
    for (auto q : rec.queue) key = rng::mix64(key ^ static_cast<std::uint64_t>(q));
    rng::CounterEngine eng(key);
    std::vector<int> order(static_cast<std::size_t>(lay_.num_buffers));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = order.size(); k > 1; --k) {
      const auto pick = static_cast<std::size_t>(eng() % k);
      std::swap(order[k - 1], order[pick]);
    }
    std::vector<std::uint8_t> idle(order.size(), 0);
    if (idle_prob_ > 0.0) {
      for (auto& flag : idle) flag = rng::open_uniform(eng) < idle_prob_ ? 1 : 0;
    }
    greedy(lay_, order, rec.queue, [&](int i) { return idle[static_cast<std::size_t>(i)] == 0; }, out);
  }

 private:
  Layout lay_;
  std::uint64_t seed_;
  double idle_prob_;
};

}  // namespace

bool operator==(const HistoryRecord& a, const HistoryRecord& b) {
  return a.time == b.time && a.u_residual == b.u_residual && a.v_residual == b.v_residual && a.queue == b.queue &&
         a.prev_allocation == b.prev_allocation;
}

History::History(int num_buffers, int num_activities, bool keep_all)
    : num_buffers_(num_buffers),
      num_activities_(num_activities),
      keep_all_(keep_all),
      nonempty_since_(static_cast<std::size_t>(num_buffers), kInf) {}

void History::push(const HistoryRecord& rec) {
  if (static_cast<int>(rec.queue.size()) != num_buffers_) fail(ErrorCode::DimensionMismatch, "history record size");
  for (int i = 0; i < num_buffers_; ++i) {
    auto& since = nonempty_since_[static_cast<std::size_t>(i)];
    if (rec.queue[static_cast<std::size_t>(i)] > 0) {
      if (since == kInf) since = rec.time;
    } else {
      since = kInf;
    }
  }
  latest_ = rec;
  if (keep_all_) records_.push_back(rec);
  ++count_;
}

bool History::operator==(const History& other) const {
  return count_ == other.count_ && latest_ == other.latest_ && records_ == other.records_ &&
         nonempty_since_ == other.nonempty_since_;
}

std::optional<std::string> allocation_violation(const NetworkTopology& t, const std::vector<std::int64_t>& queue,
                                                const Allocation& a) {
  if (static_cast<int>(a.size()) != t.num_activities) return "allocation has wrong length";
  std::vector<int> per_server(static_cast<std::size_t>(t.num_servers), 0);
  std::vector<std::int64_t> per_buffer(static_cast<std::size_t>(t.num_buffers), 0);
  for (int j = 0; j < t.num_activities; ++j) {
    const auto v = a[static_cast<std::size_t>(j)];
    if (v > 1) return "activity " + std::to_string(j + 1) + " has a non-binary value";
    if (v == 0) continue;
    ++per_server[static_cast<std::size_t>(t.server_of(j))];
    ++per_buffer[static_cast<std::size_t>(t.buffer_of(j))];
  }
  for (int k = 0; k < t.num_servers; ++k) {
    if (per_server[static_cast<std::size_t>(k)] > 1) {
      return "server " + std::to_string(k + 1) + " runs more than one activity";
    }
  }
  for (int i = 0; i < t.num_buffers; ++i) {
    if (per_buffer[static_cast<std::size_t>(i)] > queue[static_cast<std::size_t>(i)]) {
      return "buffer " + std::to_string(i + 1) + " has fewer jobs than active activities";
    }
  }
  return std::nullopt;
}

Allocation Policy::decide(const History& history) const {
  Allocation out;
  decide(history, out);
  return out;
}

std::vector<int> cmu_ranking(const NetworkTopology& t, const Vector& h, const Vector& beta) {
  if (h.size() != t.num_buffers || beta.size() != t.num_activities) {
    fail(ErrorCode::DimensionMismatch, "cmu ranking needs h (I) and beta (J)");
  }
  std::vector<double> index(static_cast<std::size_t>(t.num_buffers), 0.0);
  for (int j = 0; j < t.num_activities; ++j) {
    const int i = t.buffer_of(j);
    index[static_cast<std::size_t>(i)] = std::max(index[static_cast<std::size_t>(i)], h[i] * beta[j]);
  }
  std::vector<int> order(static_cast<std::size_t>(t.num_buffers));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return index[static_cast<std::size_t>(a)] > index[static_cast<std::size_t>(b)];
  });
  return order;
}

std::unique_ptr<Policy> make_static_priority(const NetworkTopology& t, std::vector<int> ranking) {
  return std::make_unique<StaticPriority>(t, std::move(ranking));
}

std::unique_ptr<Policy> make_fifo_within_class_single_activity(const NetworkTopology& t) {
  return std::make_unique<LongestNonemptyFirst>(t);
}

std::unique_ptr<Policy> make_random_feasible(const NetworkTopology& t, std::uint64_t seed, double idle_prob) {
  return std::make_unique<RandomFeasible>(t, seed, idle_prob);
}

std::unique_ptr<Policy> make_threshold(const NetworkTopology& t, std::vector<int> ranking,
                                       std::vector<std::int64_t> levels) {
  return std::make_unique<Threshold>(t, std::move(ranking), std::move(levels));
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const NetworkTopology& t, const Vector& h,
                                    const Vector& beta) {
  if (spec.type == "static_priority") return make_static_priority(t, spec.ranking);
  if (spec.type == "cmu") return make_static_priority(t, cmu_ranking(t, h, beta));
  if (spec.type == "fifo") return make_fifo_within_class_single_activity(t);
  if (spec.type == "random_feasible") return make_random_feasible(t, spec.seed, spec.idle_prob);
  if (spec.type == "threshold") {
    std::vector<int> ranking = spec.ranking.empty() ? cmu_ranking(t, h, beta) : spec.ranking;
    return make_threshold(t, std::move(ranking), spec.levels);
  }
  fail(ErrorCode::InvalidParams, "unknown policy type '" + spec.type + "'");
}

}  // namespace htlab
