#pragma once

#include "htlab/network.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace htlab {

/// Activity on/off vector, one entry per activity.
using Allocation = std::vector<std::uint8_t>;

/// State observed at one event epoch.
struct HistoryRecord {
  double time = 0.0;
  std::vector<double> u_residual;  // per buffer; +inf where there are no arrivals
  std::vector<double> v_residual;  // per activity
  std::vector<std::int64_t> queue;  // per buffer
  Allocation prev_allocation;       // allocation in force just before this epoch
};

/// Event history seen by a policy. Either every record is retained or only
/// the latest one; derived per-buffer summaries are maintained in both modes.
class History {
 public:
  History(int num_buffers, int num_activities, bool keep_all);

  /// Appends a record (copied).
  void push(const HistoryRecord& rec);

  const HistoryRecord& latest() const { return latest_; }
  /// Number of epochs observed so far (ell + 1).
  std::size_t size() const { return count_; }
  bool keeps_all() const { return keep_all_; }
  /// All records, oldest first. Empty unless constructed with keep_all.
  const std::vector<HistoryRecord>& records() const { return records_; }
  /// Time since which buffer i has been continuously nonempty (+inf if empty now).
  double nonempty_since(int i) const { return nonempty_since_[static_cast<std::size_t>(i)]; }

  int num_buffers() const { return num_buffers_; }
  int num_activities() const { return num_activities_; }

  bool operator==(const History& other) const;

 private:
  int num_buffers_;
  int num_activities_;
  bool keep_all_;
  std::size_t count_ = 0;
  HistoryRecord latest_;
  std::vector<HistoryRecord> records_;
  std::vector<double> nonempty_since_;
};

bool operator==(const HistoryRecord& a, const HistoryRecord& b);

/// Returns a description of the first violated constraint, if any:
/// per-server capacity and per-buffer job availability.
std::optional<std::string> allocation_violation(const NetworkTopology& t, const std::vector<std::int64_t>& queue,
                                                const Allocation& a);

/// Scheduling rule: a deterministic function of the event history.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Writes the allocation for the current epoch into `out` (size J).
  virtual void decide(const History& history, Allocation& out) const = 0;
  /// True if the rule reads more than the latest record.
  virtual bool needs_full_history() const { return false; }

  Allocation decide(const History& history) const;
};

/// Configuration-level description of a built-in policy. Buffer indices are
/// 0-based here.
struct PolicySpec {
  std::string type = "static_priority";  // static_priority | cmu | fifo | random_feasible | threshold
  std::vector<int> ranking;              // buffers, highest priority first
  std::vector<std::int64_t> levels;      // threshold: buffer i eligible only when Q_i > levels[i]
  std::uint64_t seed = 0;                // random_feasible
  double idle_prob = 0.0;                // random_feasible
};

/// Buffers ordered by max_j h_i beta_j over activities serving i, descending;
/// ties go to the lower index.
std::vector<int> cmu_ranking(const NetworkTopology& t, const Vector& h, const Vector& beta);

/// Preemptive static priority: buffers in ranking order claim free servers.
std::unique_ptr<Policy> make_static_priority(const NetworkTopology& t, std::vector<int> ranking);
/// Each buffer uses its lowest-index activity; a server serves the buffer
/// that has been continuously nonempty the longest.
std::unique_ptr<Policy> make_fifo_within_class_single_activity(const NetworkTopology& t);
/// Random priority order (and optional idling) seeded by a hash of the
/// latest history record, so it remains a function of the history.
std::unique_ptr<Policy> make_random_feasible(const NetworkTopology& t, std::uint64_t seed, double idle_prob = 0.0);
/// Static priority in which buffer i may be served only when Q_i > levels[i].
std::unique_ptr<Policy> make_threshold(const NetworkTopology& t, std::vector<int> ranking,
                                       std::vector<std::int64_t> levels);

/// Builds a policy from its spec. `h` and `beta` are used by the cmu type.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const NetworkTopology& t, const Vector& h,
                                    const Vector& beta);

}  // namespace htlab
