#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

namespace dsr {

/// Communication counters. A "value" is one transmitted scalar (indices of
/// sparse pairs included); a "message" is one transmission over one link.
struct Metrics {
  long long values = 0;
  long long messages = 0;
  long long broadcasts = 0;
  long long time_steps = 0;
  /// Time when every link carries one scalar per step (no pipelining).
  long long serialized_time = 0;
  /// One-off setup traffic (spanning-tree construction), not in `messages`.
  long long setup_messages = 0;

  Metrics& operator+=(const Metrics& o);
  friend Metrics operator+(Metrics a, const Metrics& b) { return a += b; }
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// One CSV row. For CB-DIHT a row is one consensus step; `outer_iter` and
/// the other optional fields are filled only there.
struct MetricsRow {
  long iter = 0;
  double err = 0.0;  // max over agents of ||x_p - x*|| / ||x*||
  Metrics cum;
  long outer_iter = -1;
  long s_k = -1;
  double eps_norm_sq = -1.0;
  int initiated_count = -1;
};

/// First point at which `err` fell to `accuracy`.
struct Crossing {
  double accuracy = 0.0;
  std::optional<long> iter;
  Metrics at;
};

class CrossingTracker {
 public:
  explicit CrossingTracker(std::vector<double> accuracies);
  void observe(long iter, double err, const Metrics& cum);
  bool all_reached() const;
  const std::vector<Crossing>& crossings() const { return crossings_; }

 private:
  std::vector<Crossing> crossings_;
};

/// Columns iter,err,values_cum,messages_cum,broadcasts_cum,time_steps_cum;
/// `extended` appends outer_iter,s_k,eps_norm_sq,initiated_count.
void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& os, bool extended = false);

}  // namespace dsr
