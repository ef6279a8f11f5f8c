#pragma once

#include "dsr/common.hpp"
#include "dsr/graphs.hpp"
#include "dsr/metrics.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace dsr {

struct WeightMatrix {
  Matrix w;          // P x P
  double eta = 1.0;  // smallest positive entry guaranteed by the construction
};

/// w_pq = 1/(1 + max(deg_p, deg_q)) on the given links, degrees taken over
/// those links; the diagonal absorbs the remainder.
WeightMatrix metropolis_weights(const std::vector<Edge>& active_links, int p);

/// 1/(1 + max degree): a lower bound on every Metropolis weight built on any
/// subgraph of `base`.
double metropolis_eta(const Graph& base);

/// Rows are agents: out_p = sum_q w_pq values_q.
Matrix consensus_step(const Matrix& values, const WeightMatrix& w);

struct BoundConstants {
  double gamma = 0.0;
  double big_gamma = 0.0;  // may overflow to +inf for long windows
  long d_bar = 0;
  double log_gamma = 0.0;
  double log_big_gamma = 0.0;

  /// big_gamma * gamma^s * mass, evaluated in log space.
  double bound(long s, double mass) const;
};

BoundConstants bound_constants(double eta, int p, int c);

/// Lockstep simulation of initiation-gated consensus. Every agent carries
/// an instance tag (-1 until first initiated). A link averages only when
/// it is present, both endpoints hold each other as active neighbours and
/// both are in the same instance.
class DiffusionEngine {
 public:
  /// Value an agent adopts when it joins `instance`.
  using JoinFn = std::function<Vector(int agent, long instance)>;

  /// `initial` has one column per agent. `initiate_values` is the payload
  /// size of an INITIATE message.
  DiffusionEngine(const TvSchedule& schedule, Matrix initial, long initiate_values, JoinFn on_join);

  /// Agent 0 abandons its instance and starts `instance` with `value`.
  void start_instance(long instance, const Vector& value, long t);

  /// One time step at global time t: averaging, then INITIATE delivery.
  Metrics step(long t);

  int size() const { return static_cast<int>(instance_.size()); }
  const Matrix& values() const { return values_; }
  Vector value(int agent) const { return values_.col(agent); }
  long instance(int agent) const { return instance_.at(agent); }
  /// Time of the first initiation, or -1.
  long first_initiated(int agent) const { return first_initiated_.at(agent); }
  int initiated_count() const;
  /// Number of usable links in the most recent step.
  int last_usable_links() const { return last_usable_; }

 private:
  const TvSchedule* schedule_;
  Matrix values_;  // N x P
  long initiate_values_;
  JoinFn on_join_;
  std::vector<long> instance_;
  std::vector<long> first_initiated_;
  std::vector<std::vector<char>> active_;  // active_[p][q]
  int last_usable_ = 0;
};

struct DiffusionResult {
  Matrix values;                   // P x N, rows are agents
  std::vector<long> initiated_at;  // step index relative to start, -1 = never
  Metrics metrics;
  std::vector<Matrix> history;     // values after each step when requested
};

/// Algorithm-3 consensus from agent 0 over `steps` steps beginning at
/// schedule time `start_time`. `initial` rows are agents.
DiffusionResult run_diffusive_consensus(const TvSchedule& schedule, const Matrix& initial, long steps,
                                        long start_time = 0, long initiate_values = 0,
                                        bool record_history = false);

/// CSV with columns agent,initiated_at_step (blank when never).
void write_activation_csv(const std::vector<long>& initiated_at, std::ostream& os);

struct MaxConsensusResult {
  std::vector<double> values;
  Metrics metrics;
};

/// Each step every agent takes the max over itself and its neighbours in
/// the current subgraph.
MaxConsensusResult max_consensus(const TvSchedule& schedule, std::vector<double> values, long steps,
                                 long start_time = 0);

}  // namespace dsr
