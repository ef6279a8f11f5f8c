#pragma once

#include "dsr/common.hpp"
#include "dsr/consensus.hpp"
#include "dsr/graphs.hpp"
#include "dsr/iht.hpp"
#include "dsr/metrics.hpp"
#include "dsr/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dsr {

/// max(1, ceil((k + ||x||^2) / 2)).
long consensus_steps(long k, const Vector& x);

enum class LtvSource {
  kGlobal,     // 2 lambda_max(A^T A) / P, computed centrally
  kAggregate,  // sum_p L_p / P
  kMaxConsensus,  // max_p L_p learned by max-consensus over the schedule
};

std::string to_string(LtvSource s);
LtvSource ltv_source_from_string(const std::string& s);

struct CbDihtConfig {
  std::optional<double> l_tv;  // overrides the source below
  LtvSource l_tv_source = LtvSource::kAggregate;
  double l_tv_margin = 1.005;
  int k = 1;
  int max_outer_iters = 1000;
  long max_time_steps = -1;  // negative: unlimited
  double tol = 1e-2;
  bool stop_at_tol = true;   // stop once every agent is within tol
  bool stop_when_settled = false;
  std::optional<long> fixed_consensus_steps;
  std::optional<Vector> reference;  // replaces problem.x_star
  Vector x_init;
  std::vector<double> accuracies;
  bool record_rows = true;
};

struct CbDihtRun {
  IhtTrace agent1_trace;             // x_1^(k); eps_norms holds ||eps^(k)||
  std::vector<Vector> v_hat;         // agent 0's average estimate per outer iteration
  std::vector<long> s_schedule;
  std::vector<long> per_agent_last_iter;
  std::vector<Vector> agent_estimates;  // latest-joined iterate per agent
  bool instance_monotone = true;
  bool copy_coherent = true;
  double l_tv = 0.0;
  Metrics l_tv_metrics;              // traffic spent learning L_TV (max-consensus only)
  Metrics metrics;
  std::vector<MetricsRow> rows;      // one per outer iteration
  std::vector<Crossing> crossings;   // every agent within accuracy
  std::vector<Crossing> agent1_crossings;
  int window = 0;                    // connectivity window of the schedule
  int recurrence = 0;                // edge recurrence bound C
  std::optional<long> settled_at;    // first k of 10 consecutive changes below 1e-10
  long time_steps_used = 0;
  std::vector<std::string> warnings;
};

CbDihtRun run_cbdiht(const Problem& problem, const TvSchedule& schedule, const CbDihtConfig& config);

/// ||P v_hat^(k) - sum_p grad f_p(x_1^(k))||^2 per outer iteration.
std::vector<double> epsilon_series(const Problem& problem, const CbDihtRun& run);

}  // namespace dsr
