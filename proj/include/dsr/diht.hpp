#pragma once

#include "dsr/common.hpp"
#include "dsr/graphs.hpp"
#include "dsr/iht.hpp"
#include "dsr/metrics.hpp"
#include "dsr/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dsr {

/// Per-message link delay. Unit delay unless min_delay < max_delay, in
/// which case delays are drawn uniformly from [min_delay, max_delay].
struct DelayModel {
  int min_delay = 1;
  int max_delay = 1;
  std::uint64_t seed = 0;
};

struct TreeSum {
  Vector sum;
  Metrics metrics;
};

/// Leaf-to-root aggregation of one vector per agent. Child partial sums
/// are added in ascending child order, so the result does not depend on
/// message timing.
TreeSum convergecast_sum(const SpanningTree& tree, const std::vector<Vector>& per_agent,
                         const DelayModel& delays = {});

struct ScalarSum {
  double value = 0.0;
  Metrics metrics;
};

/// Sum of the per-agent Lipschitz constants via one request broadcast and
/// one convergecast.
ScalarSum aggregate_lipschitz(const SpanningTree& tree, const std::vector<double>& per_agent);

struct DihtConfig {
  double l = 1.0;
  int k = 1;
  int max_iters = 200000;
  double tol = 1e-2;
  StopMode stop = StopMode::kRelativeToTruth;
  /// Replaces problem.x_star as the convergence reference when set.
  std::optional<Vector> reference;
  Vector x_init;
  DelayModel delays;
  std::vector<double> accuracies;  // crossings to record; tol is always included
  bool record_iterates = true;
  bool record_rows = true;
  int root = 0;
};

struct DihtRun {
  SpanningTree tree;
  std::vector<Vector> agent_estimates;  // after the final iteration
  std::vector<Vector> sums;             // sum_p z_p per iteration (when recording iterates)
  Metrics metrics;                      // cumulative; setup_messages holds the tree cost
  std::vector<Metrics> per_iteration;
  IhtTrace trace;                       // agent-0 view
  std::vector<MetricsRow> rows;
  std::vector<Crossing> crossings;
  bool estimates_coherent = true;       // every agent copied x_1 bit-exactly each iteration
  std::vector<std::string> warnings;
};

DihtRun run_diht(const Problem& problem, const Graph& graph, const DihtConfig& config);

/// Broadcast count of one iteration under the one-value-per-broadcast model:
/// 2K per non-leaf vertex plus N per non-root vertex.
long long diht_broadcasts_per_iteration(const SpanningTree& tree, int n, int k);

}  // namespace dsr
