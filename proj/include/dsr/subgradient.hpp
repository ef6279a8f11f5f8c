#pragma once

#include "dsr/common.hpp"
#include "dsr/graphs.hpp"
#include "dsr/metrics.hpp"
#include "dsr/model.hpp"

#include <Eigen/Cholesky>

#include <optional>
#include <vector>

namespace dsr {

/// Projection onto {x : A_p x = b_p}. The factorization of A_p A_p^T is
/// computed once.
class AffineProjector {
 public:
  /// Throws NumericFailure naming `agent` when A_p A_p^T is ill-conditioned.
  AffineProjector(const SensingSlice& slice, int agent = 0);
  Vector project(const Vector& x) const;

 private:
  Matrix a_;
  Vector b_;
  Eigen::LLT<Matrix> llt_;
};

/// x - A^T (A A^T)^{-1} (A x - b), factorizing on every call.
Vector affine_projection(const SensingSlice& slice, const Vector& x);

struct SubgradConfig {
  double a = 0.7;  // step size 1 / k^a with k counted from 1
  long max_iters = 200000;
  double tol = 1e-2;
  bool stop_at_tol = true;
  std::optional<Vector> reference;
  std::vector<double> accuracies;
  long record_stride = 1;  // rows kept every this many iterations (plus the last)
  std::optional<std::vector<Vector>> x_init;  // per agent; default zero
};

/// Rejects a outside (0.5, 1].
void validate(const SubgradConfig& config);

struct SubgradRun {
  std::vector<Vector> estimates;  // per agent, final
  Metrics metrics;
  std::vector<MetricsRow> rows;
  std::vector<Crossing> crossings;
  std::optional<long> converged_at;
  long iterations = 0;
  double max_feasibility_residual = 0.0;  // max_p,k ||A_p x_p - b_p|| after projection
  bool averaging_norm_monotone = true;    // max_p ||x_p|| never grew under an averaging step
};

SubgradRun run_subgradient(const Problem& problem, const TvSchedule& schedule, const SubgradConfig& config);
SubgradRun run_subgradient(const Problem& problem, const Graph& graph, const SubgradConfig& config);

}  // namespace dsr
