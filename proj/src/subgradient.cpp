#include "dsr/subgradient.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace dsr {

AffineProjector::AffineProjector(const SensingSlice& slice, int agent) : a_(slice.a), b_(slice.b) {
  require(a_.rows() >= 1 && a_.cols() >= 1, "AffineProjector: empty slice");
  const Matrix gram = a_ * a_.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw NumericFailure("affine projection: A_p A_p^T of agent " + std::to_string(agent) +
                         " is rank deficient or ill-conditioned");
  llt_.compute(gram);
  if (llt_.info() != Eigen::Success)
    throw NumericFailure("affine projection: factorization failed for agent " + std::to_string(agent));
}

Vector AffineProjector::project(const Vector& x) const {
  require(x.size() == a_.cols(), "affine_projection: dimension mismatch");
  return x - a_.transpose() * llt_.solve(a_ * x - b_);
}

Vector affine_projection(const SensingSlice& slice, const Vector& x) {
  return AffineProjector(slice).project(x);
}

void validate(const SubgradConfig& config) {
  if (!(config.a > 0.5 && config.a <= 1.0))
    throw InvalidArgument("subgradient: step exponent a must lie in (0.5, 1] so that the steps "
                          "are square-summable but not summable");
  require(config.max_iters >= 1, "subgradient: max_iters must be at least 1");
  require(config.record_stride >= 1, "subgradient: record_stride must be at least 1");
}

namespace {

double relative_error(const Vector& x, const Vector& ref) {
  const double denom = ref.norm();
  const double diff = (x - ref).norm();
  return denom > 0.0 ? diff / denom : diff;
}

struct SlotWeights {
  std::vector<Edge> edges;
  std::vector<double> w;
  std::vector<char> speaks;
};

}  // namespace

SubgradRun run_subgradient(const Problem& problem, const TvSchedule& schedule, const SubgradConfig& config) {
  validate(config);
  const int p = problem.p;
  require(schedule.base.size() == p, "run_subgradient: schedule size must equal the agent count");
  const Vector& ref = config.reference ? *config.reference : problem.x_star;
  require(ref.size() == problem.n, "run_subgradient: reference has wrong dimension");

  std::vector<AffineProjector> proj;
  proj.reserve(p);
  for (int a = 0; a < p; ++a) proj.emplace_back(problem.slices[a], a);

  std::vector<SlotWeights> slots;
  for (const auto& sub : schedule.subgraphs) {
    SlotWeights sw;
    sw.edges = sub;
    sw.speaks.assign(p, 0);
    std::vector<int> deg(static_cast<std::size_t>(p), 0);
    for (const auto& [u, v] : sub) {
      ++deg[u];
      ++deg[v];
      sw.speaks[u] = sw.speaks[v] = 1;
    }
    for (const auto& [u, v] : sub) sw.w.push_back(1.0 / (1.0 + std::max(deg[u], deg[v])));
    slots.push_back(std::move(sw));
  }

  SubgradRun run;
  run.estimates.assign(p, Vector::Zero(problem.n));
  if (config.x_init) {
    require(static_cast<int>(config.x_init->size()) == p, "run_subgradient: one initial vector per agent");
    run.estimates = *config.x_init;
    for (const auto& x : run.estimates) require(x.size() == problem.n, "run_subgradient: x_init dimension");
  }

  std::vector<double> accuracies = config.accuracies;
  accuracies.push_back(config.tol);
  std::sort(accuracies.begin(), accuracies.end());
  accuracies.erase(std::unique(accuracies.begin(), accuracies.end()), accuracies.end());
  CrossingTracker tracker(accuracies);

  const auto every_err = [&]() {
    double worst = 0.0;
    for (const auto& x : run.estimates) worst = std::max(worst, relative_error(x, ref));
    return worst;
  };
  double err = every_err();
  tracker.observe(0, err, run.metrics);
  run.rows.push_back({0, err, run.metrics});
  if (config.stop_at_tol && err <= config.tol) run.converged_at = 0;

  const long long n = problem.n;
  std::vector<Vector> u(static_cast<std::size_t>(p));
  for (long k = 1; k <= config.max_iters && !run.converged_at; ++k) {
    const SlotWeights& sw = slots[static_cast<std::size_t>((k - 1) % schedule.period())];

    double before = 0.0;
    for (const auto& x : run.estimates) before = std::max(before, x.norm());
    for (int a = 0; a < p; ++a) u[a] = run.estimates[a];
    for (std::size_t e = 0; e < sw.edges.size(); ++e) {
      const auto [a, b] = sw.edges[e];
      u[a] += sw.w[e] * (run.estimates[b] - run.estimates[a]);
      u[b] += sw.w[e] * (run.estimates[a] - run.estimates[b]);
    }
    double after = 0.0;
    for (const auto& x : u) after = std::max(after, x.norm());
    if (after > before * (1.0 + 1e-12) + 1e-300) run.averaging_norm_monotone = false;

    const double alpha = 1.0 / std::pow(static_cast<double>(k), config.a);
    for (int a = 0; a < p; ++a) {
      const Vector g = run.estimates[a].array().sign().matrix();
      run.estimates[a] = proj[a].project(u[a] - alpha * g);
      run.max_feasibility_residual = std::max(
          run.max_feasibility_residual, (problem.slices[a].a * run.estimates[a] - problem.slices[a].b).norm());
      if (!run.estimates[a].allFinite())
        throw NumericFailure("run_subgradient: non-finite estimate at agent " + std::to_string(a), k);
    }

    const long long links = static_cast<long long>(sw.edges.size());
    run.metrics.values += 2 * links * n;
    run.metrics.messages += 2 * links;
    run.metrics.broadcasts += n * std::count(sw.speaks.begin(), sw.speaks.end(), 1);
    run.metrics.time_steps += 1;
    run.metrics.serialized_time += links > 0 ? n : 1;
    run.iterations = k;

    err = every_err();
    tracker.observe(k, err, run.metrics);
    const bool hit = config.stop_at_tol && err <= config.tol;
    if (hit) run.converged_at = k;
    if (k % config.record_stride == 0 || hit || k == config.max_iters) run.rows.push_back({k, err, run.metrics});
  }
  run.crossings = tracker.crossings();
  return run;
}

SubgradRun run_subgradient(const Problem& problem, const Graph& graph, const SubgradConfig& config) {
  return run_subgradient(problem, make_static_schedule(graph), config);
}

}  // namespace dsr
