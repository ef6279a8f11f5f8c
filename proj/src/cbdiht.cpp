#include "dsr/cbdiht.hpp"

#include <algorithm>
#include <cmath>

namespace dsr {

long consensus_steps(long k, const Vector& x) {
  require(k >= 0, "consensus_steps: k must be non-negative");
  const double raw = std::ceil(0.5 * (static_cast<double>(k) + x.squaredNorm()));
  if (!std::isfinite(raw)) throw NumericFailure("consensus_steps: non-finite iterate norm", k);
  return std::max(1L, static_cast<long>(raw));
}

std::string to_string(LtvSource s) {
  switch (s) {
    case LtvSource::kGlobal:
      return "global";
    case LtvSource::kAggregate:
      return "aggregate";
    case LtvSource::kMaxConsensus:
      return "max";
  }
  return "aggregate";
}

LtvSource ltv_source_from_string(const std::string& s) {
  if (s == "global") return LtvSource::kGlobal;
  if (s == "aggregate") return LtvSource::kAggregate;
  if (s == "max") return LtvSource::kMaxConsensus;
  throw InvalidArgument("unknown L_TV source '" + s + "' (expected global, aggregate, max)");
}

namespace {

double relative_error(const Vector& x, const Vector& ref) {
  const double denom = ref.norm();
  const double diff = (x - ref).norm();
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace

CbDihtRun run_cbdiht(const Problem& problem, const TvSchedule& schedule, const CbDihtConfig& config) {
  const int p = problem.p;
  require(schedule.base.size() == p, "run_cbdiht: schedule size must equal the agent count");
  require(config.k >= 0 && config.k <= problem.n, "run_cbdiht: k must lie in [0, n]");
  require(config.max_outer_iters >= 1, "run_cbdiht: max_outer_iters must be at least 1");
  require(config.l_tv_margin > 0.0, "run_cbdiht: l_tv_margin must be positive");
  if (config.fixed_consensus_steps) require(*config.fixed_consensus_steps >= 1, "run_cbdiht: fixed steps must be >= 1");
  const Vector& ref = config.reference ? *config.reference : problem.x_star;
  require(ref.size() == problem.n, "run_cbdiht: reference has wrong dimension");

  CbDihtRun run;
  run.window = validate_connectivity_window(schedule);
  run.recurrence = edge_recurrence_bound(schedule);

  std::vector<double> l_p;
  for (const auto& s : problem.slices) l_p.push_back(lipschitz_of_slice(s).value);
  double l_sum = 0.0;
  for (double v : l_p) l_sum += v;

  long t = 0;
  if (config.l_tv) {
    run.l_tv = *config.l_tv;
  } else {
    switch (config.l_tv_source) {
      case LtvSource::kGlobal:
        run.l_tv = 2.0 * lambda_max_gram(stacked_matrix(problem)) / p * config.l_tv_margin;
        break;
      case LtvSource::kAggregate:
        run.l_tv = l_sum / p * config.l_tv_margin;
        break;
      case LtvSource::kMaxConsensus: {
        const int diam = schedule.base.diameter();
        const long steps = 2L * schedule.period() * std::max(1, diam);
        auto mc = max_consensus(schedule, l_p, steps, t);
        run.l_tv = mc.values[0] * config.l_tv_margin;
        run.l_tv_metrics = mc.metrics;
        t += steps;
        break;
      }
    }
  }
  require(run.l_tv > 0.0, "run_cbdiht: L_TV must be positive");
  if (run.l_tv * p <= 2.0 * lambda_max_gram(stacked_matrix(problem)))
    run.warnings.push_back("P * L_TV does not exceed L_f; convergence is not guaranteed");

  Vector x1 = config.x_init.size() > 0 ? config.x_init : Vector::Zero(problem.n);
  require(x1.size() == problem.n, "run_cbdiht: x_init has wrong dimension");
  require((x1.array() != 0.0).count() <= config.k, "run_cbdiht: x_init must be k-sparse");

  std::vector<Vector> xs{x1};  // x_1^(k) by k
  run.agent_estimates.assign(p, x1);
  run.per_agent_last_iter.assign(p, -1);

  const auto on_join = [&](int agent, long instance) {
    if (instance <= run.per_agent_last_iter[agent]) run.instance_monotone = false;
    run.per_agent_last_iter[agent] = instance;
    run.agent_estimates[agent] = xs[static_cast<std::size_t>(instance)];
    if (!(run.agent_estimates[agent].array() == xs[instance].array()).all()) run.copy_coherent = false;
    return Vector(loss_gradient(problem.slices[agent], run.agent_estimates[agent]));
  };
  DiffusionEngine engine(schedule, Matrix::Zero(problem.n, p), 2L * config.k, on_join);

  std::vector<double> accuracies = config.accuracies;
  accuracies.push_back(config.tol);
  std::sort(accuracies.begin(), accuracies.end());
  accuracies.erase(std::unique(accuracies.begin(), accuracies.end()), accuracies.end());
  CrossingTracker every(accuracies);
  CrossingTracker first(accuracies);

  std::vector<double> agent_err(static_cast<std::size_t>(p), relative_error(x1, ref));
  const auto every_err = [&]() { return *std::max_element(agent_err.begin(), agent_err.end()); };

  auto& trace = run.agent1_trace;
  trace.iterates.push_back(x1);
  trace.errors_vs_truth.push_back((x1 - ref).norm());
  trace.f_values.push_back(total_loss(problem, x1));
  every.observe(0, every_err(), run.metrics);
  first.observe(0, agent_err[0], run.metrics);
  if (config.record_rows) run.rows.push_back({0, every_err(), run.metrics, 0, 0, -1.0, 0});

  const long t_start = t;
  int still = 0;
  bool stop = config.stop_at_tol && every_err() <= config.tol;
  for (long k = 0; k < config.max_outer_iters && !stop; ++k) {
    const long s = config.fixed_consensus_steps ? *config.fixed_consensus_steps : consensus_steps(k, x1);
    run.s_schedule.push_back(s);

    run.per_agent_last_iter[0] = k;
    run.agent_estimates[0] = x1;
    agent_err[0] = relative_error(x1, ref);
    engine.start_instance(k, loss_gradient(problem.slices[0], x1), t);

    bool out_of_time = false;
    long done_steps = 0;
    for (long i = 0; i < s; ++i) {
      std::vector<long> before = run.per_agent_last_iter;
      run.metrics += engine.step(t);
      ++t;
      for (int a = 1; a < p; ++a)
        if (run.per_agent_last_iter[a] != before[a]) agent_err[a] = relative_error(run.agent_estimates[a], ref);
      every.observe(k, every_err(), run.metrics);
      ++done_steps;
      if (config.max_time_steps >= 0 && t - t_start >= config.max_time_steps) {
        out_of_time = true;
        break;
      }
    }
    if (done_steps < s) break;  // budget ran out mid-instance; no update is applied

    const Vector v_hat = engine.value(0);
    if (!v_hat.allFinite())
      throw NumericFailure("run_cbdiht: non-finite consensus estimate at outer iteration " + std::to_string(k), k);
    const Vector eps = p * v_hat - total_gradient(problem, x1);
    Vector next = hard_threshold(x1 - v_hat / run.l_tv, config.k);
    const double delta_sq = (x1 - next).squaredNorm();

    run.v_hat.push_back(v_hat);
    trace.eps_norms.push_back(eps.norm());
    trace.step_deltas.push_back(delta_sq);
    x1 = std::move(next);
    xs.push_back(x1);
    trace.iterates.push_back(x1);
    trace.errors_vs_truth.push_back((x1 - ref).norm());
    trace.f_values.push_back(total_loss(problem, x1));

    // Agent 0 now holds x_1^(k+1).
    run.agent_estimates[0] = x1;
    agent_err[0] = relative_error(x1, ref);
    every.observe(k + 1, every_err(), run.metrics);
    first.observe(k + 1, agent_err[0], run.metrics);

    int in_instance = 0;
    for (int a = 0; a < p; ++a)
      if (engine.instance(a) == k) ++in_instance;
    if (config.record_rows)
      run.rows.push_back({k + 1, every_err(), run.metrics, k, s, eps.squaredNorm(), in_instance});

    still = std::sqrt(delta_sq) <= 1e-10 ? still + 1 : 0;
    if (still >= 10 && !run.settled_at) run.settled_at = k + 1 - 10;
    if (config.stop_at_tol && every_err() <= config.tol) {
      trace.converged_at = k + 1;
      stop = true;
    }
    if (config.stop_when_settled && run.settled_at) stop = true;
    if (out_of_time) stop = true;
  }
  for (const auto& c : every.crossings())
    if (c.accuracy == config.tol && c.iter && !trace.converged_at) trace.converged_at = c.iter;
  run.time_steps_used = t - t_start;
  run.crossings = every.crossings();
  run.agent1_crossings = first.crossings();
  return run;
}

std::vector<double> epsilon_series(const Problem& problem, const CbDihtRun& run) {
  std::vector<double> out;
  const int p = problem.p;
  for (std::size_t k = 0; k < run.v_hat.size(); ++k) {
    const Vector eps = p * run.v_hat[k] - total_gradient(problem, run.agent1_trace.iterates[k]);
    out.push_back(eps.squaredNorm());
  }
  return out;
}

}  // namespace dsr
