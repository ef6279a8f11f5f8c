#include "dsr/diht.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

namespace dsr {

namespace {

class DelaySampler {
 public:
  explicit DelaySampler(const DelayModel& m) : model_(m), rng_(m.seed) {
    require(m.min_delay >= 1 && m.max_delay >= m.min_delay, "DelayModel: need 1 <= min_delay <= max_delay");
  }
  long long draw() {
    if (model_.min_delay == model_.max_delay) return model_.min_delay;
    std::uniform_int_distribution<int> d(model_.min_delay, model_.max_delay);
    return d(rng_);
  }

 private:
  DelayModel model_;
  Rng rng_;
};

struct Event {
  long long time;
  long long seq;
  bool up;   // convergecast message, otherwise broadcast
  int from;
  int to;
  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct RoundResult {
  Vector sum;
  Metrics metrics;
};

// One broadcast/convergecast round. With `down_values` >= 0 the root first
// broadcasts a payload of that many scalars and every agent produces its
// local vector on receipt; otherwise all agents hold their vector at time 0.
RoundResult tree_round(const SpanningTree& tree, DelaySampler& delays, long long down_values,
                       const std::function<Vector(int)>& local, long long n) {
  const int p = tree.size();
  RoundResult out;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  long long seq = 0;
  std::vector<Vector> sigma(static_cast<std::size_t>(p));
  std::vector<Vector> own(static_cast<std::size_t>(p));
  std::vector<std::vector<char>> got(static_cast<std::size_t>(p));
  std::vector<int> waiting(static_cast<std::size_t>(p));
  for (int v = 0; v < p; ++v) {
    waiting[v] = static_cast<int>(tree.children[v].size());
    got[v].assign(tree.children[v].size(), 0);
  }
  std::vector<Vector> from_child(static_cast<std::size_t>(p));
  bool done = false;
  long long done_time = 0;

  const auto try_finish = [&](int v, long long t) {
    if (own[v].size() == 0 || waiting[v] > 0) return;
    Vector acc = own[v];
    for (int c : tree.children[v]) acc += from_child[c];  // ascending child order
    if (v == tree.root) {
      out.sum = std::move(acc);
      done = true;
      done_time = t;
      return;
    }
    from_child[v] = std::move(acc);
    queue.push({t + delays.draw(), seq++, true, v, tree.parent[v]});
    out.metrics.messages += 1;
    out.metrics.values += n;
    out.metrics.broadcasts += n;
  };
  const auto receive_down = [&](int v, long long t) {
    own[v] = local(v);
    if (!tree.children[v].empty()) {
      for (int c : tree.children[v]) {
        queue.push({t + delays.draw(), seq++, false, v, c});
        out.metrics.messages += 1;
        out.metrics.values += down_values;
      }
      out.metrics.broadcasts += down_values;
    }
    try_finish(v, t);
  };

  if (down_values >= 0) {
    receive_down(tree.root, 0);
  } else {
    for (int v = 0; v < p; ++v) own[v] = local(v);
    for (int v = p - 1; v >= 0; --v)
      if (tree.children[v].empty()) try_finish(v, 0);
  }
  while (!queue.empty()) {
    const Event e = queue.top();
    queue.pop();
    if (e.up) {
      --waiting[e.to];
      try_finish(e.to, e.time);
    } else {
      receive_down(e.to, e.time);
    }
  }
  if (!done) throw ProtocolError("tree round did not complete at the root");
  out.metrics.time_steps = done_time;
  return out;
}

double relative_error(const Vector& x, const Vector& ref) {
  const double denom = ref.norm();
  const double diff = (x - ref).norm();
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace

TreeSum convergecast_sum(const SpanningTree& tree, const std::vector<Vector>& per_agent,
                         const DelayModel& delays) {
  require(static_cast<int>(per_agent.size()) == tree.size(), "convergecast_sum: one vector per agent");
  const Eigen::Index n = per_agent.empty() ? 0 : per_agent.front().size();
  for (const auto& v : per_agent) require(v.size() == n, "convergecast_sum: dimension mismatch");
  DelaySampler sampler(delays);
  auto r = tree_round(tree, sampler, -1, [&](int v) { return per_agent[v]; }, n);
  r.metrics.serialized_time = static_cast<long long>(tree.height()) * n;
  return {std::move(r.sum), r.metrics};
}

ScalarSum aggregate_lipschitz(const SpanningTree& tree, const std::vector<double>& per_agent) {
  require(static_cast<int>(per_agent.size()) == tree.size(), "aggregate_lipschitz: one value per agent");
  DelaySampler sampler(DelayModel{});
  auto r = tree_round(tree, sampler, 1, [&](int v) { return Vector::Constant(1, per_agent[v]); }, 1);
  r.metrics.serialized_time = r.metrics.time_steps;
  return {r.sum[0], r.metrics};
}

long long diht_broadcasts_per_iteration(const SpanningTree& tree, int n, int k) {
  long long non_leaf = 0;
  for (int v = 0; v < tree.size(); ++v)
    if (!tree.is_leaf(v)) ++non_leaf;
  return 2LL * k * non_leaf + static_cast<long long>(n) * (tree.size() - 1);
}

DihtRun run_diht(const Problem& problem, const Graph& graph, const DihtConfig& config) {
  require(config.l > 0.0, "run_diht: l must be positive");
  require(config.k >= 0 && config.k <= problem.n, "run_diht: k must lie in [0, n]");
  require(config.max_iters >= 1, "run_diht: max_iters must be at least 1");
  require(graph.size() == problem.p, "run_diht: graph size must equal the agent count");
  const Vector& ref = config.reference ? *config.reference : problem.x_star;
  require(ref.size() == problem.n, "run_diht: reference has wrong dimension");

  DihtRun run;
  run.tree = bfs_spanning_tree(graph, config.root);
  run.metrics.setup_messages = run.tree.construction_messages;

  double l_sum = 0.0;
  for (const auto& s : problem.slices) l_sum += lipschitz_of_slice(s).value;
  if (config.l <= l_sum)
    run.warnings.push_back("l does not exceed the sum of agent Lipschitz constants; convergence is not guaranteed");

  Vector x1 = config.x_init.size() > 0 ? config.x_init : Vector::Zero(problem.n);
  require(x1.size() == problem.n, "run_diht: x_init has wrong dimension");
  require((x1.array() != 0.0).count() <= config.k, "run_diht: x_init must be k-sparse");
  run.agent_estimates.assign(problem.p, x1);

  std::vector<double> accuracies = config.accuracies;
  if (config.stop == StopMode::kRelativeToTruth) accuracies.push_back(config.tol);
  std::sort(accuracies.begin(), accuracies.end());
  accuracies.erase(std::unique(accuracies.begin(), accuracies.end()), accuracies.end());
  CrossingTracker tracker(accuracies);

  const auto record = [&](long iter, const Vector& x) {
    const double rel = relative_error(x, ref);
    if (config.record_iterates) {
      run.trace.iterates.push_back(x);
      run.trace.errors_vs_truth.push_back((x - ref).norm());
      run.trace.f_values.push_back(total_loss(problem, x));
    }
    if (config.record_rows) run.rows.push_back({iter, rel, run.metrics});
    tracker.observe(iter, rel, run.metrics);
    return rel;
  };
  double rel = record(0, x1);
  if (config.stop == StopMode::kRelativeToTruth && rel <= config.tol) run.trace.converged_at = 0;

  DelaySampler sampler(config.delays);
  const long long down_values = 2LL * config.k;
  const long long serial_per_iter = static_cast<long long>(run.tree.height()) * (down_values + problem.n);

  for (int it = 0; it < config.max_iters && !run.trace.converged_at; ++it) {
    const auto local = [&](int v) {
      if (v != run.tree.root) {
        run.agent_estimates[v] = x1;
        if (!(run.agent_estimates[v].array() == x1.array()).all()) run.estimates_coherent = false;
      }
      return loss_gradient(problem.slices[v], run.agent_estimates[v]);
    };
    run.agent_estimates[run.tree.root] = x1;
    RoundResult round = tree_round(run.tree, sampler, down_values, local, problem.n);
    if (!round.sum.allFinite())
      throw NumericFailure("run_diht: non-finite gradient sum at iteration " + std::to_string(it), it);
    round.metrics.serialized_time = serial_per_iter;
    run.metrics += round.metrics;
    run.per_iteration.push_back(round.metrics);
    if (config.record_iterates) run.sums.push_back(round.sum);

    Vector next = iht_step(x1, round.sum, config.l, config.k);
    const double delta_sq = (x1 - next).squaredNorm();
    if (config.record_iterates) run.trace.step_deltas.push_back(delta_sq);
    const bool step_done = std::sqrt(delta_sq) / std::max(1.0, x1.norm()) <= config.tol;
    x1 = std::move(next);
    rel = record(it + 1, x1);
    if (config.stop == StopMode::kRelativeToTruth ? rel <= config.tol : step_done)
      run.trace.converged_at = it + 1;
  }
  run.agent_estimates[run.tree.root] = x1;
  if (!config.record_iterates) {
    run.trace.iterates.push_back(x1);
    run.trace.errors_vs_truth.push_back((x1 - ref).norm());
  }
  run.crossings = tracker.crossings();
  return run;
}

}  // namespace dsr
