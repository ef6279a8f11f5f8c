#include "dsr/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace dsr {

WeightMatrix metropolis_weights(const std::vector<Edge>& active_links, int p) {
  require(p >= 1, "metropolis_weights: p must be positive");
  std::vector<int> deg(static_cast<std::size_t>(p), 0);
  for (const auto& [u, v] : active_links) {
    require(u >= 0 && v >= 0 && u < p && v < p && u != v, "metropolis_weights: invalid link");
    ++deg[u];
    ++deg[v];
  }
  WeightMatrix out;
  out.w = Matrix::Zero(p, p);
  for (const auto& [u, v] : active_links) {
    const double w = 1.0 / (1.0 + std::max(deg[u], deg[v]));
    out.w(u, v) = w;
    out.w(v, u) = w;
  }
  for (int i = 0; i < p; ++i) out.w(i, i) = 1.0 - (out.w.row(i).sum() - out.w(i, i));
  const int max_deg = *std::max_element(deg.begin(), deg.end());
  out.eta = 1.0 / (1.0 + max_deg);
  return out;
}

double metropolis_eta(const Graph& base) { return 1.0 / (1.0 + base.max_degree()); }

Matrix consensus_step(const Matrix& values, const WeightMatrix& w) {
  require(w.w.rows() == w.w.cols() && w.w.cols() == values.rows(),
          "consensus_step: weight matrix and values disagree on agent count");
  return w.w * values;
}

double BoundConstants::bound(long s, double mass) const {
  if (mass <= 0.0) return 0.0;
  return std::exp(log_big_gamma + static_cast<double>(s) * log_gamma + std::log(mass));
}

BoundConstants bound_constants(double eta, int p, int c) {
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("bound_constants: eta must lie in (0, 1)");
  require(p >= 2, "bound_constants: p must be at least 2");
  require(c >= 1, "bound_constants: c must be at least 1");
  BoundConstants bc;
  bc.d_bar = 2L * (p - 1) * c;
  const double d = static_cast<double>(bc.d_bar);
  const double eta_d = std::pow(eta, d);
  bc.log_gamma = std::log1p(-eta_d) / d;
  bc.gamma = std::exp(bc.log_gamma);
  // log(1 + eta^-d) = -d log(eta) + log1p(eta^d)
  const double log_inv = -d * std::log(eta) + std::log1p(eta_d);
  bc.log_big_gamma = std::log(2.0) + log_inv - std::log1p(-eta_d);
  bc.big_gamma = std::exp(bc.log_big_gamma);
  return bc;
}

DiffusionEngine::DiffusionEngine(const TvSchedule& schedule, Matrix initial, long initiate_values,
                                 JoinFn on_join)
    : schedule_(&schedule),
      values_(std::move(initial)),
      initiate_values_(initiate_values),
      on_join_(std::move(on_join)) {
  const int p = schedule.base.size();
  require(values_.cols() == p, "DiffusionEngine: need one value column per agent");
  instance_.assign(p, -1);
  first_initiated_.assign(p, -1);
  active_.assign(p, std::vector<char>(static_cast<std::size_t>(p), 0));
}

void DiffusionEngine::start_instance(long instance, const Vector& value, long t) {
  require(value.size() == values_.rows(), "start_instance: value dimension mismatch");
  require(instance > instance_[0], "start_instance: instances must increase");
  instance_[0] = instance;
  std::fill(active_[0].begin(), active_[0].end(), 0);
  values_.col(0) = value;
  if (first_initiated_[0] < 0) first_initiated_[0] = t;
}

int DiffusionEngine::initiated_count() const {
  return static_cast<int>(std::count_if(instance_.begin(), instance_.end(), [](long k) { return k >= 0; }));
}

Metrics DiffusionEngine::step(long t) {
  const auto& edges = schedule_->edges_at(t);
  const int p = size();
  const long long n = values_.rows();
  Metrics m;
  m.time_steps = 1;

  // Averaging over usable links, from start-of-step values.
  std::vector<int> deg(static_cast<std::size_t>(p), 0);
  std::vector<Edge> usable;
  for (const auto& [u, v] : edges) {
    if (instance_[u] >= 0 && instance_[u] == instance_[v] && active_[u][v] && active_[v][u]) {
      usable.emplace_back(u, v);
      ++deg[u];
      ++deg[v];
    }
  }
  last_usable_ = static_cast<int>(usable.size());
  if (!usable.empty()) {
    Matrix next = values_;
    for (const auto& [u, v] : usable) {
      const double w = 1.0 / (1.0 + std::max(deg[u], deg[v]));
      next.col(u) += w * (values_.col(v) - values_.col(u));
      next.col(v) += w * (values_.col(u) - values_.col(v));
    }
    values_ = std::move(next);
    m.messages += 2 * static_cast<long long>(usable.size());
    m.values += 2 * n * static_cast<long long>(usable.size());
    for (int a = 0; a < p; ++a)
      if (deg[a] > 0) m.broadcasts += n;
  }

  // INITIATE over present links not yet active, decided from the
  // start-of-step instance tags.
  struct Msg {
    int from;
    int to;
    long instance;
  };
  std::vector<Msg> msgs;
  for (const auto& [u, v] : edges) {
    if (instance_[u] >= 0 && !active_[u][v]) msgs.push_back({u, v, instance_[u]});
    if (instance_[v] >= 0 && !active_[v][u]) msgs.push_back({v, u, instance_[v]});
  }
  std::vector<char> sent(static_cast<std::size_t>(p), 0);
  std::vector<long> best(static_cast<std::size_t>(p), -1);
  for (const auto& msg : msgs) {
    active_[msg.from][msg.to] = 1;
    sent[msg.from] = 1;
    best[msg.to] = std::max(best[msg.to], msg.instance);
  }
  m.messages += static_cast<long long>(msgs.size());
  m.values += initiate_values_ * static_cast<long long>(msgs.size());
  for (int a = 0; a < p; ++a)
    if (sent[a]) m.broadcasts += initiate_values_;

  for (int r = 0; r < p; ++r) {
    if (best[r] < 0 || best[r] < instance_[r]) continue;  // nothing, or only stale messages
    if (best[r] > instance_[r]) {
      instance_[r] = best[r];
      std::fill(active_[r].begin(), active_[r].end(), 0);
      if (on_join_) values_.col(r) = on_join_(r, best[r]);
      if (first_initiated_[r] < 0) first_initiated_[r] = t;
    }
    for (const auto& msg : msgs)
      if (msg.to == r && msg.instance == best[r]) active_[r][msg.from] = 1;
  }

  long long serial = 1;
  if (!usable.empty()) serial = std::max(serial, n);
  if (!msgs.empty()) serial = std::max<long long>(serial, initiate_values_);
  m.serialized_time = serial;
  return m;
}

DiffusionResult run_diffusive_consensus(const TvSchedule& schedule, const Matrix& initial, long steps,
                                        long start_time, long initiate_values, bool record_history) {
  require(steps >= 0, "run_diffusive_consensus: steps must be non-negative");
  require(initial.rows() == schedule.base.size(), "run_diffusive_consensus: need one row per agent");
  DiffusionEngine engine(schedule, initial.transpose(), initiate_values, nullptr);
  engine.start_instance(0, initial.row(0).transpose(), start_time);

  DiffusionResult out;
  for (long s = 0; s < steps; ++s) {
    out.metrics += engine.step(start_time + s);
    if (record_history) out.history.push_back(engine.values().transpose());
  }
  out.values = engine.values().transpose();
  for (int a = 0; a < engine.size(); ++a) {
    const long t0 = engine.first_initiated(a);
    out.initiated_at.push_back(t0 < 0 ? -1 : t0 - start_time);
  }
  return out;
}

void write_activation_csv(const std::vector<long>& initiated_at, std::ostream& os) {
  os << "agent,initiated_at_step\n";
  for (std::size_t a = 0; a < initiated_at.size(); ++a) {
    os << a << ',';
    if (initiated_at[a] >= 0) os << initiated_at[a];
    os << '\n';
  }
}

MaxConsensusResult max_consensus(const TvSchedule& schedule, std::vector<double> values, long steps,
                                 long start_time) {
  require(steps >= 0, "max_consensus: steps must be non-negative");
  require(static_cast<int>(values.size()) == schedule.base.size(), "max_consensus: one value per agent");
  MaxConsensusResult out;
  for (long s = 0; s < steps; ++s) {
    const auto& edges = schedule.edges_at(start_time + s);
    std::vector<double> next = values;
    for (const auto& [u, v] : edges) {
      next[u] = std::max(next[u], values[v]);
      next[v] = std::max(next[v], values[u]);
    }
    values = std::move(next);
    out.metrics.messages += 2 * static_cast<long long>(edges.size());
    out.metrics.values += 2 * static_cast<long long>(edges.size());
    out.metrics.time_steps += 1;
    out.metrics.serialized_time += 1;
    std::vector<char> speaks(values.size(), 0);
    for (const auto& [u, v] : edges) speaks[u] = speaks[v] = 1;
    out.metrics.broadcasts += std::count(speaks.begin(), speaks.end(), 1);
  }
  out.values = std::move(values);
  return out;
}

}  // namespace dsr
