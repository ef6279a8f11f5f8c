#include "dsr/experiment.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace dsr {

namespace {

constexpr std::size_t kMaxRowsPerRun = 2000;

std::vector<double> sorted_accuracies(std::vector<double> acc) {
  std::sort(acc.begin(), acc.end(), std::greater<>());
  acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
  return acc;
}

// Keeps every stride-th row plus the last one.
std::vector<MetricsRow> thin_rows(std::vector<MetricsRow> rows) {
  if (rows.size() <= kMaxRowsPerRun) return rows;
  const std::size_t stride = (rows.size() + kMaxRowsPerRun - 1) / kMaxRowsPerRun;
  std::vector<MetricsRow> out;
  for (std::size_t i = 0; i < rows.size(); i += stride) out.push_back(rows[i]);
  if ((rows.size() - 1) % stride != 0) out.push_back(rows.back());
  return out;
}

// Crossings restricted to the configured accuracies (runs may track extra
// internal targets).
std::vector<Crossing> pick(const std::vector<Crossing>& all, const std::vector<double>& accuracies) {
  std::vector<Crossing> out;
  for (double a : accuracies) {
    Crossing c{a, std::nullopt, {}};
    for (const auto& x : all)
      if (x.accuracy == a) c = x;
    out.push_back(c);
  }
  return out;
}

double relative_error(const Vector& x, const Vector& ref) {
  const double denom = ref.norm();
  const double diff = (x - ref).norm();
  return denom > 0.0 ? diff / denom : diff;
}

void run_cell(RunRecord& r, const ExperimentConfig& c, const Problem& prob, const Graph& g,
              const TvSchedule& sched) {
  const auto acc = sorted_accuracies(c.accuracies);
  const double tol = acc.back();
  switch (r.algorithm) {
    case Algorithm::kIht: {
      const double l = c.iht_l ? *c.iht_l : 1.005 * loss_info(prob).lipschitz_global;
      IhtConfig ic;
      ic.l = l;
      ic.k = prob.k;
      ic.max_iters = c.max_iters;
      ic.tol = tol;
      const auto trace = run_iht(make_objective(prob), prob.x_star, ic);
      CrossingTracker tracker(acc);
      for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
        const double err = relative_error(trace.iterates[i], prob.x_star);
        tracker.observe(static_cast<long>(i), err, {});
        r.rows.push_back({static_cast<long>(i), err, {}});
      }
      r.crossings = tracker.crossings();
      r.iterations = static_cast<long>(trace.iterates.size()) - 1;
      r.step_constant = l;
      break;
    }
    case Algorithm::kDiht: {
      DihtConfig dc;
      dc.l = c.diht_l ? *c.diht_l : 1.005 * loss_info(prob).lipschitz_global;
      dc.k = prob.k;
      dc.max_iters = c.max_iters;
      dc.tol = tol;
      dc.accuracies = acc;
      dc.delays = DelayModel{c.delay_min, c.delay_max, r.graph_seed};
      dc.record_iterates = false;
      const auto run = run_diht(prob, g, dc);
      r.rows = run.rows;
      r.crossings = pick(run.crossings, acc);
      r.total = run.metrics;
      r.iterations = static_cast<long>(run.per_iteration.size());
      r.step_constant = dc.l;
      break;
    }
    case Algorithm::kCbDiht: {
      CbDihtConfig cc;
      cc.l_tv = c.l_tv;
      cc.l_tv_source = c.l_tv_source;
      cc.k = prob.k;
      cc.max_outer_iters = c.cbdiht_max_outer_iters;
      cc.max_time_steps = c.max_time_steps;
      cc.tol = tol;
      cc.accuracies = acc;
      const auto run = run_cbdiht(prob, sched, cc);
      r.rows = run.rows;
      r.extended_rows = true;
      r.crossings = pick(run.crossings, acc);
      r.total = run.metrics + run.l_tv_metrics;
      r.iterations = static_cast<long>(run.s_schedule.size());
      r.step_constant = run.l_tv;
      break;
    }
    case Algorithm::kSubgrad: {
      SubgradConfig sc;
      sc.a = c.subgrad_a;
      sc.max_iters = c.max_iters;
      sc.tol = tol;
      sc.accuracies = acc;
      sc.record_stride = c.subgrad_record_stride;
      const auto run = run_subgradient(prob, sched, sc);
      r.rows = run.rows;
      r.crossings = pick(run.crossings, acc);
      r.total = run.metrics;
      r.iterations = run.iterations;
      r.step_constant = sc.a;
      break;
    }
  }
  r.rows = thin_rows(std::move(r.rows));
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  return s;
}

}  // namespace

Report run_experiment(const ExperimentConfig& c) {
  Report rep;
  rep.config = c;
  rep.config_hash = config_hash(c);
  const auto acc = sorted_accuracies(c.accuracies);

  for (std::uint64_t pseed : c.problem_seeds) {
    ProblemSpec spec = c.problem;
    spec.seed = pseed;
    std::optional<Problem> prob;
    std::string prob_error;
    try {
      prob = generate_problem(spec);
    } catch (const std::exception& e) {
      prob_error = e.what();
    }
    for (GraphFamily fam : c.families) {
      for (int inst = 0; inst < c.graph_instances; ++inst) {
        const std::uint64_t gseed = c.graph_seed + static_cast<std::uint64_t>(inst);
        const std::uint64_t sseed = c.schedule_seed + static_cast<std::uint64_t>(inst);
        std::optional<Graph> graph;
        std::optional<TvSchedule> sched;
        std::string setup_error = prob_error;
        if (setup_error.empty()) {
          try {
            graph = make_family_graph(fam, spec.p, gseed, c.ba_attach);
            sched = c.time_varying ? gen_tv_schedule(*graph, c.subgraphs, sseed, c.retain_prob)
                                   : make_static_schedule(*graph);
          } catch (const std::exception& e) {
            setup_error = e.what();
          }
        }
        for (Algorithm alg : c.algorithms) {
          RunRecord r;
          r.problem_seed = pseed;
          r.family = fam;
          r.graph_seed = gseed;
          const bool uses_schedule = alg == Algorithm::kCbDiht || alg == Algorithm::kSubgrad;
          r.schedule_seed = uses_schedule && c.time_varying ? sseed : 0;
          r.algorithm = alg;
          r.run_id = to_string(alg) + "-" + to_string(fam) + "-g" + std::to_string(gseed) + "-s" +
                     std::to_string(pseed);
          r.crossings = pick({}, acc);
          if (graph) r.graph_edges = static_cast<long>(graph->edge_count());
          if (!setup_error.empty()) {
            r.status = "error: " + sanitize(setup_error);
          } else {
            try {
              run_cell(r, c, *prob, *graph, *sched);
            } catch (const std::exception& e) {
              r.status = "error: " + sanitize(e.what());
            }
          }
          rep.runs.push_back(std::move(r));
        }
      }
    }
  }
  rep.aggregates = aggregate_runs(rep.runs, c.accuracies);
  return rep;
}

std::vector<AggregateRow> aggregate_runs(const std::vector<RunRecord>& runs,
                                         const std::vector<double>& accuracies) {
  const auto acc = sorted_accuracies(accuracies);
  // Keyed by first appearance so row order follows the experiment order.
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : runs) {
    std::pair<std::string, std::string> key{to_string(r.family), to_string(r.algorithm)};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<AggregateRow> out;
  for (const auto& [graph, alg] : keys) {
    for (double a : acc) {
      AggregateRow row;
      row.graph = graph;
      row.algorithm = alg;
      row.accuracy = a;
      int ok = 0;
      int converged = 0;
      for (const auto& r : runs) {
        if (to_string(r.family) != graph || to_string(r.algorithm) != alg) continue;
        ++row.runs;
        if (!r.ok()) continue;
        const Crossing* c = nullptr;
        for (const auto& x : r.crossings)
          if (x.accuracy == a) c = &x;
        const Metrics& m = c && c->iter ? c->at : r.total;
        if (c && c->iter) ++converged;
        row.values += static_cast<double>(m.values);
        row.time_steps += static_cast<double>(m.time_steps);
        ++ok;
      }
      if (ok > 0) {
        row.values /= ok;
        row.time_steps /= ok;
      } else {
        row.values = row.time_steps = std::nan("");
      }
      row.converged_fraction = row.runs > 0 ? static_cast<double>(converged) / row.runs : 0.0;
      out.push_back(row);
    }
  }
  return out;
}

}  // namespace dsr
