// Command-line front end: problem/graph generation, single runs,
// experiments and the verification suites.

#include "dsr/cbdiht.hpp"
#include "dsr/diht.hpp"
#include "dsr/experiment.hpp"
#include "dsr/graphs.hpp"
#include "dsr/iht.hpp"
#include "dsr/model.hpp"
#include "dsr/subgradient.hpp"
#include "dsr/verify.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace dsr;

struct ProblemArgs {
  ProblemSpec spec;
  std::string ensemble = "orthonormal";
  std::string file;

  void add(CLI::App& app) {
    spec.n = 100;
    spec.m = 50;
    spec.k = 5;
    spec.p = 10;
    app.add_option("--n", spec.n, "signal dimension")->capture_default_str();
    app.add_option("--m", spec.m, "total measurements")->capture_default_str();
    app.add_option("--k", spec.k, "sparsity")->capture_default_str();
    app.add_option("--p", spec.p, "number of agents")->capture_default_str();
    app.add_option("--noise", spec.noise_std, "measurement noise standard deviation")->capture_default_str();
    app.add_option("--cap", spec.spectral_cap, "spectral norm of the stacked matrix")->capture_default_str();
    app.add_option("--seed", spec.seed, "problem seed")->capture_default_str();
    app.add_option("--ensemble", ensemble, "gaussian or orthonormal")
        ->check(CLI::IsMember({"gaussian", "orthonormal"}))
        ->capture_default_str();
  }

  Problem make() {
    if (!file.empty()) return load_problem(file);
    spec.ensemble = ensemble_from_string(ensemble);
    return generate_problem(spec);
  }
};

struct GraphArgs {
  std::string family = "er75";
  std::uint64_t seed = 1;
  int ba_attach = 3;
  std::string file;

  void add(CLI::App& app) {
    app.add_option("--family", family, "ba, er25, er75, geo05 or geo075")
        ->check(CLI::IsMember({"ba", "er25", "er75", "geo05", "geo075"}))
        ->capture_default_str();
    app.add_option("--graph-seed", seed, "graph seed")->capture_default_str();
    app.add_option("--ba-attach", ba_attach, "Barabasi-Albert attachment count")->capture_default_str();
  }

  Graph make(int p) const {
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw IoError("cannot open graph file '" + file + "'");
      Graph g = read_graph(in);
      if (g.size() != p)
        throw InvalidArgument("graph has " + std::to_string(g.size()) + " vertices but the problem has " +
                              std::to_string(p) + " agents");
      return g;
    }
    return make_family_graph(graph_family_from_string(family), p, seed, ba_attach);
  }
};

struct ScheduleArgs {
  int subgraphs = 10;
  double retain = 0.5;
  std::uint64_t seed = 1;
  bool is_static = false;
  std::string file;

  void add(CLI::App& app) {
    app.add_option("--subgraphs", subgraphs, "subgraphs per period")->capture_default_str();
    app.add_option("--retain", retain, "per-edge retention probability")->capture_default_str();
    app.add_option("--schedule-seed", seed, "schedule seed")->capture_default_str();
  }

  TvSchedule make(const Graph& g) const {
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw IoError("cannot open schedule file '" + file + "'");
      return read_schedule(in);
    }
    return is_static ? make_static_schedule(g) : gen_tv_schedule(g, subgraphs, seed, retain);
  }
};

template <typename F>
void with_output(const std::string& path, F&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path + "'");
  body(os);
  if (!os) throw IoError("write failed for '" + path + "'");
}

double rel_err(const Vector& x, const Vector& ref) {
  const double d = ref.norm();
  return d > 0.0 ? (x - ref).norm() / d : (x - ref).norm();
}

void print_summary(const std::string& alg, long iterations, bool converged, double err, const Metrics& m) {
  std::cout << "algorithm " << alg << '\n'
            << "iterations " << iterations << '\n'
            << "converged " << (converged ? "yes" : "no") << '\n'
            << "relative_error " << err << '\n'
            << "values " << m.values << '\n'
            << "messages " << m.messages << '\n'
            << "broadcasts " << m.broadcasts << '\n'
            << "time_steps " << m.time_steps << '\n'
            << "setup_messages " << m.setup_messages << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed sparse recovery: IHT, DIHT, CB-DIHT and a subgradient baseline"};
  app.require_subcommand(1);

  // gen-problem
  auto* gp = app.add_subcommand("gen-problem", "generate a synthetic problem file");
  ProblemArgs gp_args;
  gp_args.add(*gp);
  std::string gp_out;
  gp->add_option("--out,-o", gp_out, "output file (stdout when omitted)");

  // gen-graph
  auto* gg = app.add_subcommand("gen-graph", "generate a graph from one of the families");
  GraphArgs gg_args;
  gg_args.add(*gg);
  int gg_p = 10;
  std::string gg_out;
  gg->add_option("--p", gg_p, "number of vertices")->capture_default_str();
  gg->add_option("--out,-o", gg_out, "output file (stdout when omitted)");

  // gen-schedule
  auto* gs = app.add_subcommand("gen-schedule", "generate a periodic time-varying schedule");
  GraphArgs gs_graph;
  gs_graph.add(*gs);
  ScheduleArgs gs_args;
  gs_args.add(*gs);
  int gs_p = 10;
  std::string gs_out;
  gs->add_option("--p", gs_p, "number of vertices")->capture_default_str();
  gs->add_option("--graph", gs_graph.file, "base graph file (overrides --family)");
  gs->add_option("--out,-o", gs_out, "output file (stdout when omitted)");

  // run
  auto* run = app.add_subcommand("run", "run one algorithm on one problem");
  std::string alg;
  run->add_option("algorithm", alg, "iht, diht, cbdiht or subgrad")
      ->required()
      ->check(CLI::IsMember({"iht", "diht", "cbdiht", "subgrad"}));
  ProblemArgs run_problem;
  run_problem.add(*run);
  run->add_option("--problem", run_problem.file, "problem file (overrides the generator flags)");
  GraphArgs run_graph;
  run_graph.add(*run);
  run->add_option("--graph", run_graph.file, "graph file (overrides --family)");
  ScheduleArgs run_sched;
  run_sched.add(*run);
  run->add_option("--schedule", run_sched.file, "schedule file");
  run->add_flag("--static", run_sched.is_static, "use the base graph at every step");
  double tol = 1e-2;
  long max_iters = 200000;
  long max_steps = 200000;
  std::optional<double> l;
  std::optional<double> l_tv;
  std::string l_tv_source = "global";
  double a = 0.7;
  int delay_max = 1;
  std::string run_out;
  run->add_option("--tol", tol, "relative error target at every agent")->capture_default_str();
  run->add_option("--max-iters", max_iters, "iteration budget")->capture_default_str();
  run->add_option("--max-steps", max_steps, "consensus step budget (cbdiht)")->capture_default_str();
  run->add_option("--l", l, "step constant L (iht, diht); default 1.005 L_f");
  run->add_option("--l-tv", l_tv, "step constant L_TV (cbdiht)");
  run->add_option("--l-tv-source", l_tv_source, "global, aggregate or max")
      ->check(CLI::IsMember({"global", "aggregate", "max"}))
      ->capture_default_str();
  run->add_option("--a", a, "subgradient step exponent")->capture_default_str();
  run->add_option("--delay-max", delay_max, "largest link delay (diht)")->capture_default_str();
  run->add_option("--out,-o", run_out, "metrics CSV path");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run an experiment described by a config file");
  std::string exp_config;
  std::string exp_out;
  exp->add_option("config", exp_config, "config file")->required();
  exp->add_option("--out,-o", exp_out, "output directory (overrides the config)");

  // verify
  auto* ver = app.add_subcommand("verify", "run verification suites");
  std::string suite = "quick";
  std::string ver_out;
  ver->add_option("--suite", suite, "suite name")->check(CLI::IsMember(suite_names()))->capture_default_str();
  ver->add_option("--out,-o", ver_out, "directory for verify.csv and demo outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (gp->parsed()) {
      const Problem prob = gp_args.make();
      with_output(gp_out, [&](std::ostream& os) { save_problem(prob, os); });
      return 0;
    }
    if (gg->parsed()) {
      const Graph g = gg_args.make(gg_p);
      with_output(gg_out, [&](std::ostream& os) { write_graph(g, os); });
      return 0;
    }
    if (gs->parsed()) {
      const Graph g = gs_graph.make(gs_p);
      const TvSchedule s = gs_args.make(g);
      with_output(gs_out, [&](std::ostream& os) { write_schedule(s, os); });
      return 0;
    }
    if (run->parsed()) {
      const Problem prob = run_problem.make();
      const double lf = loss_info(prob).lipschitz_global;
      if (alg == "iht") {
        IhtConfig cfg;
        cfg.l = l.value_or(1.005 * lf);
        cfg.k = prob.k;
        cfg.max_iters = static_cast<int>(max_iters);
        cfg.tol = tol;
        const auto tr = run_iht(make_objective(prob), prob.x_star, cfg);
        if (!run_out.empty()) with_output(run_out, [&](std::ostream& os) { write_trace_csv(tr, os); });
        print_summary(alg, static_cast<long>(tr.iterates.size()) - 1, tr.converged_at.has_value(),
                      rel_err(tr.last(), prob.x_star), {});
        return 0;
      }
      const Graph g = run_graph.make(prob.p);
      if (alg == "diht") {
        DihtConfig cfg;
        cfg.l = l.value_or(1.005 * lf);
        cfg.k = prob.k;
        cfg.max_iters = static_cast<int>(max_iters);
        cfg.tol = tol;
        cfg.delays = DelayModel{1, delay_max, run_graph.seed};
        cfg.record_iterates = false;
        const auto r = run_diht(prob, g, cfg);
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
        if (!run_out.empty()) with_output(run_out, [&](std::ostream& os) { write_metrics_csv(r.rows, os); });
        print_summary(alg, static_cast<long>(r.per_iteration.size()), r.trace.converged_at.has_value(),
                      rel_err(r.trace.last(), prob.x_star), r.metrics);
        return 0;
      }
      const TvSchedule sched = run_sched.make(g);
      if (alg == "cbdiht") {
        CbDihtConfig cfg;
        cfg.l_tv = l_tv;
        cfg.l_tv_source = ltv_source_from_string(l_tv_source);
        cfg.k = prob.k;
        cfg.max_outer_iters = static_cast<int>(max_iters);
        cfg.max_time_steps = max_steps;
        cfg.tol = tol;
        const auto r = run_cbdiht(prob, sched, cfg);
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
        if (!run_out.empty())
          with_output(run_out, [&](std::ostream& os) { write_metrics_csv(r.rows, os, true); });
        double worst = 0.0;
        for (const auto& x : r.agent_estimates) worst = std::max(worst, rel_err(x, prob.x_star));
        const bool conv = !r.crossings.empty() && r.crossings.back().iter.has_value();
        print_summary(alg, static_cast<long>(r.s_schedule.size()), conv, worst, r.metrics + r.l_tv_metrics);
        std::cout << "l_tv " << r.l_tv << '\n';
        return 0;
      }
      SubgradConfig cfg;
      cfg.a = a;
      cfg.max_iters = max_iters;
      cfg.tol = tol;
      const auto r = run_subgradient(prob, sched, cfg);
      if (!run_out.empty()) with_output(run_out, [&](std::ostream& os) { write_metrics_csv(r.rows, os); });
      double worst = 0.0;
      for (const auto& x : r.estimates) worst = std::max(worst, rel_err(x, prob.x_star));
      print_summary(alg, r.iterations, r.converged_at.has_value(), worst, r.metrics);
      return 0;
    }
    if (exp->parsed()) {
      ExperimentConfig cfg;
      try {
        cfg = load_config(exp_config);
      } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
      }
      if (!exp_out.empty()) cfg.output = exp_out;
      const Report rep = run_experiment(cfg);
      write_report(rep, cfg.output);
      int failed = 0;
      for (const auto& r : rep.runs)
        if (!r.ok()) {
          ++failed;
          std::cerr << r.run_id << ": " << r.status << '\n';
        }
      std::cout << rep.runs.size() << " runs, " << failed << " failed; results in " << cfg.output << '\n';
      return 0;
    }
    if (ver->parsed()) {
      const auto results = run_verify(suite, ver_out);
      int failed = 0;
      for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << '/' << r.name;
        if (!r.detail.empty()) std::cout << "  " << r.detail;
        std::cout << '\n';
        if (!r.passed) ++failed;
      }
      std::cout << results.size() - failed << '/' << results.size() << " checks passed\n";
      return failed == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
