#include "dsr/cbdiht.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numeric>

using namespace dsr;

namespace {

Problem desk(std::uint64_t seed, int p = 10) {
  ProblemSpec s;
  s.n = 100;
  s.m = 50;
  s.k = 5;
  s.p = p;
  s.seed = seed;
  s.ensemble = Ensemble::kOrthonormalRows;
  return generate_problem(s);
}

TvSchedule desk_schedule(std::uint64_t seed, int p = 10) {
  return gen_tv_schedule(make_family_graph(GraphFamily::kErdosRenyi75, p, seed), 10, seed);
}

std::vector<Edge> complete_edges(int p) {
  std::vector<Edge> e;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) e.emplace_back(i, j);
  return e;
}

IhtTrace reference_iht(const Problem& prob, double l, int iters) {
  IhtConfig ic;
  ic.l = l;
  ic.k = prob.k;
  ic.max_iters = iters;
  ic.stop = StopMode::kStepChange;
  ic.tol = -1.0;
  return run_iht(make_objective(prob), prob.x_star, ic);
}

}  // namespace

TEST_SUITE("cbdiht") {
  TEST_CASE("consensus step schedule") {
    CHECK(consensus_steps(0, Vector::Zero(4)) == 1);
    CHECK(consensus_steps(3, Vector::Constant(1, 2.0)) == 4);
    CHECK(consensus_steps(10, Vector::Zero(2)) == 5);
    CHECK(consensus_steps(1, Vector::Zero(2)) == 1);
  }

  TEST_CASE("single agent is centralized IHT") {
    const Problem prob = desk(1, 1);
    CbDihtConfig cfg;
    cfg.k = prob.k;
    cfg.l_tv = 1.0;
    cfg.max_outer_iters = 30;
    cfg.stop_at_tol = false;
    const auto run = run_cbdiht(prob, make_static_schedule(Graph(1, {})), cfg);
    const auto ref = reference_iht(prob, 1.0, 30);
    REQUIRE(run.agent1_trace.iterates.size() == ref.iterates.size());
    for (std::size_t i = 0; i < ref.iterates.size(); ++i) CHECK(run.agent1_trace.iterates[i] == ref.iterates[i]);
  }

  TEST_CASE("long consensus on a complete graph tracks IHT with L = P L_TV") {
    const Problem prob = desk(2, 6);
    CbDihtConfig cfg;
    cfg.k = prob.k;
    cfg.l_tv = 0.4;
    cfg.fixed_consensus_steps = 60;
    cfg.max_outer_iters = 20;
    cfg.stop_at_tol = false;
    const auto run = run_cbdiht(prob, make_static_schedule(Graph(6, complete_edges(6))), cfg);
    const auto ref = reference_iht(prob, 6 * 0.4, 20);
    for (std::size_t i = 0; i < ref.iterates.size(); ++i)
      CHECK((run.agent1_trace.iterates[i] - ref.iterates[i]).norm() <= 1e-10);
    for (double e : epsilon_series(prob, run)) CHECK(e <= 1e-20);
  }

  TEST_CASE("update equals the inexact IHT step") {
    const Problem prob = desk(3);
    CbDihtConfig cfg;
    cfg.k = prob.k;
    cfg.max_outer_iters = 80;
    cfg.stop_at_tol = false;
    const auto run = run_cbdiht(prob, desk_schedule(3), cfg);
    const Matrix a = stacked_matrix(prob);
    const Vector b = stacked_rhs(prob);
    const auto eps_sq = epsilon_series(prob, run);
    REQUIRE(eps_sq.size() == run.v_hat.size());
    for (std::size_t k = 0; k < run.v_hat.size(); ++k) {
      const Vector& x = run.agent1_trace.iterates[k];
      const Vector grad = 2.0 * a.transpose() * (a * x - b);
      const Vector eps = prob.p * run.v_hat[k] - grad;
      // Both routes carry rounding of order 1e-15 relative to the gradient.
      CHECK(std::abs(eps.norm() - std::sqrt(eps_sq[k])) <= 1e-12 * (1 + grad.norm()));
      const Vector route_a = hard_threshold(x - run.v_hat[k] / run.l_tv, prob.k);
      const Vector route_b = hard_threshold(x - (grad + eps) / (prob.p * run.l_tv), prob.k);
      CHECK((route_a - route_b).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((route_a - run.agent1_trace.iterates[k + 1]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(run.instance_monotone);
    CHECK(run.copy_coherent);
  }

  TEST_CASE("approximation errors are square-summable") {
    const Problem prob = desk(4);
    CbDihtConfig cfg;
    cfg.k = prob.k;
    cfg.max_outer_iters = 200;
    cfg.stop_at_tol = false;
    const auto run = run_cbdiht(prob, desk_schedule(4), cfg);
    const auto e = epsilon_series(prob, run);
    const double total = std::accumulate(e.begin(), e.end(), 0.0);
    const double tail = std::accumulate(e.begin() + static_cast<long>(e.size() / 2), e.end(), 0.0);
    CHECK(std::isfinite(total));
    CHECK(tail < 0.25 * total);

    cfg.fixed_consensus_steps = 1;
    cfg.max_outer_iters = 40;
    const auto one = run_cbdiht(prob, desk_schedule(4), cfg);
    for (double x : epsilon_series(prob, one)) CHECK(std::isfinite(x));
  }

  TEST_CASE("settled runs are L-stationary and recover the signal") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const Problem prob = desk(seed);
      CbDihtConfig cfg;
      cfg.k = prob.k;
      cfg.l_tv_source = LtvSource::kGlobal;
      cfg.max_outer_iters = 2000;
      cfg.stop_at_tol = false;
      cfg.stop_when_settled = true;
      const auto run = run_cbdiht(prob, desk_schedule(seed), cfg);
      REQUIRE(run.settled_at);
      const Vector& x = run.agent1_trace.last();
      CHECK(is_l_stationary(make_objective(prob), x, prob.p * run.l_tv, prob.k, 1e-8).stationary);
      CHECK((x - prob.x_star).norm() <= 1e-5 * prob.x_star.norm());
      // Exhaustive support oracle at desk scale: least squares on the
      // recovered support reproduces x.
      const auto sup = threshold_support(x, prob.k);
      const Vector ls = oracle::ls_on_support(stacked_matrix(prob), stacked_rhs(prob), sup);
      CHECK((ls - x).norm() <= 1e-8);
    }
  }

  TEST_CASE("step constant sources") {
    const Problem prob = desk(5);
    const TvSchedule sched = desk_schedule(5);
    const auto info = loss_info(prob);
    CbDihtConfig cfg;
    cfg.k = prob.k;
    cfg.max_outer_iters = 1;
    cfg.stop_at_tol = false;

    cfg.l_tv_source = LtvSource::kGlobal;
    const auto g = run_cbdiht(prob, sched, cfg);
    CHECK(g.l_tv == doctest::Approx(1.005 * 2 * oracle::lambda_max_dense(stacked_matrix(prob)) / 10).epsilon(1e-9));
    CHECK(g.l_tv_metrics == Metrics{});

    cfg.l_tv_source = LtvSource::kAggregate;
    CHECK(run_cbdiht(prob, sched, cfg).l_tv == doctest::Approx(1.005 * info.lipschitz_sum / 10));

    cfg.l_tv_source = LtvSource::kMaxConsensus;
    const auto m = run_cbdiht(prob, sched, cfg);
    CHECK(m.l_tv == doctest::Approx(1.005 * *std::max_element(info.lipschitz_p.begin(), info.lipschitz_p.end())));
    CHECK(m.l_tv_metrics.values > 0);

    cfg.l_tv = 0.01;  // below L_f / P
    CHECK_FALSE(run_cbdiht(prob, sched, cfg).warnings.empty());
    CHECK(ltv_source_from_string(to_string(LtvSource::kMaxConsensus)) == LtvSource::kMaxConsensus);
  }

  TEST_CASE("budget and accounting") {
    const Problem prob = desk(6);
    CbDihtConfig cfg;
    cfg.k = prob.k;
    cfg.max_outer_iters = 100000;
    cfg.max_time_steps = 500;
    cfg.stop_at_tol = false;
    const auto run = run_cbdiht(prob, desk_schedule(6), cfg);
    CHECK(run.time_steps_used <= 500);
    CHECK(run.metrics.time_steps == run.time_steps_used);
    // The instance cut short by the budget is recorded in s_schedule but
    // applies no update; its partial traffic is still counted.
    REQUIRE(run.s_schedule.size() == run.v_hat.size() + 1);
    long used = 0;
    for (std::size_t k = 0; k < run.v_hat.size(); ++k) used += run.s_schedule[k];
    CHECK(used <= run.time_steps_used);
    CHECK(used + run.s_schedule.back() > 500);
    REQUIRE_FALSE(run.rows.empty());
    CHECK(run.rows.back().cum.values < run.metrics.values);
    for (std::size_t i = 1; i < run.rows.size(); ++i) CHECK(run.rows[i].cum.values >= run.rows[i - 1].cum.values);
  }

  TEST_CASE("every-agent convergence is reported") {
    const Problem prob = desk(7);
    CbDihtConfig cfg;
    cfg.k = prob.k;
    cfg.l_tv_source = LtvSource::kGlobal;
    cfg.tol = 1e-2;
    cfg.accuracies = {1e-2};
    const auto run = run_cbdiht(prob, desk_schedule(7), cfg);
    REQUIRE(run.crossings.size() == 1u);
    REQUIRE(run.crossings[0].iter);
    REQUIRE(run.agent1_crossings[0].iter);
    CHECK(*run.agent1_crossings[0].iter <= *run.crossings[0].iter);
    for (const auto& x : run.agent_estimates) CHECK((x - prob.x_star).norm() <= 1e-2 * prob.x_star.norm());
  }
}
