#include "dsr/subgradient.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace dsr;

namespace {

Problem desk(std::uint64_t seed) {
  ProblemSpec s;
  s.n = 100;
  s.m = 50;
  s.k = 5;
  s.p = 10;
  s.seed = seed;
  s.ensemble = Ensemble::kOrthonormalRows;
  return generate_problem(s);
}

// Minimum l1-norm solution of A x = b by enumerating basic solutions.
Vector basis_pursuit_oracle(const Matrix& a, const Vector& b) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  double best = INFINITY;
  Vector best_x;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != m) continue;
    std::vector<int> cols;
    for (int j = 0; j < n; ++j)
      if ((mask >> j) & 1u) cols.push_back(j);
    const Vector x = oracle::ls_on_support(a, b, cols);
    if ((a * x - b).norm() > 1e-9) continue;
    if (x.lpNorm<1>() < best) {
      best = x.lpNorm<1>();
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

TEST_SUITE("subgrad") {
  TEST_CASE("affine projection") {
    SensingSlice sl{Matrix(1, 2), Vector::Constant(1, 1.0)};
    sl.a << 1, 0;
    Vector x(2);
    x << 0, 5;
    const Vector p = affine_projection(sl, x);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(5.0));

    std::mt19937_64 rng(3);
    SensingSlice r{oracle::randn(rng, 3, 8), oracle::randn(rng, 3)};
    const AffineProjector proj(r);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector y = oracle::randn(rng, 8);
      const Vector once = proj.project(y);
      CHECK((r.a * once - r.b).norm() <= 1e-12);
      CHECK((proj.project(once) - once).norm() <= 1e-12);
      CHECK((affine_projection(r, y) - once).norm() <= 1e-12);
      // Orthogonality: the correction lies in the row space.
      const Vector z = oracle::randn(rng, 8);
      const Vector feasible_dir = proj.project(z) - once;
      CHECK(std::abs((y - once).dot(feasible_dir)) <= 1e-10 * (1 + y.norm() * feasible_dir.norm()));
    }
  }

  TEST_CASE("ill-conditioned slices are reported") {
    SensingSlice sl{Matrix(2, 3), Vector::Zero(2)};
    sl.a << 1, 2, 3, 2, 4, 6;
    bool named = false;
    try {
      AffineProjector p(sl, 7);
    } catch (const NumericFailure& e) {
      named = std::string(e.what()).find('7') != std::string::npos;
    }
    CHECK(named);
  }

  TEST_CASE("step exponent validation") {
    SubgradConfig c;
    for (double a : {0.51, 0.7, 1.0}) {
      c.a = a;
      CHECK_NOTHROW(validate(c));
    }
    for (double a : {0.5, 0.2, 1.1}) {
      c.a = a;
      CHECK_THROWS_AS(validate(c), InvalidArgument);
    }
  }

  TEST_CASE("single agent converges to the minimum l1 solution") {
    std::mt19937_64 rng(17);
    const Matrix a = oracle::randn(rng, 3, 6);
    Vector xs = Vector::Zero(6);
    xs[1] = 1.0;
    const Vector b = a * xs;
    Problem prob;
    prob.n = 6;
    prob.m = 3;
    prob.k = 1;
    prob.p = 1;
    prob.x_star = xs;
    prob.noise = Vector::Zero(3);
    prob.slices = {SensingSlice{a, b}};
    const Vector bp = basis_pursuit_oracle(a, b);
    SubgradConfig cfg;
    cfg.reference = bp;
    cfg.max_iters = 200000;
    cfg.tol = 1e-2;
    const auto run = run_subgradient(prob, Graph(1, {}), cfg);
    REQUIRE(run.converged_at);
    CHECK((run.estimates[0] - bp).norm() <= 1e-2 * bp.norm());
  }

  TEST_CASE("common feasible zero point is fixed") {
    std::mt19937_64 rng(2);
    Problem prob;
    prob.n = 5;
    prob.m = 4;
    prob.k = 1;
    prob.p = 2;
    prob.x_star = Vector::Zero(5);
    prob.noise = Vector::Zero(4);
    prob.slices = {SensingSlice{oracle::randn(rng, 2, 5), Vector::Zero(2)},
                   SensingSlice{oracle::randn(rng, 2, 5), Vector::Zero(2)}};
    SubgradConfig cfg;
    cfg.max_iters = 50;
    cfg.stop_at_tol = false;
    cfg.reference = Vector::Constant(5, 1.0);
    const auto run = run_subgradient(prob, Graph(2, {{0, 1}}), cfg);
    for (const auto& x : run.estimates) CHECK(x.norm() == 0.0);
  }

  TEST_CASE("feasibility, norm bound and accounting on a schedule") {
    const Problem prob = desk(1);
    const TvSchedule sched = gen_tv_schedule(make_family_graph(GraphFamily::kGeometric075, 10, 1), 10, 1);
    SubgradConfig cfg;
    cfg.max_iters = 250;
    cfg.stop_at_tol = false;
    cfg.record_stride = 25;
    const auto run = run_subgradient(prob, sched, cfg);
    CHECK(run.max_feasibility_residual <= 1e-8);
    CHECK(run.averaging_norm_monotone);
    for (int p = 0; p < 10; ++p) {
      const auto& sl = prob.slices[static_cast<std::size_t>(p)];
      CHECK((sl.a * run.estimates[static_cast<std::size_t>(p)] - sl.b).norm() <= 1e-8);
    }
    long long values = 0, messages = 0, broadcasts = 0;
    for (long t = 0; t < 250; ++t) {
      const auto& e = sched.edges_at(t);
      values += 2LL * static_cast<long long>(e.size()) * prob.n;
      messages += 2LL * static_cast<long long>(e.size());
      std::vector<char> touched(10, 0);
      for (auto [u, v] : e) touched[u] = touched[v] = 1;
      broadcasts += std::count(touched.begin(), touched.end(), 1) * static_cast<long long>(prob.n);
    }
    CHECK(run.metrics.values == values);
    CHECK(run.metrics.messages == messages);
    CHECK(run.metrics.broadcasts == broadcasts);
    CHECK(run.metrics.time_steps == 250);
    CHECK(run.iterations == 250);
    CHECK(run.rows.size() == 11u);
    CHECK(run.rows.back().iter == 250);
  }
}
