#include "dsr/model.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace dsr;

namespace {

SensingSlice slice(Matrix a, Vector b) { return SensingSlice{std::move(a), std::move(b)}; }

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("loss value on small slices") {
    CHECK(loss_value(slice(Matrix::Identity(2, 2), Vector::Zero(2)), Vector::Zero(2)) == 0.0);
    CHECK(loss_value(slice(Matrix::Identity(2, 2), Vector::LinSpaced(2, 1, 2)), Vector::Zero(2)) == 5.0);

    std::mt19937_64 rng(4);
    const Matrix a = oracle::randn(rng, 3, 4);
    const Vector b = oracle::randn(rng, 3);
    const Vector x = oracle::randn(rng, 4);
    CHECK(loss_value(slice(a, b), x) == doctest::Approx(oracle::residual_sq(a, b, x)).epsilon(1e-13));
  }

  TEST_CASE("loss gradient") {
    Vector x(2);
    x << 0.3, -1.7;
    CHECK((loss_gradient(slice(Matrix::Identity(2, 2), Vector::Zero(2)), x) - 2 * x).norm() == 0.0);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1;
    d(1, 1) = 2;
    Vector b(2);
    b << 1, 2;
    const Vector g = loss_gradient(slice(d, b), Vector::Zero(2));
    CHECK(g[0] == doctest::Approx(-2.0));
    CHECK(g[1] == doctest::Approx(-8.0));
    // Central differences, h = 1e-6.
    for (int i = 0; i < 2; ++i) {
      Vector xp = Vector::Zero(2), xm = Vector::Zero(2);
      xp[i] = 1e-6;
      xm[i] = -1e-6;
      const double fd = (loss_value(slice(d, b), xp) - loss_value(slice(d, b), xm)) / 2e-6;
      CHECK(std::abs(fd - g[i]) <= 1e-6 * std::abs(g[i]));
    }
  }

  TEST_CASE("gradient agrees with finite differences on random slices") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix a = oracle::randn(rng, 4, 7);
      const Vector b = oracle::randn(rng, 4);
      const Vector x = oracle::randn(rng, 7);
      const Vector g = loss_gradient(slice(a, b), x);
      for (int i = 0; i < 7; ++i) {
        const double h = 1e-5;
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (oracle::residual_sq(a, b, xp) - oracle::residual_sq(a, b, xm)) / (2 * h);
        CHECK(std::abs(fd - g[i]) <= 1e-5 * std::max(1.0, std::abs(g[i])));
      }
    }
  }

  TEST_CASE("lipschitz constant of a slice") {
    CHECK(lipschitz_of_slice(slice(Matrix::Identity(2, 2), Vector::Zero(2))).value == doctest::Approx(2.0));
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1;
    d(1, 1) = 3;
    CHECK(lipschitz_of_slice(slice(d, Vector::Zero(2))).value == doctest::Approx(18.0).epsilon(1e-12));
    const auto z = lipschitz_of_slice(slice(Matrix::Zero(2, 3), Vector::Zero(2)));
    CHECK(z.value == 0.0);
    CHECK(z.zero_matrix);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix a = oracle::randn(rng, 6, 15);
      CHECK(lambda_max_gram(a) == doctest::Approx(oracle::lambda_max_dense(a)).epsilon(1e-9));
    }
  }

  TEST_CASE("generated problem has the requested shape") {
    ProblemSpec spec;  // 1000 x 200, 50 agents, K = 3
    spec.seed = 3;
    const Problem prob = generate_problem(spec);
    REQUIRE(prob.slices.size() == 50);
    for (const auto& s : prob.slices) {
      CHECK(s.rows() == 4);
      CHECK(s.cols() == 1000);
      CHECK(loss_value(s, prob.x_star) == doctest::Approx(0.0).epsilon(1e-20));
      CHECK(loss_gradient(s, prob.x_star).norm() <= 1e-12);
    }
    CHECK((prob.x_star.array() != 0.0).count() == 3);
  }

  TEST_CASE("spectral cap holds for every seed and ensemble") {
    for (Ensemble e : {Ensemble::kGaussian, Ensemble::kOrthonormalRows}) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ProblemSpec spec;
        spec.n = 60;
        spec.m = 24;
        spec.p = 4;
        spec.seed = seed;
        spec.ensemble = e;
        const Problem prob = generate_problem(spec);
        CHECK(oracle::lambda_max_dense(stacked_matrix(prob)) == doctest::Approx(0.99 * 0.99).epsilon(1e-8));
      }
    }
  }

  TEST_CASE("slices stack into the global system") {
    ProblemSpec spec;
    spec.n = 40;
    spec.m = 18;
    spec.k = 4;
    spec.p = 5;  // uneven split
    spec.noise_std = 0.1;
    const Problem prob = generate_problem(spec);
    const Matrix a = stacked_matrix(prob);
    const Vector b = stacked_rhs(prob);
    CHECK(a.rows() == 18);
    const auto offs = prob.slice_offsets();
    CHECK(offs.front() == 0);
    CHECK(offs.back() == 18);

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector x = oracle::randn(rng, 40);
      double sum = 0.0;
      Vector g = Vector::Zero(40);
      for (const auto& s : prob.slices) {
        sum += loss_value(s, x);
        g += loss_gradient(s, x);
      }
      const double ref = oracle::residual_sq(a, b, x);
      CHECK(std::abs(sum - ref) <= 1e-10 * ref);
      const Vector gref = 2.0 * a.transpose() * (a * x - b);
      CHECK((g - gref).norm() <= 1e-10 * gref.norm());
    }
  }

  TEST_CASE("lipschitz aggregate bounds the global constant") {
    ProblemSpec spec;
    spec.n = 50;
    spec.m = 20;
    spec.p = 5;
    const LossInfo info = loss_info(generate_problem(spec));
    CHECK(info.lipschitz_p.size() == 5);
    CHECK(info.lipschitz_sum > info.lipschitz_global);
  }

  TEST_CASE("invalid specs are rejected") {
    ProblemSpec spec;
    spec.n = 10;
    spec.m = 5;
    spec.k = 11;
    spec.p = 1;
    CHECK_THROWS_AS(generate_problem(spec), InvalidArgument);
    spec.k = 2;
    spec.p = 6;  // more agents than rows
    CHECK_THROWS_AS(generate_problem(spec), InvalidArgument);
  }

  TEST_CASE("problem files round-trip bit-exactly") {
    ProblemSpec spec;
    spec.n = 20;
    spec.m = 8;
    spec.k = 2;
    spec.p = 3;
    spec.noise_std = 0.01;
    const Problem prob = generate_problem(spec);
    std::stringstream ss;
    save_problem(prob, ss);
    const Problem back = load_problem(ss);
    CHECK(back.x_star == prob.x_star);
    CHECK(back.noise == prob.noise);
    CHECK(stacked_matrix(back) == stacked_matrix(prob));
    CHECK(stacked_rhs(back) == stacked_rhs(prob));
    CHECK(back.seed == prob.seed);

    std::stringstream bad("not a problem file\n");
    CHECK_THROWS_AS(load_problem(bad), IoError);
  }
}
