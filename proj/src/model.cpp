#include "dsr/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsr {

std::string to_string(Ensemble e) {
  switch (e) {
    case Ensemble::kGaussian:
      return "gaussian";
    case Ensemble::kOrthonormalRows:
      return "orthonormal";
  }
  return "gaussian";
}

Ensemble ensemble_from_string(const std::string& s) {
  if (s == "gaussian") return Ensemble::kGaussian;
  if (s == "orthonormal") return Ensemble::kOrthonormalRows;
  throw InvalidArgument("unknown ensemble '" + s + "'");
}

std::vector<int> Problem::slice_offsets() const {
  std::vector<int> off;
  off.reserve(slices.size() + 1);
  int acc = 0;
  for (const auto& s : slices) {
    off.push_back(acc);
    acc += s.rows();
  }
  off.push_back(acc);
  return off;
}

double loss_value(const SensingSlice& slice, const Vector& x) {
  require(x.size() == slice.a.cols(), "loss_value: dimension mismatch");
  return (slice.a * x - slice.b).squaredNorm();
}

Vector loss_gradient(const SensingSlice& slice, const Vector& x) {
  require(x.size() == slice.a.cols(), "loss_gradient: dimension mismatch");
  return 2.0 * (slice.a.transpose() * (slice.a * x - slice.b));
}

double lambda_max_gram(const Matrix& a, int max_iters, double tol) {
  if (a.size() == 0) return 0.0;
  const Matrix gram = a.rows() <= a.cols() ? Matrix(a * a.transpose())
                                           : Matrix(a.transpose() * a);
  if (gram.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  // Deterministic start: all-ones plus a small index ramp so the start is
  // not orthogonal to the top eigenvector of structured matrices.
  Vector v(gram.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i);
  v.normalize();

  double lambda = v.dot(gram * v);
  for (int it = 0; it < max_iters; ++it) {
    Vector w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) break;
    v = w / norm;
    const double next = v.dot(gram * v);
    if (std::abs(next - lambda) <= tol * std::abs(next)) return next;
    lambda = next;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

LipschitzEstimate lipschitz_of_slice(const SensingSlice& slice) {
  require(slice.a.size() > 0, "lipschitz_of_slice: empty slice");
  const double lam = lambda_max_gram(slice.a);
  if (lam == 0.0) return {0.0, true};
  return {2.0 * lam, false};
}

LossInfo loss_info(const Problem& problem) {
  LossInfo info;
  for (const auto& s : problem.slices) {
    info.lipschitz_p.push_back(lipschitz_of_slice(s).value);
  }
  info.lipschitz_sum = std::accumulate(info.lipschitz_p.begin(), info.lipschitz_p.end(), 0.0);
  info.lipschitz_global = 2.0 * lambda_max_gram(stacked_matrix(problem));
  return info;
}

namespace {

// Exact top eigenvalue for the rescaling step; the power iteration is too
// slow on Wishart spectra whose leading eigenvalues nearly coincide.
double exact_lambda_max(const Matrix& a) {
  const Matrix gram = a.rows() <= a.cols() ? Matrix(a * a.transpose())
                                           : Matrix(a.transpose() * a);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

}  // namespace

Problem generate_problem(const ProblemSpec& spec) {
  require(spec.n >= 1, "generate_problem: n must be positive");
  require(spec.m >= 1, "generate_problem: m must be positive");
  require(spec.k >= 0 && spec.k <= spec.n, "generate_problem: k must lie in [0, n]");
  require(spec.p >= 1, "generate_problem: p must be positive");
  require(spec.m >= spec.p, "generate_problem: every agent needs at least one row (m >= p)");
  require(spec.spectral_cap > 0.0, "generate_problem: spectral_cap must be positive");
  require(spec.noise_std >= 0.0, "generate_problem: noise_std must be non-negative");

  Rng rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix a(spec.m, spec.n);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = gauss(rng);

  if (spec.ensemble == Ensemble::kOrthonormalRows && spec.m <= spec.n) {
    Eigen::HouseholderQR<Matrix> qr(a.transpose());
    Matrix q = qr.householderQ() * Matrix::Identity(spec.n, spec.m);
    a = q.transpose();
  }
  a *= spec.spectral_cap / std::sqrt(exact_lambda_max(a));

  Vector x_star = Vector::Zero(spec.n);
  std::vector<int> idx(spec.n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < spec.k; ++i) {
    std::uniform_int_distribution<int> pick(i, spec.n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  for (int i = 0; i < spec.k; ++i) x_star[idx[i]] = gauss(rng);

  Vector noise = Vector::Zero(spec.m);
  if (spec.noise_std > 0.0) {
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = spec.noise_std * gauss(rng);
  }
  const Vector b = a * x_star + noise;

  Problem prob;
  prob.n = spec.n;
  prob.m = spec.m;
  prob.k = spec.k;
  prob.p = spec.p;
  prob.seed = spec.seed;
  prob.noise_std = spec.noise_std;
  prob.spectral_cap = spec.spectral_cap;
  prob.ensemble = spec.ensemble;
  prob.x_star = x_star;
  prob.noise = noise;

  // Contiguous partition; when p does not divide m the trailing agents
  // take one extra row each.
  const int base = spec.m / spec.p;
  const int extra = spec.m % spec.p;
  int row = 0;
  for (int agent = 0; agent < spec.p; ++agent) {
    const int rows = base + (agent >= spec.p - extra ? 1 : 0);
    SensingSlice s;
    s.a = a.middleRows(row, rows);
    s.b = b.segment(row, rows);
    prob.slices.push_back(std::move(s));
    row += rows;
  }
  return prob;
}

Matrix stacked_matrix(const Problem& problem) {
  Matrix a(problem.m, problem.n);
  int row = 0;
  for (const auto& s : problem.slices) {
    a.middleRows(row, s.rows()) = s.a;
    row += s.rows();
  }
  return a;
}

Vector stacked_rhs(const Problem& problem) {
  Vector b(problem.m);
  int row = 0;
  for (const auto& s : problem.slices) {
    b.segment(row, s.rows()) = s.b;
    row += s.rows();
  }
  return b;
}

double total_loss(const Problem& problem, const Vector& x) {
  double acc = 0.0;
  for (const auto& s : problem.slices) acc += loss_value(s, x);
  return acc;
}

Vector total_gradient(const Problem& problem, const Vector& x) {
  Vector g = Vector::Zero(problem.n);
  for (const auto& s : problem.slices) g += loss_gradient(s, x);
  return g;
}

}  // namespace dsr
