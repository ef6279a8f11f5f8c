#pragma once

#include "dsr/common.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dsr {

/// Rows of the stacked sensing system held by one agent.
struct SensingSlice {
  Matrix a;
  Vector b;

  int rows() const { return static_cast<int>(a.rows()); }
  int cols() const { return static_cast<int>(a.cols()); }
};

enum class Ensemble {
  kGaussian,         // i.i.d. N(0,1) entries, rescaled to the spectral cap
  kOrthonormalRows,  // Gaussian rows orthonormalized (tight frame), times the cap
};

std::string to_string(Ensemble e);
Ensemble ensemble_from_string(const std::string& s);

struct ProblemSpec {
  int n = 1000;
  int m = 200;
  int k = 3;
  int p = 50;
  double noise_std = 0.0;
  double spectral_cap = 0.99;
  std::uint64_t seed = 1;
  Ensemble ensemble = Ensemble::kGaussian;
};

struct Problem {
  int n = 0;
  int m = 0;
  int k = 0;
  int p = 0;
  std::uint64_t seed = 0;
  double noise_std = 0.0;
  double spectral_cap = 0.0;
  Ensemble ensemble = Ensemble::kGaussian;
  Vector x_star;
  Vector noise;
  std::vector<SensingSlice> slices;

  /// First stacked row of each slice, plus a trailing m.
  std::vector<int> slice_offsets() const;
};

struct LossInfo {
  std::vector<double> lipschitz_p;
  double lipschitz_sum = 0.0;
  double lipschitz_global = 0.0;
};

struct LipschitzEstimate {
  double value = 0.0;
  bool zero_matrix = false;
};

/// ||A_p x - b_p||^2.
double loss_value(const SensingSlice& slice, const Vector& x);

/// 2 A_p^T (A_p x - b_p).
Vector loss_gradient(const SensingSlice& slice, const Vector& x);

/// Largest eigenvalue of A^T A. Power iteration on the smaller Gram matrix
/// with a Rayleigh-quotient estimate; falls back to a symmetric
/// eigensolver when the iteration budget runs out before `tol`.
double lambda_max_gram(const Matrix& a, int max_iters = 200, double tol = 1e-10);

/// 2 lambda_max(A_p^T A_p). A zero matrix yields 0 with the flag set.
LipschitzEstimate lipschitz_of_slice(const SensingSlice& slice);

LossInfo loss_info(const Problem& problem);

Problem generate_problem(const ProblemSpec& spec);

Matrix stacked_matrix(const Problem& problem);
Vector stacked_rhs(const Problem& problem);

/// Sum of the per-agent losses and gradients (the global objective f).
double total_loss(const Problem& problem, const Vector& x);
Vector total_gradient(const Problem& problem, const Vector& x);

/// Text container, see docs/formats.md. Doubles are written in shortest
/// round-trip form so load(save(p)) is bit-identical.
void save_problem(const Problem& problem, std::ostream& os);
Problem load_problem(std::istream& is);
void save_problem(const Problem& problem, const std::string& path);
Problem load_problem(const std::string& path);

}  // namespace dsr
