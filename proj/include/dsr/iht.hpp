#pragma once

#include "dsr/common.hpp"
#include "dsr/model.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace dsr {

/// Loss-agnostic objective. `value` may be empty when only gradients are
/// available; traces then leave f_values empty.
struct Objective {
  std::function<Vector(const Vector&)> gradient;
  std::function<double(const Vector&)> value;
};

/// f = sum_p ||A_p x - b_p||^2 over all slices of the problem.
Objective make_objective(const Problem& problem);

enum class StopMode {
  kRelativeToTruth,  // ||x^k - x*|| / ||x*|| <= tol (needs x*)
  kStepChange,       // ||x^k - x^{k+1}|| / max(1, ||x^k||) <= tol
};

struct IhtConfig {
  double l = 1.0;
  int k = 1;
  int max_iters = 1000;
  double tol = 1e-8;
  Vector x_init;  // empty means zero
  StopMode stop = StopMode::kRelativeToTruth;
};

struct IhtTrace {
  std::vector<Vector> iterates;
  std::vector<double> errors_vs_truth;  // one per iterate when x* is known
  std::vector<double> f_values;         // one per iterate when value() is set
  std::vector<double> eps_norms;        // one per step, inexact runs only
  std::vector<double> step_deltas;      // ||x^k - x^{k+1}||^2, one per step
  std::optional<int> converged_at;

  const Vector& last() const { return iterates.back(); }
};

/// Returns eps^(k) for iteration k at iterate x.
using ErrorInjector = std::function<Vector(int k, const Vector& x)>;

/// Keeps the k largest-magnitude entries; ties go to the lowest index.
Vector hard_threshold(const Vector& v, int k);

/// Indices kept by hard_threshold, in ascending order.
std::vector<int> threshold_support(const Vector& v, int k);

/// T_K(x - grad / l).
Vector iht_step(const Vector& x, const Vector& grad, double l, int k);

IhtTrace run_iht(const Objective& objective, const std::optional<Vector>& x_star,
                 const IhtConfig& config);

IhtTrace run_inexact_iht(const Objective& objective, const ErrorInjector& injector,
                         const std::optional<Vector>& x_star, const IhtConfig& config);

/// Geometric injector c * rate^k * u_k with u_k a seeded random unit vector.
ErrorInjector geometric_injector(int n, double scale, double rate, std::uint64_t seed);

struct StationarityViolation {
  int index = 0;
  double gradient = 0.0;  // |grad_i f(x)|
  double bound = 0.0;     // tol, or l * M_K(x) + tol
};

struct StationarityReport {
  bool stationary = false;
  std::vector<StationarityViolation> violations;
};

/// Coordinate-wise L-stationarity test: zero gradient on the support,
/// |grad_i| <= l * M_K(x) off the support, both up to `tol`.
StationarityReport is_l_stationary(const Objective& objective, const Vector& x, double l,
                                   int k, double tol = 1e-8);

/// K-th largest magnitude of x (0 when x has fewer than K entries).
double kth_largest_magnitude(const Vector& x, int k);

/// f(x^k) - f(x^{k+1}) >= ((l - l_f)/2)||delta||^2 - delta^T eps - 1e-9.
bool descent_gap_check(double f_k, double f_next, const Vector& delta, const Vector& eps,
                       double l, double l_f);

struct SparkResult {
  int value = 0;      // exact spark, or a lower bound when !exact
  bool exact = false;
};

/// Smallest dependent column subset by exhaustive rank tests up to
/// max_cols columns. Exponential; guarded to desk-scale inputs.
SparkResult spark_bruteforce(const Matrix& a, int max_cols);

/// CSV with columns iter,err_vs_truth,f_value,eps_norm,step_delta_sq.
void write_trace_csv(const IhtTrace& trace, std::ostream& os);

}  // namespace dsr
