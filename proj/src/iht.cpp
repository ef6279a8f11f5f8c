#include "dsr/iht.hpp"
#include "text_util.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace dsr {

Objective make_objective(const Problem& problem) {
  Objective obj;
  obj.gradient = [&problem](const Vector& x) { return total_gradient(problem, x); };
  obj.value = [&problem](const Vector& x) { return total_loss(problem, x); };
  return obj;
}

std::vector<int> threshold_support(const Vector& v, int k) {
  require(k >= 0 && k <= v.size(), "hard_threshold: k must lie in [0, dim(v)]");
  std::vector<int> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  const auto by_magnitude = [&v](int i, int j) {
    const double ai = std::abs(v[i]);
    const double aj = std::abs(v[j]);
    return ai > aj || (ai == aj && i < j);
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), by_magnitude);
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Vector hard_threshold(const Vector& v, int k) {
  Vector out = Vector::Zero(v.size());
  for (int i : threshold_support(v, k)) out[i] = v[i];
  return out;
}

Vector iht_step(const Vector& x, const Vector& grad, double l, int k) {
  require(x.size() == grad.size(), "iht_step: dimension mismatch");
  require(l > 0.0, "iht_step: l must be positive");
  return hard_threshold(x - grad / l, k);
}

namespace {

void validate(const IhtConfig& config, const std::optional<Vector>& x_star) {
  require(config.l > 0.0, "iht: l must be positive");
  require(config.max_iters >= 1, "iht: max_iters must be at least 1");
  require(config.k >= 0, "iht: k must be non-negative");
  if (config.stop == StopMode::kRelativeToTruth && !x_star)
    throw InvalidArgument("iht: relative-to-truth stopping needs x_star");
}

double relative_error(const Vector& x, const Vector& ref) {
  const double denom = ref.norm();
  const double diff = (x - ref).norm();
  return denom > 0.0 ? diff / denom : diff;
}

IhtTrace run(const Objective& objective, const ErrorInjector* injector,
             const std::optional<Vector>& x_star, const IhtConfig& config) {
  validate(config, x_star);
  Vector x = config.x_init.size() > 0 ? config.x_init : Vector::Zero(x_star ? x_star->size() : 0);
  require(x.size() > 0, "iht: cannot infer dimension without x_init or x_star");
  require((x.array() != 0.0).count() <= config.k, "iht: x_init must be k-sparse");
  if (x_star) require(x_star->size() == x.size(), "iht: x_star dimension mismatch");

  IhtTrace trace;
  const auto record = [&](const Vector& it) {
    trace.iterates.push_back(it);
    if (x_star) trace.errors_vs_truth.push_back((it - *x_star).norm());
    if (objective.value) trace.f_values.push_back(objective.value(it));
  };
  record(x);

  if (config.stop == StopMode::kRelativeToTruth && relative_error(x, *x_star) <= config.tol) {
    trace.converged_at = 0;
    return trace;
  }

  for (int it = 0; it < config.max_iters; ++it) {
    Vector grad = objective.gradient(x);
    if (grad.size() != x.size()) throw InvalidArgument("iht: gradient has wrong dimension");
    if (injector) {
      Vector eps = (*injector)(it, x);
      require(eps.size() == x.size(), "iht: injected error has wrong dimension");
      trace.eps_norms.push_back(eps.norm());
      grad += eps;
    }
    if (!grad.allFinite())
      throw NumericFailure("iht: non-finite gradient at iteration " + std::to_string(it), it);

    Vector next = iht_step(x, grad, config.l, config.k);
    const double delta_sq = (x - next).squaredNorm();
    trace.step_deltas.push_back(delta_sq);

    bool done = false;
    if (config.stop == StopMode::kStepChange) {
      done = std::sqrt(delta_sq) / std::max(1.0, x.norm()) <= config.tol;
    }
    x = std::move(next);
    record(x);
    if (config.stop == StopMode::kRelativeToTruth) done = relative_error(x, *x_star) <= config.tol;
    if (done) {
      trace.converged_at = it + 1;
      break;
    }
  }
  return trace;
}

}  // namespace

IhtTrace run_iht(const Objective& objective, const std::optional<Vector>& x_star,
                 const IhtConfig& config) {
  return run(objective, nullptr, x_star, config);
}

IhtTrace run_inexact_iht(const Objective& objective, const ErrorInjector& injector,
                         const std::optional<Vector>& x_star, const IhtConfig& config) {
  require(static_cast<bool>(injector), "run_inexact_iht: empty injector");
  return run(objective, &injector, x_star, config);
}

ErrorInjector geometric_injector(int n, double scale, double rate, std::uint64_t seed) {
  return [n, scale, rate, seed](int k, const Vector&) {
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k + 1)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector u(n);
    for (int i = 0; i < n; ++i) u[i] = gauss(rng);
    u.normalize();
    return Vector(scale * std::pow(rate, k) * u);
  };
}

double kth_largest_magnitude(const Vector& x, int k) {
  if (k <= 0 || k > x.size()) return 0.0;
  std::vector<double> mags(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) mags[i] = std::abs(x[i]);
  std::nth_element(mags.begin(), mags.begin() + (k - 1), mags.end(), std::greater<>());
  return mags[k - 1];
}

StationarityReport is_l_stationary(const Objective& objective, const Vector& x, double l,
                                   int k, double tol) {
  require((x.array() != 0.0).count() <= k, "is_l_stationary: x is not k-sparse");
  const Vector grad = objective.gradient(x);
  require(grad.size() == x.size(), "is_l_stationary: gradient has wrong dimension");
  const double mk = kth_largest_magnitude(x, k);

  StationarityReport report;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double g = std::abs(grad[i]);
    const double bound = x[i] != 0.0 ? tol : l * mk + tol;
    if (!(g <= bound)) report.violations.push_back({static_cast<int>(i), g, bound});
  }
  report.stationary = report.violations.empty();
  return report;
}

bool descent_gap_check(double f_k, double f_next, const Vector& delta, const Vector& eps,
                       double l, double l_f) {
  const double lhs = f_k - f_next;
  double rhs = 0.5 * (l - l_f) * delta.squaredNorm();
  if (eps.size() > 0) rhs -= delta.dot(eps);
  return lhs >= rhs - 1e-9;
}

SparkResult spark_bruteforce(const Matrix& a, int max_cols) {
  const int ncols = static_cast<int>(a.cols());
  require(max_cols >= 1, "spark_bruteforce: max_cols must be positive");
  require(ncols <= 24 || max_cols <= 6, "spark_bruteforce: input too large for enumeration");
  const int limit = std::min(max_cols, ncols);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());

  std::vector<int> pick;
  for (int size = 1; size <= limit; ++size) {
    if (size > a.rows()) return {size, true};
    // Enumerate column subsets in lexicographic order.
    pick.resize(static_cast<std::size_t>(size));
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
      Matrix sub(a.rows(), size);
      for (int j = 0; j < size; ++j) sub.col(j) = a.col(pick[j]);
      Eigen::JacobiSVD<Matrix> svd(sub);
      const auto& sv = svd.singularValues();
      if (sv[sv.size() - 1] <= 1e-10 * scale * std::sqrt(static_cast<double>(a.rows())))
        return {size, true};

      int pos = size - 1;
      while (pos >= 0 && pick[pos] == ncols - size + pos) --pos;
      if (pos < 0) break;
      ++pick[pos];
      for (int j = pos + 1; j < size; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  return {max_cols + 1, false};
}

void write_trace_csv(const IhtTrace& trace, std::ostream& os) {
  os << "iter,err_vs_truth,f_value,eps_norm,step_delta_sq\n";
  for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
    os << i << ',';
    if (i < trace.errors_vs_truth.size()) os << detail::fmt_double(trace.errors_vs_truth[i]);
    os << ',';
    if (i < trace.f_values.size()) os << detail::fmt_double(trace.f_values[i]);
    os << ',';
    if (i < trace.eps_norms.size()) os << detail::fmt_double(trace.eps_norms[i]);
    os << ',';
    if (i < trace.step_deltas.size()) os << detail::fmt_double(trace.step_deltas[i]);
    os << '\n';
  }
}

}  // namespace dsr
