#ifndef XSHIFT_SYNTH_HPP_
#define XSHIFT_SYNTH_HPP_

#include "xshift/core.hpp"
#include "xshift/rng.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace xshift {

/// Multivariate normal N(mean, covariance).
struct GaussianSpec {
  Vector mean;
  Eigen::MatrixXd covariance;

  Eigen::Index dim() const { return mean.size(); }

  /// Throws ConfigError on shape/symmetry problems and NumericalError when the
  /// covariance is not positive definite.
  void validate() const {
    if (mean.size() == 0) throw ConfigError("GaussianSpec: empty mean");
    if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size()) {
      throw ConfigError("GaussianSpec: covariance must be square with dimension " +
                        std::to_string(mean.size()));
    }
    if (((covariance - covariance.transpose()).array().abs() > 1e-12).any()) {
      throw ConfigError("GaussianSpec: covariance is not symmetric");
    }
    if (!mean.allFinite() || !covariance.allFinite()) {
      throw ConfigError("GaussianSpec: non-finite entries");
    }
    (void)cholesky();
  }

  Eigen::MatrixXd cholesky() const {
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("GaussianSpec: Cholesky factorization failed, covariance is not positive definite");
    }
    return llt.matrixL();
  }

  static GaussianSpec standard(Eigen::Index dim, double mu = 0.0) {
    return {Vector::Constant(dim, mu), Eigen::MatrixXd::Identity(dim, dim)};
  }

  /// Two unit-variance features with correlation rho.
  static GaussianSpec correlated_pair(double rho, double mu1 = 0.0, double mu2 = 0.0) {
    GaussianSpec s{Vector(2), Eigen::MatrixXd(2, 2)};
    s.mean << mu1, mu2;
    s.covariance << 1.0, rho, rho, 1.0;
    return s;
  }

  bool operator==(const GaussianSpec& o) const {
    return mean.size() == o.mean.size() && mean == o.mean &&
           covariance.rows() == o.covariance.rows() && covariance == o.covariance;
  }
};

/// n draws of mean + L z, L the lower Cholesky factor, z from the seeded stream.
inline DataMatrix sample_mvn(const GaussianSpec& spec, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_mvn: n must be positive");
  spec.validate();
  const Eigen::MatrixXd chol = spec.cholesky();
  const Eigen::Index d = spec.dim();
  RandomStream rng(seed);
  DataMatrix out(n, d);
  Vector z(d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
    for (Eigen::Index i = 0; i < d; ++i) {
      double acc = spec.mean[i];
      for (Eigen::Index j = 0; j <= i; ++j) acc += chol(i, j) * z[j];
      out(r, i) = acc;
    }
  }
  return out;
}

enum class TaskKind { MultivariateShift, PosteriorShift, UnusedFeature };

enum class TargetRule {
  Product,      // X1*X2
  ProductSq12,  // X1^2*X2
  ProductSq21,  // X1*X2^2
  Linear2of3,   // a0 + a1 X1 + a2 X2 (three features)
  LinearAB,     // a + alpha X1 + beta X2
  LinearBA,     // a + beta X1 + alpha X2
};

struct TargetCoefficients {
  double intercept = 0.0;  // a, a0
  double alpha = 2.0;      // alpha, a1
  double beta = 1.0;       // beta, a2
};

struct SyntheticTask {
  TaskKind kind = TaskKind::MultivariateShift;
  GaussianSpec source_spec;
  GaussianSpec ood_spec;
  TargetRule target_rule = TargetRule::Product;
  /// Rule generating y_ood; differs from target_rule only for posterior shift.
  TargetRule ood_target_rule = TargetRule::Product;
  TargetCoefficients coefficients;
  double noise_sd = 0.1;
  Eigen::Index sample_count = 50000;
  std::uint64_t seed = 0;
  /// Offset added to the third column of the test draw to form X_ood (unused-feature task).
  double unused_shift = 1.0;

  void validate() const;
};

/// Train, held-out test and out-of-distribution draws with their targets.
struct TaskData {
  DataMatrix x_train;
  Vector y_train;
  DataMatrix x_test;
  Vector y_test;
  DataMatrix x_ood;
  Vector y_ood;
};

inline std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::MultivariateShift: return "MultivariateShift";
    case TaskKind::PosteriorShift: return "PosteriorShift";
    case TaskKind::UnusedFeature: return "UnusedFeature";
  }
  return "?";
}

inline std::string_view to_string(TargetRule r) {
  switch (r) {
    case TargetRule::Product: return "Product";
    case TargetRule::ProductSq12: return "ProductSq12";
    case TargetRule::ProductSq21: return "ProductSq21";
    case TargetRule::Linear2of3: return "Linear2of3";
    case TargetRule::LinearAB: return "LinearAB";
    case TargetRule::LinearBA: return "LinearBA";
  }
  return "?";
}

inline void check_rule_dimension(TargetRule rule, Eigen::Index cols) {
  if (cols < 2) {
    throw ConfigError("target rule " + std::string(to_string(rule)) + " needs at least 2 features");
  }
  if (rule == TargetRule::Linear2of3 && cols != 3) {
    throw ConfigError("target rule Linear2of3 needs exactly 3 features, got " + std::to_string(cols));
  }
}

/// Noiseless target value of one row.
inline double target_value(TargetRule rule, const TargetCoefficients& c, std::span<const double> x) {
  const double x1 = x[0];
  const double x2 = x[1];
  switch (rule) {
    case TargetRule::Product: return x1 * x2;
    case TargetRule::ProductSq12: return x1 * x1 * x2;
    case TargetRule::ProductSq21: return x1 * x2 * x2;
    case TargetRule::Linear2of3:
    case TargetRule::LinearAB: return c.intercept + c.alpha * x1 + c.beta * x2;
    case TargetRule::LinearBA: return c.intercept + c.beta * x1 + c.alpha * x2;
  }
  return 0.0;
}

/// Targets for every row of x plus N(0, noise_sd^2) noise from its own stream.
inline Vector make_targets(TargetRule rule, const TargetCoefficients& c, const DataMatrix& x,
                           double noise_sd, std::uint64_t noise_seed) {
  check_rule_dimension(rule, x.cols());
  if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
  RandomStream rng(noise_seed);
  Vector y(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double eps = rng.normal();
    y[r] = target_value(rule, c, row_span(x, r)) + noise_sd * eps;
  }
  return y;
}

inline void SyntheticTask::validate() const {
  source_spec.validate();
  ood_spec.validate();
  if (source_spec.dim() != ood_spec.dim()) throw ConfigError("source and ood specs differ in dimension");
  if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
  if (sample_count < 1) throw ConfigError("sample_count must be positive");
  check_rule_dimension(target_rule, source_spec.dim());
  check_rule_dimension(ood_target_rule, source_spec.dim());
  if (kind == TaskKind::PosteriorShift && !(source_spec == ood_spec)) {
    throw ConfigError("posterior-shift task requires identical source and ood specs");
  }
  if (kind == TaskKind::UnusedFeature && source_spec.dim() < 3) {
    throw ConfigError("unused-feature task requires at least 3 features");
  }
}

inline TaskData make_task_data(const SyntheticTask& task) {
  task.validate();
  const auto n = task.sample_count;
  const auto s = task.seed;
  TaskData d;
  d.x_train = sample_mvn(task.source_spec, n, derive_seed(s, "x_train"));
  d.y_train = make_targets(task.target_rule, task.coefficients, d.x_train, task.noise_sd,
                           derive_seed(s, "noise_train"));
  d.x_test = sample_mvn(task.source_spec, n, derive_seed(s, "x_test"));
  d.y_test = make_targets(task.target_rule, task.coefficients, d.x_test, task.noise_sd,
                          derive_seed(s, "noise_test"));
  if (task.kind == TaskKind::UnusedFeature) {
    // Same rows as the test draw; only the third column moves, so targets are unchanged.
    d.x_ood = d.x_test;
    d.x_ood.col(2).array() += task.unused_shift;
    d.y_ood = d.y_test;
  } else {
    d.x_ood = sample_mvn(task.ood_spec, n, derive_seed(s, "x_ood"));
    d.y_ood = make_targets(task.ood_target_rule, task.coefficients, d.x_ood, task.noise_sd,
                           derive_seed(s, "noise_ood"));
  }
  return d;
}

// Benchmark setups.

/// X ~ N(0, I2) vs X_ood ~ N(0, [[1, rho], [rho, 1]]), Y = X1 X2 + eps.
inline SyntheticTask multivariate_shift_task(Eigen::Index n, std::uint64_t seed, double rho = 0.2,
                                             double noise_sd = 0.1) {
  SyntheticTask t;
  t.kind = TaskKind::MultivariateShift;
  t.source_spec = GaussianSpec::standard(2);
  t.ood_spec = GaussianSpec::correlated_pair(rho);
  t.target_rule = t.ood_target_rule = TargetRule::Product;
  t.noise_sd = noise_sd;
  t.sample_count = n;
  t.seed = seed;
  return t;
}

/// X ~ N(1, I2); Y = X1^2 X2 + eps vs Y_ood = X1 X2^2 + eps.
inline SyntheticTask posterior_shift_task(Eigen::Index n, std::uint64_t seed, double noise_sd = 0.1) {
  SyntheticTask t;
  t.kind = TaskKind::PosteriorShift;
  t.source_spec = t.ood_spec = GaussianSpec::standard(2, 1.0);
  t.target_rule = TargetRule::ProductSq12;
  t.ood_target_rule = TargetRule::ProductSq21;
  t.noise_sd = noise_sd;
  t.sample_count = n;
  t.seed = seed;
  return t;
}

/// X ~ N(mu, I2); Y = a + alpha X1 + beta X2 + eps vs Y_ood = a + beta X1 + alpha X2 + eps.
inline SyntheticTask posterior_linear_task(Eigen::Index n, std::uint64_t seed, double alpha = 2.0,
                                           double beta = 1.0, double intercept = 0.0,
                                           double mu = 0.0, double noise_sd = 0.1) {
  SyntheticTask t;
  t.kind = TaskKind::PosteriorShift;
  t.source_spec = t.ood_spec = GaussianSpec::standard(2, mu);
  t.target_rule = TargetRule::LinearAB;
  t.ood_target_rule = TargetRule::LinearBA;
  t.coefficients = {intercept, alpha, beta};
  t.noise_sd = noise_sd;
  t.sample_count = n;
  t.seed = seed;
  return t;
}

/// X ~ N(0, I3), Y = X1 X2 + eps; X_ood is the test draw with X3 shifted by +1.
inline SyntheticTask unused_feature_task(Eigen::Index n, std::uint64_t seed, double noise_sd = 0.1) {
  SyntheticTask t;
  t.kind = TaskKind::UnusedFeature;
  t.source_spec = t.ood_spec = GaussianSpec::standard(3);
  t.target_rule = t.ood_target_rule = TargetRule::Product;
  t.noise_sd = noise_sd;
  t.sample_count = n;
  t.seed = seed;
  return t;
}

/// Linear variant of the unused-feature task: Y = a0 + a1 X1 + a2 X2 + eps.
inline SyntheticTask unused_feature_linear_task(Eigen::Index n, std::uint64_t seed, double a0 = 1.0,
                                                double a1 = 2.0, double a2 = 1.0,
                                                double noise_sd = 0.1) {
  SyntheticTask t = unused_feature_task(n, seed, noise_sd);
  t.target_rule = t.ood_target_rule = TargetRule::Linear2of3;
  t.coefficients = {a0, a1, a2};
  return t;
}

}  // namespace xshift

#endif  // XSHIFT_SYNTH_HPP_
