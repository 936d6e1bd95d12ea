#ifndef XSHIFT_EXPLAIN_HPP_
#define XSHIFT_EXPLAIN_HPP_

#include "xshift/core.hpp"
#include "xshift/models.hpp"
#include "xshift/parallel.hpp"
#include "xshift/rng.hpp"
#include "xshift/synth.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xshift {

enum class ExplainMethod { LinearIndependent, GaussianObservational, InterventionalEnumeration };

inline std::string_view to_string(ExplainMethod m) {
  switch (m) {
    case ExplainMethod::LinearIndependent: return "linear-indep";
    case ExplainMethod::GaussianObservational: return "gaussian-obs";
    case ExplainMethod::InterventionalEnumeration: return "interventional";
  }
  return "?";
}

/// Per-sample, per-feature Shapley attributions. Rows sum to f(x) - expected_value.
struct ExplanationMatrix {
  DataMatrix values;
  double expected_value = 0.0;
  ExplainMethod method = ExplainMethod::LinearIndependent;
};

/// Reference sample defining the marginal expectations of the interventional engine.
struct BackgroundSet {
  DataMatrix rows;
  Vector means;

  explicit BackgroundSet(DataMatrix r) : rows(std::move(r)) {
    if (rows.rows() == 0) throw ConfigError("BackgroundSet: empty background");
    means = column_means(rows);
  }
};

inline constexpr Eigen::Index kDefaultBackgroundCap = 2000;

/// All of `x` when it has at most `cap` rows, else `cap` rows drawn uniformly
/// without replacement (partial Fisher-Yates, kept in source order).
inline BackgroundSet make_background(const DataMatrix& x, Eigen::Index cap, std::uint64_t seed) {
  if (x.rows() == 0) throw ConfigError("make_background: empty data");
  if (cap < 1) throw ConfigError("make_background: cap must be positive");
  if (x.rows() <= cap) return BackgroundSet(x);
  std::vector<std::size_t> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  RandomStream rng(seed);
  const auto k = static_cast<std::size_t>(cap);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return BackgroundSet(take_rows(x, idx));
}

// ---------------------------------------------------------------------------
// Coalition enumeration.

inline constexpr int kMaxEnumerationFeatures = 15;
inline constexpr int kMaxObservationalFeatures = 20;

/// weight[s] = s! (p - s - 1)! / p!, numerator and denominator as exact integers.
inline std::vector<double> shapley_weights(int p) {
  if (p < 1 || p > 20) throw ConfigError("shapley_weights: p must be in [1, 20]");
  std::vector<std::uint64_t> fact(static_cast<std::size_t>(p) + 1, 1);
  for (int i = 1; i <= p; ++i) fact[static_cast<std::size_t>(i)] = fact[static_cast<std::size_t>(i - 1)] * static_cast<std::uint64_t>(i);
  std::vector<double> w(static_cast<std::size_t>(p));
  for (int s = 0; s < p; ++s) {
    const std::uint64_t num = fact[static_cast<std::size_t>(s)] * fact[static_cast<std::size_t>(p - s - 1)];
    w[static_cast<std::size_t>(s)] = static_cast<double>(num) / static_cast<double>(fact[static_cast<std::size_t>(p)]);
  }
  return w;
}

/// phi_j = sum over T not containing j of weight[|T|] (val[T | j] - val[T]).
/// `val` is indexed by coalition bitmask.
inline void shapley_from_values(std::span<const double> val, std::span<const double> weights,
                                std::span<double> phi) {
  const auto p = static_cast<int>(phi.size());
  const std::uint32_t full = (1U << p);
  for (int j = 0; j < p; ++j) {
    const std::uint32_t bit = 1U << j;
    double acc = 0.0;
    for (std::uint32_t t = 0; t < full; ++t) {
      if (t & bit) continue;
      const double delta = val[t | bit] - val[t];
      if (delta != 0.0) acc += weights[static_cast<std::size_t>(std::popcount(t))] * delta;
    }
    phi[static_cast<std::size_t>(j)] = acc;
  }
}

// ---------------------------------------------------------------------------
// Linear model, independent features: S_j = a_j (x_j - mu_j).

inline ExplanationMatrix shap_linear_independent(const LinearModel& model, const DataMatrix& x,
                                                 const Vector& mu) {
  if (mu.size() != x.cols() || model.feature_count() != x.cols()) {
    throw ConfigError("shap_linear_independent: dimension mismatch");
  }
  ExplanationMatrix e;
  e.method = ExplainMethod::LinearIndependent;
  e.expected_value = model.intercept + model.coefficients.dot(mu);
  e.values.resize(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) e.values(r, j) = model.coefficients[j] * (x(r, j) - mu[j]);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Linear model, Gaussian features, observational (conditional) value function.
//
// For coalition T, E[X_out | X_T = x_T] = mu_out + Sigma_{out,T} Sigma_{T,T}^{-1} (x_T - mu_T),
// so val(T) = w_T . (x_T - mu_T) with w_T = a_T + Sigma_{T,T}^{-1} Sigma_{T,out} a_out.

namespace detail {

struct CoalitionProjection {
  std::vector<Eigen::Index> members;
  Vector weights;
};

inline std::vector<CoalitionProjection> gaussian_projections(const LinearModel& model, const GaussianSpec& spec) {
  const auto p = static_cast<int>(spec.dim());
  const std::uint32_t full = 1U << p;
  std::vector<CoalitionProjection> out(full);
  const Vector& a = model.coefficients;
  for (std::uint32_t t = 1; t < full; ++t) {
    std::vector<Eigen::Index> in, rest;
    for (int j = 0; j < p; ++j) ((t >> j) & 1U ? in : rest).push_back(j);
    const auto k = static_cast<Eigen::Index>(in.size());
    const auto m = static_cast<Eigen::Index>(rest.size());
    Eigen::MatrixXd s_tt(k, k), s_to(k, m);
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) s_tt(r, c) = spec.covariance(in[r], in[c]);
      for (Eigen::Index c = 0; c < m; ++c) s_to(r, c) = spec.covariance(in[r], rest[c]);
    }
    Vector a_in(k), a_out(m);
    for (Eigen::Index r = 0; r < k; ++r) a_in[r] = a[in[r]];
    for (Eigen::Index r = 0; r < m; ++r) a_out[r] = a[rest[r]];
    Vector w = a_in;
    if (m > 0) {
      Eigen::LLT<Eigen::MatrixXd> llt(s_tt);
      if (llt.info() != Eigen::Success) {
        throw NumericalError("shap_gaussian_observational: singular covariance block for coalition mask " +
                             std::to_string(t));
      }
      w += llt.solve(s_to * a_out);
    }
    out[t] = {std::move(in), std::move(w)};
  }
  return out;
}

}  // namespace detail

inline ExplanationMatrix shap_gaussian_observational(const LinearModel& model, const DataMatrix& x,
                                                     const GaussianSpec& spec, int threads = 1) {
  spec.validate();
  if (spec.dim() != model.feature_count() || spec.dim() != x.cols()) {
    throw ConfigError("shap_gaussian_observational: dimension mismatch");
  }
  if (x.cols() > kMaxObservationalFeatures) {
    throw ConfigError("shap_gaussian_observational: at most 20 features supported");
  }
  const auto p = static_cast<int>(x.cols());
  const auto proj = detail::gaussian_projections(model, spec);
  const auto weights = shapley_weights(p);
  const std::uint32_t full = 1U << p;

  ExplanationMatrix e;
  e.method = ExplainMethod::GaussianObservational;
  e.expected_value = model.intercept + model.coefficients.dot(spec.mean);
  e.values.resize(x.rows(), x.cols());
  parallel_for(x.rows(), threads, [&](Eigen::Index r) {
    std::vector<double> val(full, 0.0);
    for (std::uint32_t t = 1; t < full; ++t) {
      const auto& c = proj[t];
      double acc = 0.0;
      for (std::size_t i = 0; i < c.members.size(); ++i) {
        const auto j = c.members[i];
        acc += c.weights[static_cast<Eigen::Index>(i)] * (x(r, j) - spec.mean[j]);
      }
      val[t] = acc;
    }
    std::vector<double> phi(static_cast<std::size_t>(p));
    shapley_from_values(val, weights, phi);
    for (int j = 0; j < p; ++j) e.values(r, j) = phi[static_cast<std::size_t>(j)];
  });
  return e;
}

// ---------------------------------------------------------------------------
// Interventional value function by exact enumeration:
//   val(T) = mean_b f(x_T, b_rest) - mean_b f(b).

inline void check_enumeration_size(Eigen::Index p) {
  if (p > kMaxEnumerationFeatures) {
    throw ConfigError("shap_interventional: " + std::to_string(p) +
                      " features exceeds the exact-enumeration limit of 15; explain a subset of features instead");
  }
  if (p < 1) throw ConfigError("shap_interventional: no features");
}

/// Model-agnostic engine; costs 2^p * |background| predictions per row.
template <Predictor M>
ExplanationMatrix shap_interventional(const M& model, const DataMatrix& x, const BackgroundSet& background,
                                      int threads = 1) {
  check_enumeration_size(x.cols());
  if (model.feature_count() != x.cols() || background.rows.cols() != x.cols()) {
    throw ConfigError("shap_interventional: dimension mismatch");
  }
  const auto p = static_cast<int>(x.cols());
  const std::uint32_t full = 1U << p;
  const auto weights = shapley_weights(p);
  const DataMatrix& bg = background.rows;
  const auto nb = static_cast<double>(bg.rows());

  double base = 0.0;
  for (Eigen::Index b = 0; b < bg.rows(); ++b) base += model.predict_row(row_span(bg, b));
  base /= nb;

  ExplanationMatrix e;
  e.method = ExplainMethod::InterventionalEnumeration;
  e.expected_value = base;
  e.values.resize(x.rows(), x.cols());
  parallel_for(x.rows(), threads, [&](Eigen::Index r) {
    std::vector<double> val(full), z(static_cast<std::size_t>(p)), phi(static_cast<std::size_t>(p));
    for (std::uint32_t t = 0; t < full; ++t) {
      double acc = 0.0;
      for (Eigen::Index b = 0; b < bg.rows(); ++b) {
        for (int j = 0; j < p; ++j) z[static_cast<std::size_t>(j)] = ((t >> j) & 1U) ? x(r, j) : bg(b, j);
        acc += model.predict_row(z);
      }
      val[t] = acc / nb - base;
    }
    shapley_from_values(val, weights, phi);
    for (int j = 0; j < p; ++j) e.values(r, j) = phi[static_cast<std::size_t>(j)];
  });
  return e;
}

namespace detail {

// One root-to-leaf path with its per-feature interval constraints and, for
// every subset U of the constrained features, the fraction of background rows
// that satisfy the constraints in U.
struct LeafPath {
  double value = 0.0;
  std::vector<int> features;
  std::vector<double> lo, hi;  // x in [lo, hi)
  std::vector<double> bg_fraction;  // indexed by local subset bits
};

struct TreePaths {
  std::vector<LeafPath> leaves;
};

inline void collect_paths(const RegressionTree& tree, int node, LeafPath& cur, std::vector<LeafPath>& out) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) {
    LeafPath leaf = cur;
    leaf.value = n.leaf_value;
    out.push_back(std::move(leaf));
    return;
  }
  auto it = std::find(cur.features.begin(), cur.features.end(), n.feature);
  const bool fresh = it == cur.features.end();
  std::size_t k;
  if (fresh) {
    cur.features.push_back(n.feature);
    cur.lo.push_back(-std::numeric_limits<double>::infinity());
    cur.hi.push_back(std::numeric_limits<double>::infinity());
    k = cur.features.size() - 1;
  } else {
    k = static_cast<std::size_t>(it - cur.features.begin());
  }
  const double old_lo = cur.lo[k];
  const double old_hi = cur.hi[k];
  cur.hi[k] = std::min(old_hi, n.threshold);
  collect_paths(tree, n.left, cur, out);
  cur.hi[k] = old_hi;
  cur.lo[k] = std::max(old_lo, n.threshold);
  collect_paths(tree, n.right, cur, out);
  cur.lo[k] = old_lo;
  if (fresh) {
    cur.features.pop_back();
    cur.lo.pop_back();
    cur.hi.pop_back();
  }
}

inline std::uint32_t satisfied_bits(const LeafPath& leaf, std::span<const double> x) {
  std::uint32_t bits = 0;
  for (std::size_t k = 0; k < leaf.features.size(); ++k) {
    const double v = x[static_cast<std::size_t>(leaf.features[k])];
    if (v >= leaf.lo[k] && v < leaf.hi[k]) bits |= 1U << k;
  }
  return bits;
}

inline std::vector<TreePaths> tree_paths(const GbdtModel& model, const DataMatrix& bg) {
  std::vector<TreePaths> out(model.trees.size());
  const auto nb = static_cast<double>(bg.rows());
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    LeafPath cur;
    collect_paths(model.trees[t], 0, cur, out[t].leaves);
    for (auto& leaf : out[t].leaves) {
      const std::uint32_t subsets = 1U << leaf.features.size();
      std::vector<std::uint64_t> count_exact(subsets, 0);
      for (Eigen::Index b = 0; b < bg.rows(); ++b) ++count_exact[satisfied_bits(leaf, row_span(bg, b))];
      leaf.bg_fraction.assign(subsets, 0.0);
      for (std::uint32_t u = 0; u < subsets; ++u) {
        std::uint64_t c = 0;
        for (std::uint32_t s = 0; s < subsets; ++s) {
          if ((s & u) == u) c += count_exact[s];
        }
        leaf.bg_fraction[u] = static_cast<double>(c) / nb;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Same value function as the generic engine, evaluated per leaf: a background
/// row reaches leaf l under coalition T iff it satisfies the path constraints on
/// the features outside T, so mean_b tree(x_T, b_rest) is a sum over leaves of
/// value * 1[x meets constraints in T] * fraction(constraints outside T).
inline ExplanationMatrix shap_interventional(const GbdtModel& model, const DataMatrix& x,
                                             const BackgroundSet& background, int threads = 1) {
  check_enumeration_size(x.cols());
  if (model.feature_count() != x.cols() || background.rows.cols() != x.cols()) {
    throw ConfigError("shap_interventional: dimension mismatch");
  }
  const auto p = static_cast<int>(x.cols());
  const std::uint32_t full = 1U << p;
  const auto weights = shapley_weights(p);
  const auto paths = detail::tree_paths(model, background.rows);

  // Coalition value before subtracting the baseline, in the model's own
  // accumulation order.
  auto raw_value = [&](std::uint32_t t, std::span<const std::uint32_t> sat) {
    double acc = model.base_score;
    std::size_t li = 0;
    for (const auto& tp : paths) {
      double tree_sum = 0.0;
      for (const auto& leaf : tp.leaves) {
        const std::uint32_t nk = static_cast<std::uint32_t>(leaf.features.size());
        const std::uint32_t all = (1U << nk) - 1U;
        std::uint32_t in = 0;
        for (std::uint32_t k = 0; k < nk; ++k) {
          if ((t >> leaf.features[k]) & 1U) in |= 1U << k;
        }
        if ((in & ~sat[li]) == 0U) tree_sum += leaf.value * leaf.bg_fraction[all & ~in];
        ++li;
      }
      acc += model.learning_rate * tree_sum;
    }
    return acc;
  };

  std::size_t leaf_total = 0;
  for (const auto& tp : paths) leaf_total += tp.leaves.size();
  const std::vector<std::uint32_t> no_sat(leaf_total, 0U);
  const double base = raw_value(0U, no_sat);

  ExplanationMatrix e;
  e.method = ExplainMethod::InterventionalEnumeration;
  e.expected_value = base;
  e.values.resize(x.rows(), x.cols());
  parallel_for(x.rows(), threads, [&](Eigen::Index r) {
    const auto row = row_span(x, r);
    std::vector<std::uint32_t> sat;
    sat.reserve(leaf_total);
    for (const auto& tp : paths) {
      for (const auto& leaf : tp.leaves) sat.push_back(detail::satisfied_bits(leaf, row));
    }
    std::vector<double> val(full), phi(static_cast<std::size_t>(p));
    val[0] = 0.0;
    for (std::uint32_t t = 1; t < full; ++t) val[t] = raw_value(t, sat) - base;
    shapley_from_values(val, weights, phi);
    for (int j = 0; j < p; ++j) e.values(r, j) = phi[static_cast<std::size_t>(j)];
  });
  return e;
}

// ---------------------------------------------------------------------------
// Dispatch.

enum class EngineChoice { Auto, LinearIndependent, GaussianObservational, Interventional };

inline std::string_view to_string(EngineChoice c) {
  switch (c) {
    case EngineChoice::Auto: return "auto";
    case EngineChoice::LinearIndependent: return "linear-indep";
    case EngineChoice::GaussianObservational: return "gaussian-obs";
    case EngineChoice::Interventional: return "interventional";
  }
  return "?";
}

struct ExplainConfig {
  EngineChoice engine = EngineChoice::Auto;
  std::optional<GaussianSpec> spec;
  std::optional<BackgroundSet> background;
  /// Feature means for the independent linear engine; falls back to background or spec means.
  std::optional<Vector> mu;
  int threads = 1;
};

namespace detail {

inline Vector linear_means(const ExplainConfig& cfg) {
  if (cfg.mu) return *cfg.mu;
  if (cfg.background) return cfg.background->means;
  if (cfg.spec) return cfg.spec->mean;
  throw ConfigError("explain: linear-indep engine needs feature means, a background set or a Gaussian spec");
}

}  // namespace detail

/// Linear models: Gaussian spec selects the observational engine, otherwise a
/// background selects interventional enumeration, otherwise means select the
/// closed form.
inline ExplanationMatrix explain(const LinearModel& model, const DataMatrix& x, const ExplainConfig& cfg) {
  switch (cfg.engine) {
    case EngineChoice::LinearIndependent:
      return shap_linear_independent(model, x, detail::linear_means(cfg));
    case EngineChoice::GaussianObservational:
      if (!cfg.spec) throw ConfigError("explain: gaussian-obs engine needs a Gaussian spec");
      return shap_gaussian_observational(model, x, *cfg.spec, cfg.threads);
    case EngineChoice::Interventional:
      if (!cfg.background) throw ConfigError("explain: interventional engine needs a background set");
      return shap_interventional(model, x, *cfg.background, cfg.threads);
    case EngineChoice::Auto:
      if (cfg.spec) return shap_gaussian_observational(model, x, *cfg.spec, cfg.threads);
      if (cfg.background) return shap_interventional(model, x, *cfg.background, cfg.threads);
      if (cfg.mu) return shap_linear_independent(model, x, *cfg.mu);
      throw ConfigError("explain: no Gaussian spec, background set or feature means supplied");
  }
  throw ConfigError("explain: unknown engine");
}

/// Tree ensembles are explained by interventional enumeration only.
inline ExplanationMatrix explain(const GbdtModel& model, const DataMatrix& x, const ExplainConfig& cfg) {
  if (cfg.engine != EngineChoice::Auto && cfg.engine != EngineChoice::Interventional) {
    throw ConfigError("explain: engine " + std::string(to_string(cfg.engine)) +
                      " requires a linear model; use interventional for tree ensembles");
  }
  if (!cfg.background) throw ConfigError("explain: tree ensembles need a background set");
  return shap_interventional(model, x, *cfg.background, cfg.threads);
}

}  // namespace xshift

#endif  // XSHIFT_EXPLAIN_HPP_
