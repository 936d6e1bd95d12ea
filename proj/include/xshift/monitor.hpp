#ifndef XSHIFT_MONITOR_HPP_
#define XSHIFT_MONITOR_HPP_

#include "xshift/core.hpp"
#include "xshift/explain.hpp"
#include "xshift/models.hpp"
#include "xshift/parallel.hpp"
#include "xshift/rng.hpp"
#include "xshift/stats.hpp"
#include "xshift/synth.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace xshift {

// ---------------------------------------------------------------------------
// Model handle used by the experiment procedures.

using AnyModel = std::variant<LinearModel, GbdtModel>;

enum class ModelKind { Linear, Gbdt };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::Linear ? "linear" : "gbdt"; }

inline AnyModel fit_model(ModelKind kind, const DataMatrix& x, const Vector& y, const GbdtParams& params = {}) {
  if (kind == ModelKind::Linear) return fit_ols(x, y);
  return fit_gbdt(x, y, params);
}

inline Vector predict(const AnyModel& model, const DataMatrix& x) {
  return std::visit([&](const auto& m) { return predict(m, x); }, model);
}

inline ExplanationMatrix explain(const AnyModel& model, const DataMatrix& x, const ExplainConfig& cfg) {
  return std::visit([&](const auto& m) { return explain(m, x, cfg); }, model);
}

// ---------------------------------------------------------------------------
// Explanation-shift detection.

struct ShiftConfig {
  EngineChoice engine = EngineChoice::Auto;
  TestMethod test = TestMethod::KS;
  double alpha = 0.05;
  Eigen::Index background_cap = kDefaultBackgroundCap;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Feature distribution for the Gaussian observational engine.
  std::optional<GaussianSpec> spec;
};

/// Explainer settings whose baseline is fixed by the source sample.
inline ExplainConfig source_explain_config(const DataMatrix& x_src, const ShiftConfig& cfg) {
  ExplainConfig e;
  e.engine = cfg.engine;
  e.threads = cfg.threads;
  e.spec = cfg.spec;
  e.mu = column_means(x_src);
  e.background = make_background(x_src, cfg.background_cap, derive_seed(cfg.seed, "background"));
  return e;
}

struct ShiftMetadata {
  std::string engine;
  double expected_value = 0.0;
  std::size_t n_source = 0;
  std::size_t n_new = 0;
  std::size_t background_rows = 0;
  std::uint64_t background_seed = 0;
};

struct ShiftReport {
  std::vector<FeatureComparison> input_results;
  std::vector<FeatureComparison> explanation_results;
  TestResult prediction_result;
  double alpha = 0.05;
  std::size_t distinct_input = 0;
  std::size_t distinct_explanation = 0;
  ShiftMetadata metadata;
};

inline std::size_t count_distinct(const std::vector<FeatureComparison>& v) {
  return static_cast<std::size_t>(
      std::count_if(v.begin(), v.end(), [](const FeatureComparison& c) { return c.distinct.value_or(false); }));
}

/// Compares X_src and X_new in input space, explanation space (same engine and
/// source baseline for both) and prediction space.
inline ShiftReport detect_shift(const AnyModel& model, const DataMatrix& x_src, const DataMatrix& x_new,
                                const ShiftConfig& cfg) {
  if (x_src.cols() != x_new.cols()) throw ConfigError("detect_shift: feature counts differ");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("detect_shift: alpha must be in (0, 1)");
  const ExplainConfig ecfg = source_explain_config(x_src, cfg);
  const ExplanationMatrix s_src = explain(model, x_src, ecfg);
  const ExplanationMatrix s_new = explain(model, x_new, ecfg);

  ShiftReport r;
  r.alpha = cfg.alpha;
  r.input_results = per_feature_compare(x_src, x_new, cfg.test, cfg.alpha);
  r.explanation_results = per_feature_compare(s_src.values, s_new.values, cfg.test, cfg.alpha);
  r.prediction_result = compare(to_std(predict(model, x_src)), to_std(predict(model, x_new)), cfg.test);
  r.distinct_input = count_distinct(r.input_results);
  r.distinct_explanation = count_distinct(r.explanation_results);
  r.metadata.engine = std::string(to_string(s_src.method));
  r.metadata.expected_value = s_src.expected_value;
  r.metadata.n_source = static_cast<std::size_t>(x_src.rows());
  r.metadata.n_new = static_cast<std::size_t>(x_new.rows());
  r.metadata.background_rows = static_cast<std::size_t>(ecfg.background->rows.rows());
  r.metadata.background_seed = derive_seed(cfg.seed, "background");
  return r;
}

// ---------------------------------------------------------------------------
// Named comparisons, one per table row.

inline constexpr std::string_view kDistinct = "Distinct";
inline constexpr std::string_view kNotDistinct = "Not Distinct";

/// A single table row. Multi-feature rows carry their per-feature results and
/// report the feature with the smallest p-value; the row is distinct when any
/// feature is.
struct ComparisonRow {
  std::string name;
  TestResult result;
  std::optional<bool> distinct;
  std::vector<FeatureComparison> per_feature;
};

inline ComparisonRow single_row(std::string name, std::span<const double> a, std::span<const double> b,
                                TestMethod method, double alpha) {
  ComparisonRow row;
  row.name = std::move(name);
  row.result = compare(a, b, method);
  if (row.result.p_value) row.distinct = *row.result.p_value < alpha;
  return row;
}

inline ComparisonRow pooled_row(std::string name, std::vector<FeatureComparison> per_feature) {
  ComparisonRow row;
  row.name = std::move(name);
  if (per_feature.empty()) throw ConfigError("pooled_row: no features");
  const auto* best = &per_feature.front();
  for (const auto& fc : per_feature) {
    if (fc.result.p_value && best->result.p_value && *fc.result.p_value < *best->result.p_value) best = &fc;
  }
  row.result = best->result;
  if (row.result.p_value) row.distinct = count_distinct(per_feature) > 0;
  row.per_feature = std::move(per_feature);
  return row;
}

inline ComparisonRow feature_row(std::string name, const FeatureComparison& fc) {
  ComparisonRow row;
  row.name = std::move(name);
  row.result = fc.result;
  row.distinct = fc.distinct;
  return row;
}

// ---------------------------------------------------------------------------
// Posterior shift: same P(X), different P(Y | X).

struct PosteriorConfig {
  ModelKind model = ModelKind::Gbdt;
  GbdtParams gbdt;
  ShiftConfig shift;
};

struct PosteriorReport {
  std::vector<ComparisonRow> rows;  // X, Y, predictions, explanations
  AnyModel f;
  AnyModel h;
  std::string engine;
};

/// f is trained on (X, Y) and h on (X_ood, Y_ood). Explanations of both models
/// are computed on X with the baseline taken from X.
inline PosteriorReport posterior_shift_experiment(const SyntheticTask& task, const PosteriorConfig& cfg) {
  if (task.kind != TaskKind::PosteriorShift) throw ConfigError("posterior_shift_experiment: task is not a posterior shift");
  const TaskData d = make_task_data(task);
  const double alpha = cfg.shift.alpha;
  const TestMethod test = cfg.shift.test;

  // h sees the source inputs labelled by the shifted rule, so f and h differ only in the posterior.
  const Vector y_ood_on_x = make_targets(task.ood_target_rule, task.coefficients, d.x_train, task.noise_sd,
                                         derive_seed(task.seed, "noise_ood_on_x"));
  PosteriorReport rep{{}, fit_model(cfg.model, d.x_train, d.y_train, cfg.gbdt),
                      fit_model(cfg.model, d.x_train, y_ood_on_x, cfg.gbdt), {}};
  ShiftConfig scfg = cfg.shift;
  if (!scfg.spec && scfg.engine == EngineChoice::GaussianObservational) scfg.spec = task.source_spec;
  const ExplainConfig ecfg = source_explain_config(d.x_train, scfg);
  const ExplanationMatrix s_f = explain(rep.f, d.x_train, ecfg);
  const ExplanationMatrix s_h = explain(rep.h, d.x_train, ecfg);
  rep.engine = std::string(to_string(s_f.method));

  rep.rows.push_back(pooled_row("P(X), P(X^ood)", per_feature_compare(d.x_train, d.x_ood, test, alpha)));
  rep.rows.push_back(single_row("P(Y), P(Y^ood)", to_std(d.y_train), to_std(d.y_ood), test, alpha));
  rep.rows.push_back(single_row("P(f(X)), P(h(X))", to_std(predict(rep.f, d.x_train)),
                                to_std(predict(rep.h, d.x_train)), test, alpha));
  rep.rows.push_back(pooled_row("S(f,X), S(h,X)", per_feature_compare(s_f.values, s_h.values, test, alpha)));
  return rep;
}

// ---------------------------------------------------------------------------
// Degradation quantification from bootstrap distance features.

enum class InputMode { DistributionShift, ExplanationShift, Both, PredictionShift };

inline std::string_view to_string(InputMode m) {
  switch (m) {
    case InputMode::DistributionShift: return "distribution";
    case InputMode::ExplanationShift: return "explanation";
    case InputMode::Both: return "both";
    case InputMode::PredictionShift: return "prediction";
  }
  return "?";
}

inline Eigen::Index feature_count(InputMode mode, Eigen::Index p) {
  switch (mode) {
    case InputMode::DistributionShift:
    case InputMode::ExplanationShift: return p;
    case InputMode::Both: return 2 * p;
    case InputMode::PredictionShift: return 1;
  }
  return 0;
}

/// Inputs, explanations (against a fixed source baseline), predictions and
/// targets of one sample.
struct PreparedSample {
  DataMatrix x;
  DataMatrix shap;
  Vector pred;
  Vector y;
};

inline PreparedSample prepare_sample(const AnyModel& model, const DataMatrix& x, const Vector& y,
                                     const ExplainConfig& ecfg) {
  if (x.rows() != y.size()) throw ConfigError("prepare_sample: row count does not match target length");
  return {x, explain(model, x, ecfg).values, predict(model, x), y};
}

struct DegradationData {
  DataMatrix features;  // B x k
  Vector targets;       // per-bootstrap MSE
};

/// Sorted source columns reused across bootstraps.
class DegradationReference {
 public:
  explicit DegradationReference(const PreparedSample& src) : pred_(to_std(src.pred)) {
    for (Eigen::Index j = 0; j < src.x.cols(); ++j) {
      inputs_.emplace_back(column(src.x, j));
      shap_.emplace_back(column(src.shap, j));
    }
  }

  Eigen::Index feature_count() const { return static_cast<Eigen::Index>(inputs_.size()); }

  /// Distance features of the rows `idx` of `pool`, written into `out`.
  void featurize(const PreparedSample& pool, std::span<const std::size_t> idx, TestMethod method, InputMode mode,
                 std::span<double> out) const {
    std::vector<double> buf(idx.size());
    auto gather = [&](const auto& get) {
      for (std::size_t i = 0; i < idx.size(); ++i) buf[i] = get(static_cast<Eigen::Index>(idx[i]));
    };
    std::size_t k = 0;
    const auto p = static_cast<Eigen::Index>(inputs_.size());
    if (mode == InputMode::DistributionShift || mode == InputMode::Both) {
      for (Eigen::Index j = 0; j < p; ++j) {
        gather([&](Eigen::Index r) { return pool.x(r, j); });
        out[k++] = inputs_[static_cast<std::size_t>(j)].compare(buf, method).statistic;
      }
    }
    if (mode == InputMode::ExplanationShift || mode == InputMode::Both) {
      for (Eigen::Index j = 0; j < p; ++j) {
        gather([&](Eigen::Index r) { return pool.shap(r, j); });
        out[k++] = shap_[static_cast<std::size_t>(j)].compare(buf, method).statistic;
      }
    }
    if (mode == InputMode::PredictionShift) {
      gather([&](Eigen::Index r) { return pool.pred[r]; });
      out[k++] = pred_.compare(buf, method).statistic;
    }
  }

 private:
  std::vector<ReferenceSample> inputs_;
  std::vector<ReferenceSample> shap_;
  ReferenceSample pred_;
};

/// Bootstrap indices: m draws with replacement from [0, pool_rows), seeded per b.
inline std::vector<std::size_t> bootstrap_indices(std::size_t pool_rows, std::size_t m, std::uint64_t seed,
                                                  std::uint64_t b) {
  RandomStream rng(derive_seed(seed, "bootstrap", b));
  std::vector<std::size_t> idx(m);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(pool_rows));
  return idx;
}

/// B bootstrap samples of m rows from `pool`; features are per-column distances
/// to the source, targets are the model's MSE on each bootstrap sample.
inline DegradationData build_degradation_data(const DegradationReference& ref, const PreparedSample& pool,
                                              std::size_t B, std::size_t m, TestMethod method, InputMode mode,
                                              std::uint64_t seed, int threads = 1) {
  if (pool.x.rows() == 0) throw ConfigError("build_degradation_data: empty pool");
  if (B < 1 || m < 1) throw ConfigError("build_degradation_data: B and m must be positive");
  if (pool.x.cols() != ref.feature_count()) throw ConfigError("build_degradation_data: feature count mismatch");
  const auto k = feature_count(mode, ref.feature_count());
  DegradationData out{DataMatrix(static_cast<Eigen::Index>(B), k), Vector(static_cast<Eigen::Index>(B))};
  parallel_for(static_cast<Eigen::Index>(B), threads, [&](Eigen::Index b) {
    const auto idx = bootstrap_indices(static_cast<std::size_t>(pool.x.rows()), m, seed, static_cast<std::uint64_t>(b));
    std::vector<double> feats(static_cast<std::size_t>(k));
    ref.featurize(pool, idx, method, mode, feats);
    for (Eigen::Index c = 0; c < k; ++c) out.features(b, c) = feats[static_cast<std::size_t>(c)];
    double acc = 0.0;
    for (auto i : idx) {
      const double e = pool.pred[static_cast<Eigen::Index>(i)] - pool.y[static_cast<Eigen::Index>(i)];
      acc += e * e;
    }
    out.targets[b] = acc / static_cast<double>(m);
  });
  return out;
}

/// Convenience form: prepares source and pool with the source baseline first.
inline DegradationData build_degradation_data(const AnyModel& model, const DataMatrix& x_src, const Vector& y_src,
                                              const DataMatrix& pool_x, const Vector& pool_y, std::size_t B,
                                              std::size_t m, TestMethod method, InputMode mode, std::uint64_t seed,
                                              const ShiftConfig& cfg = {}) {
  const ExplainConfig ecfg = source_explain_config(x_src, cfg);
  const DegradationReference ref(prepare_sample(model, x_src, y_src, ecfg));
  return build_degradation_data(ref, prepare_sample(model, pool_x, pool_y, ecfg), B, m, method, mode, seed,
                                cfg.threads);
}

struct DegradationModel {
  LinearModel estimator;
  TestMethod distance_method = TestMethod::Wasserstein1;
  InputMode input_mode = InputMode::ExplanationShift;
  std::size_t B = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  bool ridge_fallback = false;
};

inline constexpr double kRidgeFallbackLambda = 1e-6;

/// OLS of targets on distance features; falls back to ridge (lambda = 1e-6)
/// when the features are rank deficient.
inline DegradationModel fit_degradation(const DataMatrix& features, const Vector& targets) {
  DegradationModel g;
  try {
    g.estimator = fit_ols(features, targets);
  } catch (const NumericalError&) {
    g.estimator = fit_ridge(features, targets, kRidgeFallbackLambda);
    g.ridge_fallback = true;
  }
  return g;
}

struct DegradationScore {
  double mae = 0.0;
  double mean_predicted_decay = 0.0;  // mean(g(features) - train_mse)
  double mean_realized_decay = 0.0;   // mean(target - train_mse)
};

inline DegradationScore score_predictions(const Vector& predicted, const Vector& targets, double train_mse) {
  if (predicted.size() != targets.size() || targets.size() == 0) throw ConfigError("degradation: shape mismatch");
  DegradationScore s;
  s.mae = (predicted - targets).cwiseAbs().mean();
  s.mean_predicted_decay = predicted.mean() - train_mse;
  s.mean_realized_decay = targets.mean() - train_mse;
  return s;
}

inline DegradationScore evaluate_degradation(const DegradationModel& g, const DataMatrix& features,
                                             const Vector& targets, double train_mse) {
  return score_predictions(predict(g.estimator, features), targets, train_mse);
}

/// Baseline predicting the mean training target for every bootstrap.
inline DegradationScore evaluate_dummy(const Vector& train_targets, const Vector& targets, double train_mse) {
  if (train_targets.size() == 0) throw ConfigError("degradation: empty training targets");
  return score_predictions(Vector::Constant(targets.size(), train_targets.mean()), targets, train_mse);
}

// ---------------------------------------------------------------------------
// Equal opportunity fairness.

struct FairnessResult {
  std::map<std::string, double> tpr_by_group;
  std::string reference;
  std::string protected_group;
  double eof = 0.0;  // TPR(reference) - TPR(protected)
};

/// TPR = TP / (TP + FN) per group; labels and predictions must be 0 or 1.
inline FairnessResult fairness_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                                       std::span<const std::string> groups, const std::string& reference,
                                       const std::string& protected_group) {
  if (y_true.size() != y_pred.size() || y_true.size() != groups.size()) {
    throw ConfigError("fairness_metrics: input lengths differ");
  }
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // (tp, positives)
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if ((y_true[i] != 0 && y_true[i] != 1) || (y_pred[i] != 0 && y_pred[i] != 1)) {
      throw ConfigError("fairness_metrics: labels must be 0 or 1");
    }
    auto& c = counts[groups[i]];
    if (y_true[i] == 1) {
      ++c.second;
      if (y_pred[i] == 1) ++c.first;
    }
  }
  for (const auto* g : {&reference, &protected_group}) {
    if (!counts.contains(*g)) throw ConfigError("fairness_metrics: group '" + *g + "' not present");
  }
  FairnessResult r;
  r.reference = reference;
  r.protected_group = protected_group;
  for (const auto& [g, c] : counts) {
    if (c.second == 0) {
      if (g == reference || g == protected_group) {
        throw ConfigError("fairness_metrics: TPR undefined for group '" + g + "' (no positive labels)");
      }
      continue;
    }
    r.tpr_by_group[g] = static_cast<double>(c.first) / static_cast<double>(c.second);
  }
  r.eof = r.tpr_by_group.at(reference) - r.tpr_by_group.at(protected_group);
  return r;
}

}  // namespace xshift

#endif  // XSHIFT_MONITOR_HPP_
