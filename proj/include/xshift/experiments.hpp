#ifndef XSHIFT_EXPERIMENTS_HPP_
#define XSHIFT_EXPERIMENTS_HPP_

#include "xshift/core.hpp"
#include "xshift/explain.hpp"
#include "xshift/models.hpp"
#include "xshift/monitor.hpp"
#include "xshift/report.hpp"
#include "xshift/rng.hpp"
#include "xshift/stats.hpp"
#include "xshift/synth.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xshift {

enum class ExperimentKind { Multivariate, Posterior, Unused, Quantify, FairnessDemo };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Multivariate: return "multivariate";
    case ExperimentKind::Posterior: return "posterior";
    case ExperimentKind::Unused: return "unused";
    case ExperimentKind::Quantify: return "quantify";
    case ExperimentKind::FairnessDemo: return "fairness-demo";
  }
  return "?";
}

inline constexpr Eigen::Index kMinSampleCount = 100;

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Multivariate;
  Eigen::Index n = 50000;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  EngineChoice engine = EngineChoice::Interventional;
  TestMethod distance = TestMethod::Wasserstein1;
  InputMode input_mode = InputMode::ExplanationShift;
  std::size_t B = 2000;
  std::size_t m = 1000;
  ModelKind model = ModelKind::Gbdt;
  GbdtParams gbdt;
  double noise_sd = 0.1;
  Eigen::Index background_cap = kDefaultBackgroundCap;
  int threads = 1;
  OutputFormat format = OutputFormat::Json;
  std::string output_path;
  bool quick = false;
  bool timings = false;

  void validate() const {
    if (n < kMinSampleCount) throw ConfigError("n must be at least 100");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
    if (B < 1 || m < 1) throw ConfigError("B and m must be positive");
    if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
    if (background_cap < 1) throw ConfigError("background cap must be positive");
    gbdt.validate();
  }
};

inline nlohmann::ordered_json config_echo(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["experiment"] = to_string(c.experiment);
  j["n"] = c.n;
  j["seed"] = c.seed;
  j["alpha"] = c.alpha;
  j["engine"] = to_string(c.engine);
  j["distance"] = to_string(c.distance);
  j["input_mode"] = to_string(c.input_mode);
  j["B"] = c.B;
  j["m"] = c.m;
  j["model"] = to_string(c.model);
  j["gbdt"] = {{"rounds", c.gbdt.rounds},
               {"max_depth", c.gbdt.max_depth},
               {"learning_rate", c.gbdt.learning_rate},
               {"min_samples_leaf", c.gbdt.min_samples_leaf}};
  j["noise_sd"] = c.noise_sd;
  j["background_cap"] = c.background_cap;
  j["format"] = to_string(c.format);
  j["quick"] = c.quick;
  return j;
}

namespace detail {

inline std::string verdict(std::optional<bool> distinct) {
  return std::string(distinct.value_or(false) ? kDistinct : kNotDistinct);
}

inline ReportRow to_report_row(const ComparisonRow& c) {
  ReportRow r;
  r.comparison = c.name;
  r.metric = std::string(to_string(c.result.method));
  r.statistic = c.result.statistic;
  r.p_value = c.result.p_value;
  if (c.distinct) r.verdict = verdict(c.distinct);
  return r;
}

inline Report base_report(const ExperimentConfig& cfg, TableLayout layout) {
  Report r;
  r.experiment = std::string(to_string(cfg.experiment));
  r.layout = layout;
  r.config = config_echo(cfg);
  r.seeds["base"] = cfg.seed;
  r.notes["noise_sd"] = "interpreted as standard deviation";
  return r;
}

inline void record_task_seeds(Report& r, const SyntheticTask& task) {
  for (const char* label : {"x_train", "x_test", "x_ood", "noise_train", "noise_test", "noise_ood"}) {
    r.seeds[label] = derive_seed(task.seed, label);
  }
}

inline void record_model(Report& r, const ExperimentConfig& cfg) {
  r.notes["model"] = std::string(to_string(cfg.model));
  if (cfg.model == ModelKind::Gbdt) {
    r.notes["gbdt_params"] = "rounds=" + std::to_string(cfg.gbdt.rounds) +
                             " max_depth=" + std::to_string(cfg.gbdt.max_depth) +
                             " learning_rate=" + detail::format_double(cfg.gbdt.learning_rate) +
                             " min_samples_leaf=" + std::to_string(cfg.gbdt.min_samples_leaf);
  }
}

inline ShiftConfig shift_config(const ExperimentConfig& cfg, TestMethod test) {
  ShiftConfig s;
  s.engine = cfg.engine;
  s.test = test;
  s.alpha = cfg.alpha;
  s.background_cap = cfg.background_cap;
  s.seed = cfg.seed;
  s.threads = cfg.threads;
  return s;
}

}  // namespace detail

/// Input and explanation distributions under a change of feature correlation only.
inline Report run_multivariate(const ExperimentConfig& cfg) {
  const SyntheticTask task = multivariate_shift_task(cfg.n, cfg.seed, 0.2, cfg.noise_sd);
  const TaskData d = make_task_data(task);
  const AnyModel f = fit_model(cfg.model, d.x_train, d.y_train, cfg.gbdt);
  ShiftConfig scfg = detail::shift_config(cfg, TestMethod::KS);
  scfg.spec = task.source_spec;
  const ShiftReport sr = detect_shift(f, d.x_train, d.x_ood, scfg);

  Report r = detail::base_report(cfg, TableLayout::Tests);
  detail::record_task_seeds(r, task);
  detail::record_model(r, cfg);
  r.seeds["background"] = sr.metadata.background_seed;
  r.engine = sr.metadata.engine;
  r.notes["background_rows"] = std::to_string(sr.metadata.background_rows);
  for (const auto& fc : sr.input_results) {
    const auto j = std::to_string(fc.feature + 1);
    r.rows.push_back(detail::to_report_row(feature_row("P(X" + j + "), P(X" + j + "^ood)", fc)));
  }
  for (const auto& fc : sr.explanation_results) {
    const auto j = std::to_string(fc.feature + 1);
    r.rows.push_back(detail::to_report_row(feature_row("S" + j + "(f,X), S" + j + "(f,X^ood)", fc)));
  }
  return r;
}

/// Same inputs, changed P(Y | X): two models compared through their explanations.
inline Report run_posterior(const ExperimentConfig& cfg) {
  const SyntheticTask task = cfg.model == ModelKind::Linear
                                 ? posterior_linear_task(cfg.n, cfg.seed, 2.0, 1.0, 0.0, 1.0, cfg.noise_sd)
                                 : posterior_shift_task(cfg.n, cfg.seed, cfg.noise_sd);
  PosteriorConfig pcfg;
  pcfg.model = cfg.model;
  pcfg.gbdt = cfg.gbdt;
  pcfg.shift = detail::shift_config(cfg, TestMethod::KS);
  pcfg.shift.spec = task.source_spec;
  const PosteriorReport pr = posterior_shift_experiment(task, pcfg);

  Report r = detail::base_report(cfg, TableLayout::Tests);
  detail::record_task_seeds(r, task);
  detail::record_model(r, cfg);
  r.seeds["background"] = derive_seed(cfg.seed, "background");
  r.engine = pr.engine;
  r.notes["targets"] = std::string(to_string(task.target_rule)) + " vs " + std::string(to_string(task.ood_target_rule));
  for (const auto& row : pr.rows) r.rows.push_back(detail::to_report_row(row));
  return r;
}

/// Shift of a feature the target does not depend on.
inline Report run_unused(const ExperimentConfig& cfg) {
  const SyntheticTask task = cfg.model == ModelKind::Linear ? unused_feature_linear_task(cfg.n, cfg.seed, 1.0, 2.0, 1.0, cfg.noise_sd)
                                                            : unused_feature_task(cfg.n, cfg.seed, cfg.noise_sd);
  const TaskData d = make_task_data(task);
  const AnyModel f = fit_model(cfg.model, d.x_train, d.y_train, cfg.gbdt);
  ShiftConfig scfg = detail::shift_config(cfg, TestMethod::KS);
  scfg.spec = task.source_spec;
  const ExplainConfig ecfg = source_explain_config(d.x_train, scfg);
  const ExplanationMatrix s_te = explain(f, d.x_test, ecfg);
  const ExplanationMatrix s_ood = explain(f, d.x_ood, ecfg);

  auto losses = [&](const DataMatrix& x, const Vector& y) {
    const Vector e = predict(f, x) - y;
    return to_std(e.array().square().matrix().eval());
  };

  Report r = detail::base_report(cfg, TableLayout::Tests);
  detail::record_task_seeds(r, task);
  detail::record_model(r, cfg);
  r.seeds["background"] = derive_seed(cfg.seed, "background");
  r.engine = std::string(to_string(s_te.method));
  if (const auto* g = std::get_if<GbdtModel>(&f)) {
    r.notes["model_uses_x3"] = g->uses_feature(2) ? "true" : "false";
  } else {
    r.notes["model_uses_x3"] = std::get<LinearModel>(f).coefficients[2] != 0.0 ? "true" : "false";
  }
  r.rows.push_back(detail::to_report_row(
      single_row("P(X3^te), P(X3^ood)", column(d.x_test, 2), column(d.x_ood, 2), TestMethod::KS, cfg.alpha)));
  r.rows.push_back(detail::to_report_row(single_row("L(f,X^te), L(f,X^ood)", losses(d.x_test, d.y_test),
                                                    losses(d.x_ood, d.y_ood), TestMethod::KS, cfg.alpha)));
  r.rows.push_back(detail::to_report_row(pooled_row(
      "S(f,X^te), S(f,X^ood)", per_feature_compare(s_te.values, s_ood.values, TestMethod::KS, cfg.alpha))));
  return r;
}

// ---------------------------------------------------------------------------
// Degradation quantification.

struct QuantifyResult {
  double train_mse = 0.0;
  DegradationScore dummy;
  struct ModeScore {
    InputMode mode;
    DegradationScore score;
    bool ridge_fallback = false;
  };
  std::vector<ModeScore> modes;
  std::uint64_t train_seed = 0;
  std::uint64_t eval_seed = 0;
};

/// f is trained on the training split; the distance reference is the training
/// split explained against its own background. g is fitted on bootstraps of the
/// held-out source split and scored on bootstraps of the out-of-distribution
/// sample. All modes share the same bootstrap indices.
inline QuantifyResult quantify_degradation(const TaskData& d, const AnyModel& f, std::size_t B, std::size_t m,
                                           TestMethod method, const std::vector<InputMode>& modes,
                                           const ShiftConfig& scfg) {
  const ExplainConfig ecfg = source_explain_config(d.x_train, scfg);
  const PreparedSample src = prepare_sample(f, d.x_train, d.y_train, ecfg);
  const PreparedSample source_pool = prepare_sample(f, d.x_test, d.y_test, ecfg);
  const PreparedSample ood_pool = prepare_sample(f, d.x_ood, d.y_ood, ecfg);
  const DegradationReference ref(src);

  QuantifyResult q;
  q.train_mse = mean_squared_error(to_std(src.pred), to_std(src.y));
  q.train_seed = derive_seed(scfg.seed, "bootstrap_train");
  q.eval_seed = derive_seed(scfg.seed, "bootstrap_eval");
  bool have_dummy = false;
  for (InputMode mode : modes) {
    const auto tr = build_degradation_data(ref, source_pool, B, m, method, mode, q.train_seed, scfg.threads);
    const auto ev = build_degradation_data(ref, ood_pool, B, m, method, mode, q.eval_seed, scfg.threads);
    if (!have_dummy) {
      q.dummy = evaluate_dummy(tr.targets, ev.targets, q.train_mse);
      have_dummy = true;
    }
    const DegradationModel g = fit_degradation(tr.features, tr.targets);
    q.modes.push_back({mode, evaluate_degradation(g, ev.features, ev.targets, q.train_mse), g.ridge_fallback});
  }
  return q;
}

inline std::string mode_label(InputMode mode) {
  switch (mode) {
    case InputMode::DistributionShift: return "Distribution Shift";
    case InputMode::ExplanationShift: return "Explanation Shift";
    case InputMode::Both: return "Exp+Dist Shift";
    case InputMode::PredictionShift: return "Prediction Shift";
  }
  return "?";
}

inline Report run_quantify(const ExperimentConfig& cfg) {
  const SyntheticTask task = multivariate_shift_task(cfg.n, cfg.seed, 0.2, cfg.noise_sd);
  const TaskData d = make_task_data(task);
  const AnyModel f = fit_model(cfg.model, d.x_train, d.y_train, cfg.gbdt);
  const ShiftConfig scfg = detail::shift_config(cfg, cfg.distance);
  const QuantifyResult q = quantify_degradation(d, f, cfg.B, cfg.m, cfg.distance, {cfg.input_mode}, scfg);

  Report r = detail::base_report(cfg, TableLayout::Quantification);
  detail::record_task_seeds(r, task);
  detail::record_model(r, cfg);
  r.seeds["background"] = derive_seed(cfg.seed, "background");
  r.seeds["bootstrap_train"] = q.train_seed;
  r.seeds["bootstrap_eval"] = q.eval_seed;
  r.engine = cfg.input_mode == InputMode::ExplanationShift || cfg.input_mode == InputMode::Both
                 ? std::string(to_string(ExplainMethod::InterventionalEnumeration))
                 : "none";
  if (cfg.model == ModelKind::Linear && r.engine != "none") r.engine = std::string(to_string(cfg.engine));
  r.notes["degradation_training_pool"] = "held-out source split";
  r.notes["degradation_evaluation_pool"] = "out-of-distribution sample";
  r.notes["train_mse"] = detail::format_double(q.train_mse);
  r.rows.push_back({"Dummy Mean Regressor", "mae", q.dummy.mae, std::nullopt, std::nullopt});
  for (const auto& ms : q.modes) {
    r.rows.push_back({mode_label(ms.mode), std::string(to_string(cfg.distance)), ms.score.mae, std::nullopt, std::nullopt});
    if (ms.ridge_fallback) r.notes["ridge_fallback_" + std::string(to_string(ms.mode))] = "lambda=1e-6";
  }
  return r;
}

// ---------------------------------------------------------------------------
// Fairness demo.

/// Binary labels Y = 1[x1 + x2 + gamma * 1[A = 0] > 0] with a protected
/// attribute A; a linear probability model on (x1, x2, A) thresholded at 0.5.
/// Reports per-group TPR, equal opportunity fairness and the mean absolute
/// attribution of A.
inline Report run_fairness_demo(const ExperimentConfig& cfg, double gamma = 1.0) {
  const Eigen::Index n = cfg.n;
  const DataMatrix z = sample_mvn(GaussianSpec::standard(2), n, derive_seed(cfg.seed, "fair_x"));
  RandomStream group_rng(derive_seed(cfg.seed, "fair_group"));
  DataMatrix x(n, 3);
  Vector y(n);
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<std::string> groups(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = group_rng.uniform() < 0.5 ? 1.0 : 0.0;
    x(i, 0) = z(i, 0);
    x(i, 1) = z(i, 1);
    x(i, 2) = a;
    const int label = (z(i, 0) + z(i, 1) + (a == 0.0 ? gamma : 0.0)) > 0.0 ? 1 : 0;
    labels[static_cast<std::size_t>(i)] = label;
    y[i] = label;
    groups[static_cast<std::size_t>(i)] = a == 1.0 ? "A=1" : "A=0";
  }
  const LinearModel f = fit_ols(x, y);
  const Vector scores = predict(f, x);
  std::vector<int> pred(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pred[static_cast<std::size_t>(i)] = scores[i] > 0.5 ? 1 : 0;
  const FairnessResult fr = fairness_metrics(labels, pred, groups, "A=0", "A=1");
  const ExplanationMatrix s = shap_linear_independent(f, x, column_means(x));

  Report r = detail::base_report(cfg, TableLayout::Metrics);
  r.seeds["fair_x"] = derive_seed(cfg.seed, "fair_x");
  r.seeds["fair_group"] = derive_seed(cfg.seed, "fair_group");
  r.engine = std::string(to_string(s.method));
  r.notes["model"] = "linear probability model thresholded at 0.5";
  r.notes["gamma"] = detail::format_double(gamma);
  for (const auto& [g, tpr] : fr.tpr_by_group) r.rows.push_back({"TPR " + g, "tpr", tpr, std::nullopt, std::nullopt});
  r.rows.push_back({"EOF (A=0 minus A=1)", "eof", fr.eof, std::nullopt, std::nullopt});
  r.rows.push_back({"mean |S_A|", "shap", s.values.col(2).cwiseAbs().mean(), std::nullopt, std::nullopt});
  return r;
}

// ---------------------------------------------------------------------------

/// Runs one experiment and returns its report. Wall-clock timings are only
/// attached when requested, since they would break byte-identical output.
inline Report run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Report r;
  switch (cfg.experiment) {
    case ExperimentKind::Multivariate: r = run_multivariate(cfg); break;
    case ExperimentKind::Posterior: r = run_posterior(cfg); break;
    case ExperimentKind::Unused: r = run_unused(cfg); break;
    case ExperimentKind::Quantify: r = run_quantify(cfg); break;
    case ExperimentKind::FairnessDemo: r = run_fairness_demo(cfg); break;
  }
  if (cfg.timings) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    r.timings = std::map<std::string, double>{{"total_seconds", dt.count()}};
  }
  return r;
}

}  // namespace xshift

#endif  // XSHIFT_EXPERIMENTS_HPP_
