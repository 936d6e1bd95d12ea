#ifndef XSHIFT_CLI_HPP_
#define XSHIFT_CLI_HPP_

#include "xshift/experiments.hpp"
#include "xshift/report.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace xshift::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;
inline constexpr int kExitInternal = 1;

inline constexpr Eigen::Index kQuickSampleCount = 5000;
inline constexpr std::size_t kQuickB = 200;
inline constexpr std::size_t kQuickM = 500;

inline std::string error_object(std::string_view kind, std::string_view message, int code) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
  return j.dump() + "\n";
}

inline std::uint64_t parse_seed(const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(text, &pos, 0);
  } catch (const std::exception&) {
    throw ConfigError("XSHIFT_SEED is not an unsigned 64-bit integer: '" + text + "'");
  }
  if (pos != text.size()) throw ConfigError("XSHIFT_SEED is not an unsigned 64-bit integer: '" + text + "'");
  return static_cast<std::uint64_t>(v);
}

struct ParsedRun {
  ExperimentConfig config;
  bool help = false;
};

/// Parses `run` arguments into a config; throws ConfigError on bad input.
/// `env_seed` stands in for XSHIFT_SEED.
inline ParsedRun parse_arguments(const std::vector<std::string>& args, const char* env_seed, std::ostream& help_out) {
  CLI::App app{"Explanation-shift experiments on synthetic data", "xshift"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  CLI::App* run = app.add_subcommand("run", "Run one experiment and emit a report");

  ExperimentConfig c;
  const std::map<std::string, ExperimentKind> experiments{{"multivariate", ExperimentKind::Multivariate},
                                                          {"posterior", ExperimentKind::Posterior},
                                                          {"unused", ExperimentKind::Unused},
                                                          {"quantify", ExperimentKind::Quantify},
                                                          {"fairness-demo", ExperimentKind::FairnessDemo}};
  const std::map<std::string, EngineChoice> engines{{"auto", EngineChoice::Auto},
                                                    {"linear-indep", EngineChoice::LinearIndependent},
                                                    {"gaussian-obs", EngineChoice::GaussianObservational},
                                                    {"interventional", EngineChoice::Interventional}};
  const std::map<std::string, TestMethod> distances{
      {"ks", TestMethod::KS}, {"wasserstein", TestMethod::Wasserstein1}, {"psi", TestMethod::PSI}};
  const std::map<std::string, InputMode> modes{{"distribution", InputMode::DistributionShift},
                                               {"explanation", InputMode::ExplanationShift},
                                               {"both", InputMode::Both},
                                               {"prediction", InputMode::PredictionShift}};
  const std::map<std::string, OutputFormat> formats{
      {"json", OutputFormat::Json}, {"csv", OutputFormat::Csv}, {"markdown", OutputFormat::Markdown}};
  const std::map<std::string, ModelKind> models{{"gbdt", ModelKind::Gbdt}, {"linear", ModelKind::Linear}};

  std::optional<Eigen::Index> n;
  std::optional<std::size_t> B;
  std::optional<std::size_t> m;
  std::string experiment, engine = "interventional", distance = "wasserstein", mode = "explanation", format = "json",
                           model = "gbdt";
  auto choice = [&](const char* flag, std::string& target, const auto& table, const char* help) {
    std::vector<std::string> names;
    for (const auto& kv : table) names.push_back(kv.first);
    return run->add_option(flag, target, help)->check(CLI::IsMember(names));
  };
  choice("--experiment", experiment, experiments, "multivariate, posterior, unused, quantify or fairness-demo")
      ->required();
  run->add_option("--n", n, "Sample count per split (default 50000)");
  run->add_option("--seed", c.seed, "Base seed; XSHIFT_SEED overrides");
  run->add_option("--alpha", c.alpha, "Significance level (default 0.05)");
  choice("--engine", engine, engines, "Explanation engine (default interventional)");
  choice("--distance", distance, distances, "Distance for quantify (default wasserstein)");
  choice("--input-mode", mode, modes, "Degradation features for quantify (default explanation)");
  run->add_option("--B", B, "Bootstrap count (default 2000)");
  run->add_option("--m", m, "Bootstrap size (default 1000)");
  choice("--format", format, formats, "json, csv or markdown (default json)");
  run->add_option("--out", c.output_path, "Also write the report to this path");
  run->add_flag("--quick", c.quick, "n=5000, B=200, m=500 unless given explicitly");
  choice("--model", model, models, "gbdt or linear (default gbdt)");
  run->add_option("--threads", c.threads, "Worker threads for explanations and bootstraps (0 = all cores)");
  run->add_flag("--timings", c.timings, "Attach wall-clock timings (output is then not reproducible)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    help_out << (run->parsed() ? run->help() : app.help());
    return {c, true};
  } catch (const CLI::CallForVersion&) {
    help_out << kVersion << "\n";
    return {c, true};
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  c.experiment = experiments.at(experiment);
  c.engine = engines.at(engine);
  c.distance = distances.at(distance);
  c.input_mode = modes.at(mode);
  c.format = formats.at(format);
  c.model = models.at(model);
  if (c.quick) {
    c.n = kQuickSampleCount;
    c.B = kQuickB;
    c.m = kQuickM;
  }
  if (n) c.n = *n;
  if (B) c.B = *B;
  if (m) c.m = *m;
  if (env_seed && *env_seed) c.seed = parse_seed(env_seed);
  c.validate();
  return {c, false};
}

/// Entry point shared by the executable and the tests.
inline int main(const std::vector<std::string>& args, const char* env_seed, std::ostream& out, std::ostream& err) {
  try {
    const ParsedRun parsed = parse_arguments(args, env_seed, out);
    if (parsed.help) return kExitOk;
    const Report report = run(parsed.config);
    const std::string text = emit(report, parsed.config.format);
    if (!parsed.config.output_path.empty()) {
      std::ofstream f(parsed.config.output_path, std::ios::binary);
      if (!f || !(f << text) || !f.flush()) {
        out << error_object("io", "cannot write '" + parsed.config.output_path + "'", kExitIo);
        return kExitIo;
      }
    }
    out << text;
    return kExitOk;
  } catch (const ConfigError& e) {
    out << error_object("usage", e.what(), kExitUsage);
    err << "xshift: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    out << error_object("numerical", e.what(), kExitNumerical);
    err << "xshift: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    out << error_object("internal", e.what(), kExitInternal);
    err << "xshift: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace xshift::cli

#endif  // XSHIFT_CLI_HPP_
