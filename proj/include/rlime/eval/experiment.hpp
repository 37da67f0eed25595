#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlime/attack/attack.hpp"
#include "rlime/ctgan/ctgan.hpp"
#include "rlime/dataio/dataset.hpp"
#include "rlime/explain/lime.hpp"

namespace rlime::eval {

// One dataset of the grid. Either data+schema name files on disk, or the
// surrogate generator of `kind` is used with surrogate_seed.
struct DatasetSpec {
  std::string name;
  std::string kind;  // compas | german | communities
  std::string data;
  std::string schema;
  std::uint64_t surrogate_seed = 0;
  std::size_t surrogate_rows = 0;  // 0 -> generator default
  std::vector<std::size_t> k;      // empty -> default for kind

  static DatasetSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

std::vector<std::size_t> default_k(const std::string& kind);

struct ExperimentConfig {
  std::vector<DatasetSpec> datasets;
  std::uint64_t seed = 0;
  double test_fraction = 0.1;
  double ctgan_validation_fraction = 0.1;
  std::size_t max_instances = 250;
  double tau_percentile = 50.0;
  ctgan::CtganConfig ctgan{};
  explain::ExplainConfig explain{};
  attack::AttackConfig attack{};
  std::size_t precision_k = 3;
  std::size_t min_matches = 25;
  std::size_t pca_points = 500;
  // Neighborhood realism: instances and samples per instance.
  std::size_t realism_instances = 20;
  std::size_t realism_samples = 500;
  // Directory of reusable CTGAN bundles keyed by dataset and config; empty
  // disables caching.
  std::string bundle_cache;
  int jobs = 1;  // not part of the report; results do not depend on it

  // Every key is optional; missing keys keep the defaults above. Relative
  // data paths resolve against base_dir.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
  static ExperimentConfig load(const std::filesystem::path& path);
};

enum class EvalSetting { kClean, kBlackbox, kWhitebox };
std::string eval_setting_name(EvalSetting s);

// One (dataset, setting, explainer) row. Accuracies and precision in [0,100].
struct EvalReport {
  std::string dataset;
  EvalSetting setting = EvalSetting::kClean;
  explain::SamplerKind explainer = explain::SamplerKind::kVanilla;
  std::map<std::size_t, double> topk;  // k -> accuracy
  std::optional<double> precision_mean;
  std::optional<double> precision_std;
  std::size_t n_instances = 0;
  std::size_t n_failed = 0;  // explanations that could not be built (count as misses)
  std::map<std::string, std::uint64_t> seeds;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

struct DatasetDiagnostics {
  std::string dataset;
  double tau = 0.0;
  double blackbox_critic_accuracy = 0.0;
  double whitebox_critic_accuracy = 0.0;
  double wasserstein_vanilla = 0.0;
  double wasserstein_ctgan = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct PcaPoint {
  std::string source;  // real | vanilla | ctgan
  double pc1 = 0.0;
  double pc2 = 0.0;
};

struct ExperimentResult {
  std::vector<EvalReport> reports;
  std::vector<DatasetDiagnostics> diagnostics;
  std::map<std::string, std::vector<PcaPoint>> pca;  // by dataset
  std::vector<std::string> failures;                // "<dataset>: <message>"
  std::map<std::string, double> timing;             // seconds by stage
  bool ok() const { return failures.empty(); }

  // Everything except timing, so identical runs serialize identically.
  nlohmann::json report_json(const ExperimentConfig& cfg) const;
  const EvalReport* find(const std::string& dataset, EvalSetting s, explain::SamplerKind e) const;
};

// Runs every dataset of the grid. A failing dataset is recorded in
// `failures` and the rest still run.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// n_points real rows, n_points vanilla perturbations of one instance and
// n_points CTGAN samples conditioned on the same instance, projected on the
// first two principal components of the real standardized numeric columns.
// The instance is a seeded random row of `real` unless given.
std::vector<PcaPoint> pca_scatter(const dataio::Dataset& real, const dataio::Transformer& t,
                                  const ctgan::CtganModel& model, std::size_t n_points,
                                  std::uint64_t seed,
                                  std::optional<RowVector> instance = std::nullopt);
void emit_pca_scatter(const std::vector<PcaPoint>& points, const std::filesystem::path& path);

struct Realism {
  double vanilla = 0.0;
  double ctgan = 0.0;
};
// Mean over instances of the mean standardized 1-D Wasserstein distance
// between each neighborhood (x itself excluded) and the real rows, numeric
// columns only.
Realism neighborhood_realism(const dataio::Dataset& real, const Matrix& instances,
                             const dataio::Transformer& t, const ctgan::CtganModel& model,
                             std::size_t n_samples, std::uint64_t seed);

// table_blackbox.csv, table_whitebox.csv, table_clean.csv,
// table_precision.csv, pca_scatter.csv, report.json, timing.json.
void write_outputs(const ExperimentResult& r, const ExperimentConfig& cfg,
                   const std::filesystem::path& dir);

}  // namespace rlime::eval
