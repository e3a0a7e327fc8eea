#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "json.hpp"
#include "severitas/ingest.hpp"
#include "severitas/model.hpp"
#include "severitas/resample.hpp"
#include "severitas/trainer.hpp"

namespace severitas {

struct PreparedData {
  FeatureSchema schema;
  Dataset train;
  Dataset val;
  Dataset test;
  TransformStats stats;
};

/// Stratified split of the raw rows, encoders fitted on the train rows
/// only, then every split encoded with them.
PreparedData prepare_data(const RawTable& table, const SchemaConfig& config, const SplitSpec& split);

// ---------------------------------------------------------------------------
// File-based stages. Each stage reads the files written by the ones before
// it from `out_dir` and writes its own artifacts atomically.

struct PipelineConfig {
  std::filesystem::path input;    // raw CSV
  SchemaConfig schema;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  SplitSpec split;
  ResampleConfig resample;
  bool resample_enabled = true;
  std::vector<ModelKind> models{ModelKind::armnet, ModelKind::mambanet};
  HyperParams train;                              // model_config is per kind, below
  std::map<ModelKind, nlohmann::json> model_configs;
  SearchSpace search;
  std::size_t trials = 100;
  std::size_t importance_repeats = 5;

  /// Relative paths resolve against `base_dir`. "schema" may be a path or
  /// an inline object.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);

  HyperParams hyperparams(ModelKind kind) const;
  std::filesystem::path model_dir(ModelKind kind) const;
};

/// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* kSchema = "schema.json";
inline constexpr const char* kIngestReport = "ingest_report.json";
inline constexpr const char* kTrain = "train.csv";
inline constexpr const char* kVal = "val.csv";
inline constexpr const char* kTest = "test.csv";
inline constexpr const char* kResampled = "train_resampled.csv";
inline constexpr const char* kResampleReport = "resample_report.json";
inline constexpr const char* kCheckpoint = "checkpoint.json";
inline constexpr const char* kLossCurve = "loss_curve.csv";
inline constexpr const char* kTrainSummary = "train_summary.json";
inline constexpr const char* kTrials = "trials.jsonl";
inline constexpr const char* kBestConfig = "best_config.json";
inline constexpr const char* kSeverityByYear = "severity_by_year.csv";
inline constexpr const char* kMetricsTable = "metrics_table.csv";
inline constexpr const char* kImportance = "importance.csv";
}  // namespace artifact

nlohmann::json stage_ingest(const PipelineConfig& cfg);
nlohmann::json stage_resample(const PipelineConfig& cfg);
/// `tuned` trains with the best configuration written by stage_tune.
nlohmann::json stage_train(const PipelineConfig& cfg, ModelKind kind, bool tuned = false);
nlohmann::json stage_tune(const PipelineConfig& cfg, ModelKind kind, std::size_t trials, std::size_t threads);
nlohmann::json stage_evaluate(const PipelineConfig& cfg, ModelKind kind, Split split = Split::test);
nlohmann::json stage_report(const PipelineConfig& cfg);

/// Worker count from SEVERITAS_THREADS, default 1.
std::size_t configured_threads();

}  // namespace severitas
