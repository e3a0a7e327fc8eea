#include "severitas/pipeline.hpp"

#include <algorithm>
#include <cstdlib>

#include "severitas/errors.hpp"
#include "severitas/eval_report.hpp"
#include "severitas/io.hpp"

namespace severitas {

namespace fs = std::filesystem;
using nlohmann::json;

PreparedData prepare_data(const RawTable& table, const SchemaConfig& config, const SplitSpec& split) {
  const std::vector<int> labels = raw_labels(table, config);
  const std::vector<Split> tags = stratified_split(labels, split);
  std::vector<std::size_t> train_rows;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == Split::train) train_rows.push_back(i);
  }

  PreparedData out;
  out.schema = fit_schema(table.select(train_rows), config);
  Dataset all = transform(table, out.schema, config, &out.stats);
  all.splits = tags;
  out.train = all.subset(Split::train);
  out.val = all.subset(Split::val);
  out.test = all.subset(Split::test);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    if (!j.contains("input")) throw ConfigError("pipeline config: 'input' is required");
    if (!j.contains("schema")) throw ConfigError("pipeline config: 'schema' is required");
    c.input = resolve(base_dir, j.at("input").get<std::string>());
    const json& schema = j.at("schema");
    c.schema = schema.is_string() ? SchemaConfig::load(resolve(base_dir, schema.get<std::string>()))
                                  : SchemaConfig::from_json(schema);
    if (j.contains("mode")) {
      const std::string mode = j.at("mode").get<std::string>();
      if (mode != "strict" && mode != "lenient") throw ConfigError("pipeline config: unknown mode '" + mode + "'");
      c.schema.mode = mode == "strict" ? IngestMode::strict : IngestMode::lenient;
    }
    c.out_dir = resolve(base_dir, j.value("out", std::string("out")));
    c.seed = j.value("seed", c.seed);
    if (j.contains("split")) {
      const json& s = j.at("split");
      c.split.train = s.value("train", c.split.train);
      c.split.val = s.value("val", c.split.val);
      c.split.test = s.value("test", c.split.test);
    }
    c.split.validate();
    if (j.contains("resample")) {
      c.resample = ResampleConfig::from_json(j.at("resample"));
      c.resample_enabled = j.at("resample").value("enabled", true);
    }
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j.at("models")) c.models.push_back(parse_model_kind(m.get<std::string>()));
    }
    if (j.contains("train")) c.train = HyperParams::from_json(j.at("train"));
    for (ModelKind kind : {ModelKind::armnet, ModelKind::mambanet}) {
      const std::string name(model_kind_name(kind));
      c.model_configs[kind] = j.contains(name) ? j.at(name) : json::object();
    }
    if (j.contains("search")) c.search = SearchSpace::from_json(j.at("search"));
    c.trials = j.value("trials", c.trials);
    c.importance_repeats = j.value("importance_repeats", c.importance_repeats);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  if (c.importance_repeats == 0) throw ConfigError("pipeline config: importance_repeats must be >= 1");
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("config file '" + path.string() + "' does not exist");
  return from_json(parse_json_file(path), path.parent_path());
}

HyperParams PipelineConfig::hyperparams(ModelKind kind) const {
  HyperParams hp = train;
  auto it = model_configs.find(kind);
  hp.model_config = it == model_configs.end() ? json::object() : it->second;
  return hp;
}

fs::path PipelineConfig::model_dir(ModelKind kind) const { return out_dir / std::string(model_kind_name(kind)); }

std::size_t configured_threads() {
  const char* env = std::getenv("SEVERITAS_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  double v = 0.0;
  if (!parse_double(env, v) || v < 1.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw ConfigError("SEVERITAS_THREADS must be a positive integer, got '" + std::string(env) + "'");
  }
  return static_cast<std::size_t>(v);
}

// ---------------------------------------------------------------------------
// Stages

namespace {

const fs::path& require(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw StageOrderError("missing upstream artifact '" + path.string() + "' (run '" + producer + "' first)");
  }
  return path;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

FeatureSchema load_schema(const PipelineConfig& cfg) {
  return FeatureSchema::from_json(parse_json_file(require(cfg.out_dir / artifact::kSchema, "ingest")));
}

std::uint64_t model_seed(const PipelineConfig& cfg, std::string_view stage, ModelKind kind) {
  return Rng::derive_seed(cfg.seed, stage, static_cast<std::uint64_t>(kind));
}

json counts_json(const Dataset& d) {
  const auto c = d.class_counts();
  json j = json::object();
  for (int k = 0; k < kNumClasses; ++k) j[std::string(severity_name(k))] = c[k];
  return j;
}

}  // namespace

json stage_ingest(const PipelineConfig& cfg) {
  if (!fs::exists(cfg.input)) throw IoError("input file '" + cfg.input.string() + "' does not exist");
  const RawTable table = load_csv(cfg.input, cfg.schema);
  SplitSpec split = cfg.split;
  split.seed = Rng::derive_seed(cfg.seed, "split");
  const PreparedData data = prepare_data(table, cfg.schema, split);

  fs::create_directories(cfg.out_dir);
  write_json(cfg.out_dir / artifact::kSchema, data.schema.to_json());
  write_encoded_csv(cfg.out_dir / artifact::kTrain, data.train, data.schema);
  write_encoded_csv(cfg.out_dir / artifact::kVal, data.val, data.schema);
  write_encoded_csv(cfg.out_dir / artifact::kTest, data.test, data.schema);

  json report{{"input_rows", table.size() + table.dropped_rows},
              {"kept_rows", table.size()},
              {"dropped_rows", table.dropped_rows},
              {"dropped_by_column", table.dropped_by_column},
              {"unseen_by_column", data.stats.unseen_by_column},
              {"mode", cfg.schema.mode == IngestMode::strict ? "strict" : "lenient"},
              {"encoded_width", data.schema.encoded_width},
              {"warnings", data.schema.warnings},
              {"splits", {{"train", counts_json(data.train)}, {"val", counts_json(data.val)}, {"test", counts_json(data.test)}}}};
  write_json(cfg.out_dir / artifact::kIngestReport, report);
  return report;
}

json stage_resample(const PipelineConfig& cfg) {
  const FeatureSchema schema = load_schema(cfg);
  const Dataset train = read_encoded_csv(require(cfg.out_dir / artifact::kTrain, "ingest"), schema);
  json report;
  if (cfg.resample_enabled) {
    ResampleConfig rc = cfg.resample;
    rc.seed = Rng::derive_seed(cfg.seed, "resample");
    Rng rng(rc.seed);
    const SmoteEnnResult r = smoteenn(train, rc, rng);
    write_encoded_csv(cfg.out_dir / artifact::kResampled, r.data, schema);
    report = {{"enabled", true}, {"config", rc.to_json()}, {"counts", r.report.to_json()}};
  } else {
    write_encoded_csv(cfg.out_dir / artifact::kResampled, train, schema);
    report = {{"enabled", false}, {"counts", counts_json(train)}};
  }
  write_json(cfg.out_dir / artifact::kResampleReport, report);
  return report;
}

json stage_train(const PipelineConfig& cfg, ModelKind kind, bool tuned) {
  const FeatureSchema schema = load_schema(cfg);
  const Dataset train = read_encoded_csv(require(cfg.out_dir / artifact::kResampled, "resample"), schema);
  const Dataset val = read_encoded_csv(require(cfg.out_dir / artifact::kVal, "ingest"), schema);
  const fs::path dir = cfg.model_dir(kind);
  HyperParams hp = cfg.hyperparams(kind);
  if (tuned) hp = HyperParams::from_json(parse_json_file(require(dir / artifact::kBestConfig, "tune")).at("hyperparams"));

  const std::uint64_t seed = model_seed(cfg, "train", kind);
  const TrainResult r = train_model(kind, train, val, schema, hp, seed);
  fs::create_directories(dir);
  save_checkpoint(dir / artifact::kCheckpoint, *r.model);
  write_file_atomic(dir / artifact::kLossCurve, loss_curve_csv(r.curve));
  json summary{{"model", model_kind_name(kind)},
               {"seed", seed},
               {"epochs_ran", r.curve.size()},
               {"best_epoch", r.best_epoch},
               {"best_val_loss", r.best_val_loss},
               {"stopped_early", r.stopped_early},
               {"diverged", r.diverged},
               {"optimizer_steps", r.optimizer_steps},
               {"parameters", r.model->parameter_count()},
               {"train_accuracy", evaluate_model(*r.model, train, "train").metrics.overall_accuracy},
               {"val_accuracy", evaluate_model(*r.model, val, "val").metrics.overall_accuracy},
               {"hyperparams", hp.to_json()}};
  write_json(dir / artifact::kTrainSummary, summary);
  return summary;
}

json stage_tune(const PipelineConfig& cfg, ModelKind kind, std::size_t trials, std::size_t threads) {
  const FeatureSchema schema = load_schema(cfg);
  const Dataset train = read_encoded_csv(require(cfg.out_dir / artifact::kResampled, "resample"), schema);
  const Dataset val = read_encoded_csv(require(cfg.out_dir / artifact::kVal, "ingest"), schema);
  const HyperParams base = cfg.hyperparams(kind);
  const auto results =
      random_search(kind, train, val, schema, base, cfg.search, trials, model_seed(cfg, "tune", kind), threads);

  std::vector<TrialResult> by_index = results;
  std::sort(by_index.begin(), by_index.end(),
            [](const TrialResult& a, const TrialResult& b) { return a.index < b.index; });
  std::string log;
  for (const auto& r : by_index) log += r.to_json().dump() + "\n";
  const fs::path dir = cfg.model_dir(kind);
  fs::create_directories(dir);
  write_file_atomic(dir / artifact::kTrials, log);

  const TrialResult& best = results.front();
  json best_json{{"model", model_kind_name(kind)},
                 {"trial", best.to_json()},
                 {"hyperparams", trial_hyperparams(kind, base, best.params).to_json()},
                 {"search_space", cfg.search.to_json()},
                 {"trials", trials}};
  write_json(dir / artifact::kBestConfig, best_json);
  return best_json;
}

json stage_evaluate(const PipelineConfig& cfg, ModelKind kind, Split split) {
  const FeatureSchema schema = load_schema(cfg);
  const fs::path dir = cfg.model_dir(kind);
  const auto model = load_checkpoint(require(dir / artifact::kCheckpoint, "train"), schema);
  const std::string name(split_name(split));
  const Dataset data = read_encoded_csv(require(cfg.out_dir / (name + ".csv"), "ingest"), schema);
  const Evaluation e = evaluate_model(*model, data, name);
  const json metrics = metrics_json(e);
  write_json(dir / ("metrics_" + name + ".json"), metrics);
  write_file_atomic(dir / ("confusion_" + name + ".csv"), confusion_csv(e.confusion));
  write_file_atomic(dir / ("confusion_" + name + "_normalized.csv"), confusion_normalized_csv(e.confusion));
  return metrics;
}

json stage_report(const PipelineConfig& cfg) {
  const FeatureSchema schema = load_schema(cfg);
  json summary = json::object();

  if (!cfg.schema.year_column.empty()) {
    if (!fs::exists(cfg.input)) throw IoError("input file '" + cfg.input.string() + "' does not exist");
    const RawTable table = load_csv(cfg.input, cfg.schema);
    const SeverityDistribution d = severity_distribution_report(table, cfg.schema.year_column, cfg.schema);
    write_file_atomic(cfg.out_dir / artifact::kSeverityByYear, d.csv());
    summary["severity_by_year"] = artifact::kSeverityByYear;
  }

  const Dataset test = read_encoded_csv(require(cfg.out_dir / artifact::kTest, "ingest"), schema);
  std::vector<Evaluation> evals;
  for (ModelKind kind : cfg.models) {
    const fs::path dir = cfg.model_dir(kind);
    const auto model = load_checkpoint(require(dir / artifact::kCheckpoint, "train"), schema);
    require(dir / "metrics_test.json", "evaluate");
    evals.push_back(evaluate_model(*model, test, "test"));

    const auto importance =
        permutation_importance_all(*model, test, model_seed(cfg, "importance", kind), cfg.importance_repeats);
    std::string csv = "field,mean_accuracy_drop\n";
    for (const auto& f : importance) csv += csv_escape(f.field) + "," + format_double(f.mean_drop) + "\n";
    write_file_atomic(dir / artifact::kImportance, csv);
  }
  write_file_atomic(cfg.out_dir / artifact::kMetricsTable, metrics_table(evals));
  summary["metrics_table"] = artifact::kMetricsTable;
  summary["models"] = json::array();
  for (const auto& e : evals) summary["models"].push_back(e.model);
  return summary;
}

}  // namespace severitas
