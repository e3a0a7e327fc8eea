// severitas: command-line driver for the crash-severity pipeline.
//
//   severitas synth    --out data/ [--preset separable] [--seed N]
//   severitas ingest   --config pipeline.json
//   severitas resample --config pipeline.json
//   severitas tune     --config pipeline.json --model armnet --trials 100
//   severitas train    --config pipeline.json [--model armnet] [--tuned]
//   severitas evaluate --config pipeline.json [--model armnet] [--split test]
//   severitas report   --config pipeline.json
//   severitas run      --config pipeline.json   (ingest .. report)

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "severitas/errors.hpp"
#include "severitas/io.hpp"
#include "severitas/pipeline.hpp"
#include "severitas/synth.hpp"

namespace fs = std::filesystem;
using namespace severitas;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model;
  std::size_t trials = 0;
  std::string split = "test";
  bool strict = false;
  bool lenient = false;
  bool tuned = false;
  std::string preset = "separable";
};

PipelineConfig load_config(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required for this command");
  PipelineConfig cfg = PipelineConfig::load(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.strict) cfg.schema.mode = IngestMode::strict;
  if (o.lenient) cfg.schema.mode = IngestMode::lenient;
  return cfg;
}

std::vector<ModelKind> selected_models(const Options& o, const PipelineConfig& cfg) {
  if (o.model.empty()) return cfg.models;
  return {parse_model_kind(o.model)};
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ArgumentError("unknown split '" + s + "'");
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

void cmd_synth(const Options& o) {
  if (o.out.empty()) throw ConfigError("synth needs --out <dir>");
  SynthConfig sc = SynthConfig::preset(o.preset);
  sc.seed = o.seed.value_or(0);
  const SynthData data = generate_synthetic(sc);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_file_atomic(dir / "synthetic.csv", data.csv);
  write_file_atomic(dir / "schema.json", data.schema.to_json().dump(2) + "\n");
  const json pipeline{{"input", "synthetic.csv"}, {"schema", "schema.json"}, {"out", "out"}, {"seed", sc.seed}};
  write_file_atomic(dir / "pipeline.json", pipeline.dump(2) + "\n");
  print({{"rows", sc.class_counts[0] + sc.class_counts[1] + sc.class_counts[2]},
         {"preset", o.preset},
         {"synth", sc.to_json()},
         {"files", {"synthetic.csv", "schema.json", "pipeline.json"}}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crash-severity classification pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--config", o.config, "Pipeline config (JSON)");
  app.add_option("--seed", o.seed, "Master seed (overrides the config)");
  app.add_option("--out", o.out, "Output directory (overrides the config)");
  app.add_option("--model", o.model, "armnet or mambanet (default: every configured model)");
  app.add_option("--trials", o.trials, "Random-search trials (default: config value)");
  app.add_option("--split", o.split, "Split to evaluate: train, val or test");
  auto* strict = app.add_flag("--strict", o.strict, "Reject rows with missing or unparseable cells");
  app.add_flag("--lenient", o.lenient, "Drop such rows and count them")->excludes(strict);

  auto* synth = app.add_subcommand("synth", "Write a bundled synthetic dataset, schema and pipeline config");
  synth->add_option("--preset", o.preset, "separable, imbalanced or one_informative");
  auto* ingest = app.add_subcommand("ingest", "Split, fit encoders on train, write encoded splits");
  auto* resample = app.add_subcommand("resample", "SMOTEENN on the training split");
  auto* train = app.add_subcommand("train", "Train one or more models");
  train->add_flag("--tuned", o.tuned, "Use the best configuration found by 'tune'");
  auto* tune = app.add_subcommand("tune", "Random hyperparameter search");
  auto* evaluate = app.add_subcommand("evaluate", "Metrics and confusion matrices for a split");
  auto* report = app.add_subcommand("report", "Per-year distribution, metrics table, importance");
  auto* run = app.add_subcommand("run", "ingest, resample, train, evaluate and report in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) {
      cmd_synth(o);
      return 0;
    }
    const PipelineConfig cfg = load_config(o);
    if (ingest->parsed()) {
      print(stage_ingest(cfg));
    } else if (resample->parsed()) {
      print(stage_resample(cfg));
    } else if (train->parsed()) {
      json out = json::array();
      for (ModelKind k : selected_models(o, cfg)) out.push_back(stage_train(cfg, k, o.tuned));
      print(out);
    } else if (tune->parsed()) {
      const std::size_t trials = o.trials > 0 ? o.trials : cfg.trials;
      const std::size_t threads = configured_threads();
      json out = json::array();
      for (ModelKind k : selected_models(o, cfg)) out.push_back(stage_tune(cfg, k, trials, threads));
      print(out);
    } else if (evaluate->parsed()) {
      const Split split = parse_split(o.split);
      json out = json::array();
      for (ModelKind k : selected_models(o, cfg)) out.push_back(stage_evaluate(cfg, k, split));
      print(out);
    } else if (report->parsed()) {
      print(stage_report(cfg));
    } else if (run->parsed()) {
      stage_ingest(cfg);
      stage_resample(cfg);
      json out = json::array();
      for (ModelKind k : cfg.models) {
        stage_train(cfg, k);
        out.push_back(stage_evaluate(cfg, k, Split::test));
      }
      stage_report(cfg);
      print(out);
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: io: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
  }
  return 1;
}
