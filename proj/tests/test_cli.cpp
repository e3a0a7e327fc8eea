// Drives the built command-line tool end to end in a scratch directory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "severitas/errors.hpp"
#include "severitas/io.hpp"
#include "severitas/pipeline.hpp"

namespace fs = std::filesystem;
using namespace severitas;
using nlohmann::json;

namespace {

struct RunResult {
  int status = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("severitas_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunResult cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && '" SEVERITAS_CLI "' " + args + " > '" + out.string() +
                          "' 2> '" + err.string() + "'";
  RunResult r;
  const int raw = std::system(cmd.c_str());
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

// Synthetic data plus a pipeline config with small models and few epochs.
fs::path small_project(const std::string& name) {
  const fs::path dir = scratch(name);
  REQUIRE(cli(dir, "synth --out . --seed 3").status == 0);
  json cfg = json::parse(read_file(dir / "pipeline.json"));
  cfg["train"] = {{"epochs", 3}, {"lr", 5e-3}};
  cfg["armnet"] = fixture::tiny_armnet();
  cfg["mambanet"] = fixture::tiny_mambanet();
  cfg["search"] = {{"hidden_dim", {8, 16}}, {"num_layers", {1, 2}}, {"epochs", {2}}};
  cfg["importance_repeats"] = 1;
  write_file_atomic(dir / "pipeline.json", cfg.dump(2));
  return dir;
}

bool single_error_line(const std::string& err, const std::string& prefix) {
  return err.rfind(prefix, 0) == 0 && err.find('\n') == err.size() - 1;
}

}  // namespace

TEST_CASE("cli full run emits every artifact") {
  const fs::path dir = small_project("full");
  const RunResult r = cli(dir, "run --config pipeline.json");
  CAPTURE(r.err);
  REQUIRE(r.status == 0);
  for (const char* f : {"schema.json", "ingest_report.json", "train.csv", "val.csv", "test.csv", "train_resampled.csv",
                        "resample_report.json", "severity_by_year.csv", "metrics_table.csv"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / "out" / f));
  }
  for (const char* m : {"armnet", "mambanet"}) {
    for (const char* f : {"checkpoint.json", "loss_curve.csv", "train_summary.json", "metrics_test.json",
                          "confusion_test.csv", "confusion_test_normalized.csv", "importance.csv"}) {
      CAPTURE(m);
      CAPTURE(f);
      CHECK(fs::exists(dir / "out" / m / f));
    }
  }
  const json metrics = json::parse(read_file(dir / "out/armnet/metrics_test.json"));
  CHECK(metrics["split"] == "test");
  CHECK(metrics["per_class"].contains("KA"));
  // No temp files are left behind.
  for (const auto& entry : fs::recursive_directory_iterator(dir / "out")) {
    CHECK(entry.path().extension() != ".tmp");
  }
}

TEST_CASE("cli stages are deterministic and individually rerunnable") {
  const fs::path dir = small_project("stages");
  for (const char* out : {"a", "b"}) {
    const std::string flags = std::string(" --config pipeline.json --out ") + out;
    REQUIRE(cli(dir, "ingest" + flags).status == 0);
    REQUIRE(cli(dir, "resample" + flags).status == 0);
    REQUIRE(cli(dir, "train --model armnet" + flags).status == 0);
    REQUIRE(cli(dir, "evaluate --model armnet" + flags).status == 0);
  }
  for (const char* f : {"armnet/metrics_test.json", "armnet/loss_curve.csv", "armnet/checkpoint.json",
                        "train_resampled.csv", "test.csv"}) {
    CAPTURE(f);
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
  // A different seed changes the split and the model.
  REQUIRE(cli(dir, "ingest --config pipeline.json --out c --seed 99").status == 0);
  CHECK(read_file(dir / "a/test.csv") != read_file(dir / "c/test.csv"));
  // Rerunning a stage over existing outputs reproduces them.
  REQUIRE(cli(dir, "evaluate --model armnet --config pipeline.json --out a").status == 0);
  CHECK(read_file(dir / "a/armnet/metrics_test.json") == read_file(dir / "b/armnet/metrics_test.json"));
  REQUIRE(cli(dir, "evaluate --model armnet --split val --config pipeline.json --out a").status == 0);
  CHECK(fs::exists(dir / "a/armnet/metrics_val.json"));
}

TEST_CASE("cli stage order errors name the missing file") {
  const fs::path dir = small_project("order");
  RunResult r = cli(dir, "resample --config pipeline.json");
  CHECK(r.status == 1);
  CHECK(single_error_line(r.err, "error: stage_order: "));
  CHECK(r.err.find("schema.json") != std::string::npos);

  REQUIRE(cli(dir, "ingest --config pipeline.json").status == 0);
  r = cli(dir, "train --model mambanet --config pipeline.json");
  CHECK(r.status == 1);
  CHECK(single_error_line(r.err, "error: stage_order: "));
  CHECK(r.err.find("train_resampled.csv") != std::string::npos);

  r = cli(dir, "evaluate --model armnet --config pipeline.json");
  CHECK(single_error_line(r.err, "error: stage_order: "));
  CHECK(r.err.find("checkpoint.json") != std::string::npos);

  REQUIRE(cli(dir, "resample --config pipeline.json").status == 0);
  r = cli(dir, "train --tuned --model armnet --config pipeline.json");
  CHECK(single_error_line(r.err, "error: stage_order: "));
  CHECK(r.err.find("best_config.json") != std::string::npos);
}

TEST_CASE("cli tune writes one record per trial") {
  const fs::path dir = small_project("tune");
  REQUIRE(cli(dir, "ingest --config pipeline.json").status == 0);
  REQUIRE(cli(dir, "resample --config pipeline.json").status == 0);
  const RunResult r = cli(dir, "tune --model armnet --trials 5 --config pipeline.json");
  CAPTURE(r.err);
  REQUIRE(r.status == 0);
  std::istringstream lines(read_file(dir / "out/armnet/trials.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const json rec = json::parse(line);
    CHECK(rec["trial"] == n);
    CHECK(rec.contains("seed"));
    CHECK(rec["params"]["hidden_dim"].get<int>() <= 16);
    ++n;
  }
  CHECK(n == 5);
  const json best = json::parse(read_file(dir / "out/armnet/best_config.json"));
  CHECK(best["hyperparams"]["model"].contains("hidden_dim"));
  CHECK(cli(dir, "train --tuned --model armnet --config pipeline.json").status == 0);

  // Threads do not change the outcome.
  const std::string serial = read_file(dir / "out/armnet/trials.jsonl");
  fs::copy(dir / "out", dir / "out2", fs::copy_options::recursive);
  REQUIRE(std::system(("cd '" + dir.string() + "' && SEVERITAS_THREADS=3 '" SEVERITAS_CLI
                       "' tune --model armnet --trials 5 --config pipeline.json --out out2 > /dev/null")
                          .c_str()) == 0);
  CHECK(read_file(dir / "out2/armnet/trials.jsonl") == serial);
}

TEST_CASE("cli strict and lenient ingestion") {
  const fs::path dir = small_project("modes");
  std::string csv = read_file(dir / "synthetic.csv");
  // Blank out the weather cell of the first data row (physical line 2).
  const std::size_t row = csv.find('\n') + 1;
  const std::size_t comma = csv.find(',', row);
  const std::size_t next = csv.find(',', comma + 1);
  csv.erase(comma + 1, next - comma - 1);
  write_file_atomic(dir / "synthetic.csv", csv);

  RunResult r = cli(dir, "ingest --config pipeline.json --strict");
  CHECK(r.status == 1);
  CHECK(single_error_line(r.err, "error: row: line 2: "));

  r = cli(dir, "ingest --config pipeline.json --lenient");
  CAPTURE(r.err);
  REQUIRE(r.status == 0);
  const json report = json::parse(read_file(dir / "out/ingest_report.json"));
  CHECK(report["dropped_rows"] == 1);
  CHECK(report["dropped_by_column"]["weather"] == 1);
  CHECK(report["kept_rows"] == 1199);
}

TEST_CASE("cli usage and config errors") {
  const fs::path dir = small_project("errors");
  RunResult r = cli(dir, "ingest --config missing.json");
  CHECK(r.status == 1);
  CHECK(single_error_line(r.err, "error: io: "));

  r = cli(dir, "train --model resnet --config pipeline.json");
  CHECK(single_error_line(r.err, "error: "));
  CHECK(r.status == 1);

  r = cli(dir, "ingest --bogus");
  CHECK(r.status == 2);
  CHECK(single_error_line(r.err, "error: usage: "));

  r = cli(dir, "ingest");
  CHECK(single_error_line(r.err, "error: config: "));

  write_file_atomic(dir / "broken.json", "{ not json");
  r = cli(dir, "ingest --config broken.json");
  CHECK(single_error_line(r.err, "error: config: "));

  r = cli(dir, "ingest --config pipeline.json --strict --lenient");
  CHECK(r.status == 2);

  r = cli(dir, "tune --model armnet --config pipeline.json");
  CHECK(single_error_line(r.err, "error: stage_order: "));

  r = cli(dir, "--help");
  CHECK(r.status == 0);
  CHECK(r.out.find("resample") != std::string::npos);
}
