#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "severitas/errors.hpp"
#include "severitas/eval_report.hpp"
#include "severitas/trainer.hpp"

using namespace severitas;

namespace {

constexpr int KA = 0, BC = 1, O = 2;

RawTable table_from(const std::string& csv, const SchemaConfig& config) {
  std::istringstream in(csv);
  return load_csv(in, config);
}

SchemaConfig year_config() {
  SchemaConfig c;
  c.columns = {{"weather", ColumnRole::categorical, {}}, {"severity", ColumnRole::label, {}}};
  c.year_column = "year";
  return c;
}

}  // namespace

TEST_CASE("confusion") {
  SUBCASE("perfect predictions") {
    const std::vector<int> y{0, 1, 2, 2, 1};
    const ConfusionMatrix cm = confusion(y, y);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (r != c) CHECK(cm.counts[r][c] == 0);
      }
    }
    CHECK(cm.trace() == 5);
  }
  SUBCASE("hand example") {
    const std::vector<int> labels{KA, KA, BC, O};
    const std::vector<int> preds{KA, BC, BC, O};
    const ConfusionMatrix cm = confusion(preds, labels);
    CHECK(cm.counts[KA] == std::array<std::size_t, 3>{1, 1, 0});
    CHECK(cm.counts[BC] == std::array<std::size_t, 3>{0, 1, 0});
    CHECK(cm.counts[O] == std::array<std::size_t, 3>{0, 0, 1});
  }
  SUBCASE("empty") {
    const ConfusionMatrix cm = confusion(std::vector<int>{}, std::vector<int>{});
    CHECK(cm.total() == 0);
    const ClassMetrics m = classwise_metrics(cm);
    CHECK(m.overall_accuracy == 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{0, 1}), ArgumentError);
    CHECK_THROWS_AS(confusion(std::vector<int>{3}, std::vector<int>{0}), ArgumentError);
    CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{-1}), ArgumentError);
  }
}

TEST_CASE("classwise metrics") {
  SUBCASE("diagonal") {
    ConfusionMatrix cm;
    cm.counts = {{{4, 0, 0}, {0, 7, 0}, {0, 0, 2}}};
    const ClassMetrics m = classwise_metrics(cm);
    for (const auto& s : m.per_class) {
      CHECK(s.precision == 1.0);
      CHECK(s.recall == 1.0);
      CHECK(s.f1 == 1.0);
      CHECK(s.ovr_accuracy == 1.0);
    }
    CHECK(m.overall_accuracy == 1.0);
  }
  SUBCASE("hand example") {
    const ConfusionMatrix cm = confusion(std::vector<int>{KA, BC, BC, O}, std::vector<int>{KA, KA, BC, O});
    const ClassMetrics m = classwise_metrics(cm);
    CHECK(m.per_class[KA].precision == 1.0);
    CHECK(m.per_class[KA].recall == 0.5);
    CHECK(m.per_class[KA].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(m.per_class[BC].precision == 0.5);
    CHECK(m.per_class[BC].recall == 1.0);
    CHECK(m.per_class[KA].ovr_accuracy == 0.75);
    CHECK(m.overall_accuracy == 0.75);
  }
  SUBCASE("absent class is flagged") {
    const ConfusionMatrix cm = confusion(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 0});
    const ClassMetrics m = classwise_metrics(cm);
    CHECK(m.per_class[O].no_predictions);
    CHECK(m.per_class[O].no_support);
    CHECK(m.per_class[O].precision == 0.0);
    CHECK(m.per_class[O].recall == 0.0);
    CHECK(m.per_class[O].f1 == 0.0);
    CHECK(m.per_class[O].ovr_accuracy == 1.0);
    CHECK_FALSE(m.per_class[KA].no_support);
  }
}

TEST_CASE("classwise metrics match a per-sample recount") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.below(60));
    std::vector<int> preds(n), labels(n);
    const bool skew = trial % 3 == 0;  // leave some classes empty
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(skew ? 2 : 3));
      preds[i] = static_cast<int>(rng.below(skew ? 2 : 3));
    }
    const ConfusionMatrix cm = confusion(preds, labels);
    const ClassMetrics m = classwise_metrics(cm);
    const oracle::Recount ref = oracle::recount_metrics(preds, labels);
    CHECK(cm.total() == n);
    CHECK(m.overall_accuracy == ref.accuracy);
    std::size_t tp_sum = 0;
    for (int c = 0; c < 3; ++c) {
      const ClassScores& s = m.per_class[c];
      CHECK(s.precision == ref.precision[c]);
      CHECK(s.recall == ref.recall[c]);
      CHECK(s.ovr_accuracy == doctest::Approx(ref.ovr_accuracy[c]).epsilon(1e-15));
      if (s.precision * s.recall == 0.0) {
        CHECK(s.f1 == 0.0);
      } else {
        CHECK(std::abs(s.f1 - 2 * s.precision * s.recall / (s.precision + s.recall)) <= 1e-12);
      }
      tp_sum += cm.counts[c][c];
    }
    if (n > 0) CHECK(static_cast<double>(tp_sum) / static_cast<double>(n) == m.overall_accuracy);
  }
}

TEST_CASE("report rendering") {
  const ConfusionMatrix cm = confusion(std::vector<int>{KA, BC, BC, O}, std::vector<int>{KA, KA, BC, O});
  CHECK(confusion_csv(cm) == "true\\pred,KA,BC,O\nKA,1,1,0\nBC,0,1,0\nO,0,0,1\n");
  CHECK(confusion_normalized_csv(cm) == "true\\pred,KA,BC,O\nKA,0.5,0.5,0\nBC,0,1,0\nO,0,0,1\n");

  Evaluation e;
  e.model = "armnet";
  e.split = "test";
  e.confusion = cm;
  e.metrics = classwise_metrics(cm);
  e.mean_log_loss = 0.25;
  const nlohmann::json j = metrics_json(e);
  CHECK(j["model"] == "armnet");
  CHECK(j["split"] == "test");
  CHECK(j["overall_accuracy"] == 0.75);
  CHECK(j["mean_log_loss"] == 0.25);
  for (const char* cls : {"KA", "BC", "O"}) {
    for (const char* key : {"precision", "recall", "f1", "ovr_accuracy"}) {
      CAPTURE(cls);
      CAPTURE(key);
      CHECK(j["per_class"][cls].contains(key));
    }
  }
  const std::vector<Evaluation> evals{e};
  const std::string table = metrics_table(evals);
  CHECK(table.find("armnet,KA,100.00,50.00,66.67,75.00\n") != std::string::npos);
  CHECK(table.find("armnet,test,75.00\n") != std::string::npos);
}

TEST_CASE("evaluate_model") {
  const PreparedData data = fixture::small_synthetic(12, {8, 8, 8});
  HyperParams hp;
  hp.epochs = 150;
  hp.lr = 1e-2;
  hp.weight_decay = 0.0;
  hp.batch_size = 8;
  hp.early_stop_patience = 1000;
  hp.model_config = fixture::tiny_armnet();
  hp.model_config["dropout_rate"] = 0.0;
  // Validate on the training rows so the restored snapshot is the best fit.
  const TrainResult r = train_model(ModelKind::armnet, data.train, data.train, data.schema, hp, 1);
  const Evaluation e = evaluate_model(*r.model, data.train, "train");
  CHECK(e.metrics.overall_accuracy == 1.0);
  CHECK(e.split == "train");
  CHECK(e.model == "armnet");

  const Evaluation t1 = evaluate_model(*r.model, data.test, "test");
  const Evaluation t2 = evaluate_model(*r.model, data.test, "test");
  CHECK(metrics_json(t1) == metrics_json(t2));
  CHECK(t1.confusion.total() == data.test.rows());
  const ClassMetrics again = classwise_metrics(t1.confusion);
  for (int c = 0; c < 3; ++c) {
    CHECK(again.per_class[c].precision == t1.metrics.per_class[c].precision);
    CHECK(again.per_class[c].recall == t1.metrics.per_class[c].recall);
    CHECK(again.per_class[c].f1 == t1.metrics.per_class[c].f1);
  }
  CHECK(t1.mean_log_loss == mean_log_loss(*r.model, data.test));
}

TEST_CASE("argmax ties go to the lowest class") {
  const Tensor logits({3, 3}, {1.0, 1.0, 0.0, 0.0, 2.0, 2.0, 5.0, 5.0, 5.0});
  CHECK(predict_classes(logits) == std::vector<int>{0, 1, 0});
}

TEST_CASE("permutation importance") {
  SynthConfig cfg = SynthConfig::preset("one_informative");
  cfg.seed = 5;
  const SynthData syn = generate_synthetic(cfg);
  std::istringstream in(syn.csv);
  SplitSpec split;
  split.seed = 5;
  const PreparedData data = prepare_data(load_csv(in, syn.schema), syn.schema, split);
  HyperParams hp;
  hp.epochs = 10;
  hp.lr = 5e-3;
  hp.model_config = fixture::tiny_armnet();
  const TrainResult r = train_model(ModelKind::armnet, data.train, data.val, data.schema, hp, 2);

  const auto all = permutation_importance_all(*r.model, data.test, 9, 3);
  REQUIRE(all.size() == data.schema.fields.size());
  CHECK(all[0].field == "light_condition");
  CHECK(all[0].mean_drop > 0.3);
  for (const auto& f : all) {
    if (f.field == "noise_0") CHECK(std::abs(f.mean_drop) <= 0.02);
  }

  Rng a(4), b(4);
  const FieldImportance ia = permutation_importance(*r.model, data.test, "weather", a, 4);
  const FieldImportance ib = permutation_importance(*r.model, data.test, "weather", b, 4);
  CHECK(ia.drops == ib.drops);
  CHECK(ia.drops.size() == 4);
  Rng c(1);
  CHECK_THROWS_AS(permutation_importance(*r.model, data.test, "no_such_field", c, 1), ArgumentError);
}

TEST_CASE("severity distribution report") {
  const SchemaConfig config = year_config();
  SUBCASE("one BC row per year") {
    const RawTable t = table_from(
        "weather,year,severity\nclear,2017,BC\nrain,2018,BC\nclear,2019,BC\nfog,2020,BC\nclear,2021,BC\nrain,2022,BC\n",
        config);
    const SeverityDistribution d = severity_distribution_report(t, "year", config);
    CHECK(d.by_year.size() == 6);
    for (const auto& [year, counts] : d.by_year) CHECK(counts == std::array<std::size_t, 3>{0, 1, 0});
    CHECK(d.total() == 6);
  }
  SUBCASE("hand histogram") {
    const RawTable t = table_from(
        "weather,year,severity\nclear,2019,KA\nrain,2019,O\nclear,2019,O\nfog,2020,BC\nclear,2020,KA\nrain,2019,O\n"
        "fog, 2021 ,O\n",
        config);
    const SeverityDistribution d = severity_distribution_report(t, "year", config);
    CHECK(d.csv() == "year,KA,BC,O,total\n2019,1,0,3,4\n2020,1,1,0,2\n2021,0,0,1,1\n");
    CHECK(d.total() == t.size());
  }
  SUBCASE("bad year") {
    const RawTable t = table_from("weather,year,severity\nclear,2019,KA\nrain,20x9,O\n", config);
    try {
      severity_distribution_report(t, "year", config);
      FAIL("expected a row error");
    } catch (const RowError& e) {
      CHECK(e.line() == 3);
    }
  }
}
