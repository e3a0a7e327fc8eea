#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "severitas/ingest.hpp"
#include "severitas/model.hpp"

namespace severitas {

/// counts[true][predicted], classes in KA, BC, O order.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(int c) const;
  std::size_t col_sum(int c) const;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ovr_accuracy = 0.0;  // (TP + TN) / total, one class against the rest
  bool no_predictions = false;  // precision denominator was zero
  bool no_support = false;      // recall denominator was zero
};

struct ClassMetrics {
  std::array<ClassScores, kNumClasses> per_class{};
  double overall_accuracy = 0.0;
};

/// Zero denominators give 0 and set the matching flag.
ClassMetrics classwise_metrics(const ConfusionMatrix& cm);

struct Evaluation {
  std::string model;
  std::string split;
  ConfusionMatrix confusion;
  ClassMetrics metrics;
  double mean_log_loss = 0.0;
};

/// Eval-mode forward over `data`, argmax with ties to the lowest index.
Evaluation evaluate_model(const Model& model, const Dataset& data, std::string split);

/// {model, split, per_class: {KA: {...}, ...}, overall_accuracy, mean_log_loss}
nlohmann::json metrics_json(const Evaluation& e);

/// Header row and column of class names.
std::string confusion_csv(const ConfusionMatrix& cm);
/// Same layout with each row divided by its sum (zero rows stay zero).
std::string confusion_normalized_csv(const ConfusionMatrix& cm);

/// Percentages with two decimals, one row per (model, class) as in the
/// per-class results table, followed by overall accuracy per model.
std::string metrics_table(std::span<const Evaluation> evals);

struct FieldImportance {
  std::string field;
  double mean_drop = 0.0;
  std::vector<double> drops;  // one per repeat
};

/// Accuracy drop when the field's encoded block is shuffled across rows.
FieldImportance permutation_importance(const Model& model, const Dataset& data, const std::string& field, Rng& rng,
                                       std::size_t repeats);
/// Every field, each with its own derived stream, sorted by drop descending.
std::vector<FieldImportance> permutation_importance_all(const Model& model, const Dataset& data, std::uint64_t seed,
                                                        std::size_t repeats);

struct SeverityDistribution {
  std::map<long long, std::array<std::size_t, kNumClasses>> by_year;

  std::size_t total() const;
  /// `year,KA,BC,O,total`
  std::string csv() const;
};

/// Per-(year, class) row counts of a raw table.
SeverityDistribution severity_distribution_report(const RawTable& table, const std::string& year_column,
                                                  const SchemaConfig& config);

}  // namespace severitas
