#include "severitas/eval_report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "severitas/errors.hpp"
#include "severitas/io.hpp"

namespace severitas {

using nlohmann::json;

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) {
    for (auto v : row) t += v;
  }
  return t;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (int c = 0; c < kNumClasses; ++c) t += counts[c][c];
  return t;
}

std::size_t ConfusionMatrix::row_sum(int c) const {
  std::size_t t = 0;
  for (auto v : counts[c]) t += v;
  return t;
}

std::size_t ConfusionMatrix::col_sum(int c) const {
  std::size_t t = 0;
  for (const auto& row : counts) t += row[c];
  return t;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw ArgumentError("confusion: " + std::to_string(preds.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= kNumClasses || labels[i] < 0 || labels[i] >= kNumClasses) {
      throw ArgumentError("confusion: class index out of range at position " + std::to_string(i));
    }
    ++cm.counts[labels[i]][preds[i]];
  }
  return cm;
}

ClassMetrics classwise_metrics(const ConfusionMatrix& cm) {
  ClassMetrics m;
  const std::size_t total = cm.total();
  for (int c = 0; c < kNumClasses; ++c) {
    ClassScores& s = m.per_class[c];
    const std::size_t tp = cm.counts[c][c];
    const std::size_t predicted = cm.col_sum(c);
    const std::size_t actual = cm.row_sum(c);
    s.no_predictions = predicted == 0;
    s.no_support = actual == 0;
    s.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    s.recall = actual == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual);
    const double denom = s.precision + s.recall;
    s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
    const std::size_t tn = total - predicted - actual + tp;
    s.ovr_accuracy = total == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
  }
  m.overall_accuracy = total == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(total);
  return m;
}

Evaluation evaluate_model(const Model& model, const Dataset& data, std::string split) {
  if (data.rows() == 0) throw ArgumentError("evaluate_model: empty split '" + split + "'");
  const Tensor logits = model.predict_logits(data);
  const std::vector<int> preds = predict_classes(logits);
  Evaluation e;
  e.model = std::string(model_kind_name(model.kind()));
  e.split = std::move(split);
  e.confusion = confusion(preds, data.labels);
  e.metrics = classwise_metrics(e.confusion);
  e.mean_log_loss = cross_entropy(Var(logits), data.labels).value().data()[0];
  return e;
}

json metrics_json(const Evaluation& e) {
  json per_class = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassScores& s = e.metrics.per_class[c];
    json entry{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"ovr_accuracy", s.ovr_accuracy}};
    if (s.no_predictions) entry["no_predictions"] = true;
    if (s.no_support) entry["no_support"] = true;
    per_class[std::string(severity_name(c))] = std::move(entry);
  }
  json cm = json::array();
  for (const auto& row : e.confusion.counts) cm.push_back(row);
  return json{{"model", e.model},
              {"split", e.split},
              {"per_class", per_class},
              {"overall_accuracy", e.metrics.overall_accuracy},
              {"mean_log_loss", e.mean_log_loss},
              {"samples", e.confusion.total()},
              {"confusion", cm}};
}

namespace {

std::string class_header() {
  std::string out = "true\\pred";
  for (auto name : kClassNames) out += "," + std::string(name);
  return out + "\n";
}

std::string percent(double v) { return format_fixed(100.0 * v, 2); }

}  // namespace

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = class_header();
  for (int r = 0; r < kNumClasses; ++r) {
    out += std::string(severity_name(r));
    for (int c = 0; c < kNumClasses; ++c) out += "," + std::to_string(cm.counts[r][c]);
    out += "\n";
  }
  return out;
}

std::string confusion_normalized_csv(const ConfusionMatrix& cm) {
  std::string out = class_header();
  for (int r = 0; r < kNumClasses; ++r) {
    const std::size_t n = cm.row_sum(r);
    out += std::string(severity_name(r));
    for (int c = 0; c < kNumClasses; ++c) {
      const double v = n == 0 ? 0.0 : static_cast<double>(cm.counts[r][c]) / static_cast<double>(n);
      out += "," + format_double(v);
    }
    out += "\n";
  }
  return out;
}

std::string metrics_table(std::span<const Evaluation> evals) {
  std::string out = "model,class,precision_pct,recall_pct,f1_pct,ovr_accuracy_pct\n";
  for (const auto& e : evals) {
    for (int c = 0; c < kNumClasses; ++c) {
      const ClassScores& s = e.metrics.per_class[c];
      out += e.model + "," + std::string(severity_name(c)) + "," + percent(s.precision) + "," + percent(s.recall) +
             "," + percent(s.f1) + "," + percent(s.ovr_accuracy) + "\n";
    }
  }
  out += "\nmodel,split,overall_accuracy_pct\n";
  for (const auto& e : evals) out += e.model + "," + e.split + "," + percent(e.metrics.overall_accuracy) + "\n";
  return out;
}

namespace {

double accuracy(const Model& model, const Dataset& data) {
  const std::vector<int> preds = predict_classes(model.predict_logits(data));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

}  // namespace

FieldImportance permutation_importance(const Model& model, const Dataset& data, const std::string& field, Rng& rng,
                                       std::size_t repeats) {
  const FeatureSchema& schema = model.schema();
  const FieldEncoding& f = schema.fields[schema.field_index(field)];
  if (data.rows() == 0) throw ArgumentError("permutation_importance: empty dataset");
  if (repeats == 0) throw ArgumentError("permutation_importance: repeats must be >= 1");

  const double base = accuracy(model, data);
  FieldImportance out;
  out.field = field;
  std::vector<std::size_t> perm(data.rows());
  for (std::size_t r = 0; r < repeats; ++r) {
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    Dataset shuffled = data;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      auto src = data.row(perm[i]).subspan(f.offset, f.width);
      std::copy(src.begin(), src.end(), shuffled.row(i).subspan(f.offset, f.width).begin());
    }
    out.drops.push_back(base - accuracy(model, shuffled));
  }
  double sum = 0.0;
  for (double d : out.drops) sum += d;
  out.mean_drop = sum / static_cast<double>(repeats);
  return out;
}

std::vector<FieldImportance> permutation_importance_all(const Model& model, const Dataset& data, std::uint64_t seed,
                                                        std::size_t repeats) {
  std::vector<FieldImportance> out;
  const auto& fields = model.schema().fields;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    Rng rng = Rng::derive(seed, "importance", i);
    out.push_back(permutation_importance(model, data, fields[i].name, rng, repeats));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FieldImportance& a, const FieldImportance& b) { return a.mean_drop > b.mean_drop; });
  return out;
}

std::size_t SeverityDistribution::total() const {
  std::size_t t = 0;
  for (const auto& [year, counts] : by_year) {
    for (auto c : counts) t += c;
  }
  return t;
}

std::string SeverityDistribution::csv() const {
  std::string out = "year";
  for (auto name : kClassNames) out += "," + std::string(name);
  out += ",total\n";
  for (const auto& [year, counts] : by_year) {
    std::size_t row_total = 0;
    out += std::to_string(year);
    for (auto c : counts) {
      out += "," + std::to_string(c);
      row_total += c;
    }
    out += "," + std::to_string(row_total) + "\n";
  }
  return out;
}

SeverityDistribution severity_distribution_report(const RawTable& table, const std::string& year_column,
                                                  const SchemaConfig& config) {
  if (year_column.empty()) throw ConfigError("severity report: no year column configured");
  const std::size_t col = table.column_index(year_column);
  const std::vector<int> labels = raw_labels(table, config);
  SeverityDistribution out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string_view cell = trim(table.rows[r][col]);
    long long year = 0;
    const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), year);
    if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size()) {
      throw RowError(table.lines[r], "column '" + year_column + "': bad year '" + table.rows[r][col] + "'");
    }
    ++out.by_year[year][labels[r]];
  }
  return out;
}

}  // namespace severitas
