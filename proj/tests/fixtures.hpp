#pragma once

#include <string>
#include <vector>

#include <sstream>

#include "json.hpp"
#include "severitas/ingest.hpp"
#include "severitas/pipeline.hpp"
#include "severitas/synth.hpp"
#include "severitas/rng.hpp"
#include "severitas/tensor.hpp"

namespace fixture {

using namespace severitas;

struct FieldSpec {
  std::string name;
  std::size_t categories;  // 0 => numerical
};

inline FeatureSchema make_schema(const std::vector<FieldSpec>& specs) {
  FeatureSchema s;
  s.label_column = "severity";
  std::size_t offset = 0;
  for (const auto& spec : specs) {
    FieldEncoding f;
    f.name = spec.name;
    f.offset = offset;
    if (spec.categories == 0) {
      f.role = ColumnRole::numerical;
      f.width = 1;
    } else {
      f.role = ColumnRole::categorical;
      for (std::size_t c = 0; c < spec.categories; ++c) f.vocabulary.push_back("v" + std::to_string(c));
      f.width = spec.categories;
    }
    offset += f.width;
    s.fields.push_back(f);
  }
  s.encoded_width = offset;
  return s;
}

/// Random encoded rows: a one-hot per categorical field, N(0,1) numerics.
inline Dataset random_rows(const FeatureSchema& schema, std::size_t rows, Rng& rng) {
  Dataset d;
  d.width = schema.encoded_width;
  std::vector<double> row(d.width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill(row.begin(), row.end(), 0.0);
    for (const auto& f : schema.fields) {
      if (f.role == ColumnRole::numerical) {
        row[f.offset] = rng.normal();
      } else {
        row[f.offset + rng.below(f.width)] = 1.0;
      }
    }
    d.append(row, static_cast<int>(rng.below(3)));
  }
  return d;
}

inline Tensor as_tensor(const Dataset& d) { return Tensor({d.rows(), d.width}, d.features); }

// Small separable crash-like table, split 60/20/20.
inline PreparedData small_synthetic(std::uint64_t seed, std::array<std::size_t, kNumClasses> counts = {40, 40, 40}) {
  SynthConfig cfg;
  cfg.class_counts = counts;
  cfg.categorical_fields = 3;
  cfg.categories = 3;
  cfg.numeric_fields = 2;
  cfg.seed = seed;
  SynthData syn = generate_synthetic(cfg);
  std::istringstream in(syn.csv);
  SplitSpec split;
  split.seed = seed;
  return prepare_data(load_csv(in, syn.schema), syn.schema, split);
}

inline nlohmann::json tiny_armnet() {
  return {{"embed_dim", 4}, {"n_heads", 2}, {"n_interactions", 3}, {"hidden_dim", 16}, {"num_layers", 2},
          {"dropout_rate", 0.1}};
}

inline nlohmann::json tiny_mambanet() {
  return {{"embed_channels", 4}, {"conv_out_channels", 6}, {"lstm_hidden", 8}, {"hidden_dims", {16}},
          {"dropout_rate", 0.1}};
}

}  // namespace fixture
