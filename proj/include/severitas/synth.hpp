#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "severitas/ingest.hpp"

namespace severitas {

/// Three-class mixture over a mixed categorical/numeric schema.
///
/// Each class prefers one category per informative categorical field
/// (drawn with probability `purity`, otherwise uniform over the rest) and
/// shifts every informative numeric field by `separation` along a
/// class-specific direction. Noise fields ignore the label.
struct SynthConfig {
  std::array<std::size_t, kNumClasses> class_counts{600, 120, 480};
  std::size_t categorical_fields = 6;
  std::size_t categories = 4;
  std::size_t numeric_fields = 3;
  std::size_t noise_fields = 0;        // extra label-independent categorical fields
  std::size_t informative_fields = 0;  // 0 = every non-noise field; otherwise the first n categorical
  double purity = 0.65;
  double separation = 1.5;
  double numeric_stddev = 1.0;
  double label_noise = 0.0;  // probability a row's label is redrawn uniformly
  int first_year = 2017;
  std::size_t years = 5;
  std::uint64_t seed = 0;

  void validate() const;
  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// "separable", "imbalanced" or "one_informative".
  static SynthConfig preset(std::string_view name);
};

struct SynthData {
  std::string csv;
  SchemaConfig schema;
};

/// CSV text (header plus one row per sample, classes interleaved) and the
/// matching schema config.
SynthData generate_synthetic(const SynthConfig& config);

}  // namespace severitas
