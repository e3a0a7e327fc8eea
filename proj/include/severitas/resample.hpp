#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "severitas/ingest.hpp"
#include "severitas/rng.hpp"

namespace severitas {

struct ResampleConfig {
  std::size_t k_smote = 5;
  std::size_t k_enn = 3;
  /// Desired per-class count after SMOTE; defaults to the majority count.
  std::optional<std::array<std::size_t, kNumClasses>> target;
  std::uint64_t seed = 0;

  void validate() const;
  static ResampleConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ClassResampleCounts {
  std::size_t before = 0;
  std::size_t after_smote = 0;
  std::size_t after_enn = 0;
  std::size_t removed = 0;
  std::size_t synthesized = 0;
};

struct ResampleReport {
  std::array<ClassResampleCounts, kNumClasses> classes{};

  /// {"KA": {"before": .., "after_smote": .., "after_enn": .., "removed": .., "synthesized": ..}, ...}
  nlohmann::json to_json() const;
  static ResampleReport from_json(const nlohmann::json& j);
};

/// Indices of the k points nearest to `query` (Euclidean), ordered by
/// distance then index. `pool` restricts candidates (all rows when empty);
/// `exclude` removes one row, typically the query itself.
std::vector<std::size_t> knn_indices(const Dataset& points, std::span<const double> query, std::size_t k,
                                     std::span<const std::size_t> pool = {},
                                     std::optional<std::size_t> exclude = std::nullopt);

/// Where a synthetic sample came from: row = base + u * (neighbor - base).
struct SyntheticOrigin {
  std::size_t base = 0;
  std::size_t neighbor = 0;
  double u = 0.0;
};

struct SmoteResult {
  Dataset data;  // originals first (unchanged, same order), then synthetic rows
  std::vector<SyntheticOrigin> origins;  // one per synthetic row, indices into the input
  std::array<std::size_t, kNumClasses> synthesized{};
};

SmoteResult smote_oversample(const Dataset& train, const ResampleConfig& config, Rng& rng);

struct EnnResult {
  Dataset data;
  std::vector<std::size_t> removed;  // ascending indices into the input
  std::array<std::size_t, kNumClasses> removed_per_class{};
};

/// Removes every sample outvoted by another class among its k_enn nearest
/// neighbours. Decisions use the input dataset and are applied together.
EnnResult enn_edit(const Dataset& data, const ResampleConfig& config);

struct SmoteEnnResult {
  Dataset data;
  ResampleReport report;
};

SmoteEnnResult smoteenn(const Dataset& train, const ResampleConfig& config, Rng& rng);

}  // namespace severitas
