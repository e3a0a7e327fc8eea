#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace severitas {

// ---------------------------------------------------------------------------
// Severity classes

enum class Severity : int { KA = 0, BC = 1, O = 2 };
inline constexpr int kNumClasses = 3;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames{"KA", "BC", "O"};

std::string_view severity_name(int cls);
std::optional<int> parse_severity(std::string_view text);

// ---------------------------------------------------------------------------
// Schema configuration (user supplied)

enum class ColumnRole { categorical, numerical, label };
enum class IngestMode { strict, lenient };

struct ColumnDecl {
  std::string name;
  ColumnRole role = ColumnRole::categorical;
  /// Optional fixed vocabulary for categorical columns; fitted when empty.
  std::vector<std::string> categories;
};

struct SchemaConfig {
  std::vector<ColumnDecl> columns;  // declaration order is field order
  IngestMode mode = IngestMode::strict;
  /// Raw label text -> "KA" | "BC" | "O". Identity when empty.
  std::map<std::string, std::string> label_map;
  /// Optional column used by the per-year severity report.
  std::string year_column;

  const ColumnDecl& label() const;
  std::vector<const ColumnDecl*> features() const;

  static SchemaConfig from_json(const nlohmann::json& j);
  static SchemaConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Raw table

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // cells in header order
  std::vector<std::size_t> lines;              // physical source line per row
  /// Lenient mode only: rows dropped, attributed to the first bad column.
  std::map<std::string, std::size_t> dropped_by_column;
  std::size_t dropped_rows = 0;

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t column_index(std::string_view name) const;
  const std::string& cell(std::size_t row, std::string_view column) const;
  RawTable select(std::span<const std::size_t> indices) const;
};

RawTable load_csv(std::istream& in, const SchemaConfig& config);
RawTable load_csv(const std::filesystem::path& path, const SchemaConfig& config);

/// Label index (0..2) of every row.
std::vector<int> raw_labels(const RawTable& table, const SchemaConfig& config);

// ---------------------------------------------------------------------------
// Fitted schema

struct FieldEncoding {
  std::string name;
  ColumnRole role = ColumnRole::categorical;
  std::vector<std::string> vocabulary;  // categorical only, sorted
  double mean = 0.0;                    // numerical only
  double stddev = 1.0;                  // numerical only, > 0
  std::size_t offset = 0;               // first encoded column
  std::size_t width = 0;                // vocabulary size, or 1
};

struct FeatureSchema {
  std::vector<FieldEncoding> fields;
  std::string label_column;
  std::size_t encoded_width = 0;
  std::vector<std::string> warnings;

  std::size_t field_index(std::string_view name) const;
  /// Header names of the encoded columns ("weather=rain", "speed_limit").
  std::vector<std::string> encoded_column_names() const;

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);
  /// Stable 64-bit digest of the fitted encoders (warnings excluded).
  std::uint64_t fingerprint() const;
};

/// Fits vocabularies and population mean/std on every row of `table`.
FeatureSchema fit_schema(const RawTable& table, const SchemaConfig& config);

// ---------------------------------------------------------------------------
// Encoded dataset

enum class Split : std::uint8_t { train, val, test };
std::string_view split_name(Split s);

struct Dataset {
  std::size_t width = 0;
  std::vector<double> features;  // rows x width, row-major
  std::vector<int> labels;
  std::vector<Split> splits;     // empty, or one tag per row

  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * width, width);
  }
  std::span<double> row(std::size_t i) { return std::span<double>(features).subspan(i * width, width); }
  void append(std::span<const double> values, int label);
  Dataset select(std::span<const std::size_t> indices) const;
  Dataset subset(Split s) const;
  std::array<std::size_t, kNumClasses> class_counts() const;
};

struct TransformStats {
  std::map<std::string, std::size_t> unseen_by_column;  // lenient mode only
};

/// Standardizes numeric cells, one-hot encodes categorical cells, encodes labels.
Dataset transform(const RawTable& table, const FeatureSchema& schema, const SchemaConfig& config,
                  TransformStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Stratified split

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-class counts for a split spec using largest-remainder rounding.
std::array<std::size_t, 3> split_counts(std::size_t n, const SplitSpec& spec);

/// One tag per label. Each class is shuffled with a seed-derived stream and
/// cut by `split_counts`.
std::vector<Split> stratified_split(std::span<const int> labels, const SplitSpec& spec);
void stratified_split(Dataset& dataset, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Encoded CSV checkpoint: header of encoded column names plus "label";
// one row per sample, last column the label index.

std::string encoded_csv(const Dataset& data, const FeatureSchema& schema);
Dataset parse_encoded_csv(std::istream& in, const FeatureSchema& schema);
void write_encoded_csv(const std::filesystem::path& path, const Dataset& data, const FeatureSchema& schema);
Dataset read_encoded_csv(const std::filesystem::path& path, const FeatureSchema& schema);

}  // namespace severitas
