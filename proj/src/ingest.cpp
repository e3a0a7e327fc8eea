#include "severitas/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "severitas/errors.hpp"
#include "severitas/io.hpp"
#include "severitas/rng.hpp"

namespace severitas {

using nlohmann::json;

std::string_view severity_name(int cls) {
  if (cls < 0 || cls >= kNumClasses) throw ArgumentError("class index " + std::to_string(cls) + " out of range");
  return kClassNames[static_cast<std::size_t>(cls)];
}

std::optional<int> parse_severity(std::string_view text) {
  text = trim(text);
  for (int c = 0; c < kNumClasses; ++c) {
    if (text == kClassNames[static_cast<std::size_t>(c)]) return c;
  }
  return std::nullopt;
}

namespace {

bool is_missing(std::string_view cell) {
  static constexpr std::string_view kTokens[] = {"", "NA", "N/A", "n/a", "na", "null", "NULL", "NaN", "nan", "?"};
  cell = trim(cell);
  return std::find(std::begin(kTokens), std::end(kTokens), cell) != std::end(kTokens);
}

std::string_view role_name(ColumnRole r) {
  switch (r) {
    case ColumnRole::categorical: return "categorical";
    case ColumnRole::numerical: return "numerical";
    case ColumnRole::label: return "label";
  }
  return "?";
}

ColumnRole parse_role(const std::string& s) {
  if (s == "categorical") return ColumnRole::categorical;
  if (s == "numerical") return ColumnRole::numerical;
  if (s == "label") return ColumnRole::label;
  throw ConfigError("unknown column role '" + s + "'");
}

std::optional<int> map_label(std::string_view raw, const SchemaConfig& config) {
  raw = trim(raw);
  if (!config.label_map.empty()) {
    auto it = config.label_map.find(std::string(raw));
    if (it == config.label_map.end()) return std::nullopt;
    return parse_severity(it->second);
  }
  return parse_severity(raw);
}

}  // namespace

// ---------------------------------------------------------------------------

const ColumnDecl& SchemaConfig::label() const {
  for (const auto& c : columns) {
    if (c.role == ColumnRole::label) return c;
  }
  throw SchemaError("no label column declared");
}

std::vector<const ColumnDecl*> SchemaConfig::features() const {
  std::vector<const ColumnDecl*> out;
  for (const auto& c : columns) {
    if (c.role != ColumnRole::label) out.push_back(&c);
  }
  return out;
}

SchemaConfig SchemaConfig::from_json(const json& j) {
  SchemaConfig cfg;
  try {
    const std::string mode = j.value("mode", std::string("strict"));
    if (mode == "strict") {
      cfg.mode = IngestMode::strict;
    } else if (mode == "lenient") {
      cfg.mode = IngestMode::lenient;
    } else {
      throw ConfigError("unknown ingest mode '" + mode + "'");
    }
    if (j.contains("label_map")) cfg.label_map = j.at("label_map").get<std::map<std::string, std::string>>();
    cfg.year_column = j.value("year_column", std::string());
    for (const auto& col : j.at("columns")) {
      ColumnDecl d;
      d.name = col.at("name").get<std::string>();
      d.role = parse_role(col.at("role").get<std::string>());
      if (col.contains("categories")) d.categories = col.at("categories").get<std::vector<std::string>>();
      cfg.columns.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schema config: ") + e.what());
  }
  std::set<std::string> seen;
  int labels = 0;
  for (const auto& c : cfg.columns) {
    if (!seen.insert(c.name).second) throw ConfigError("duplicate column '" + c.name + "'");
    if (c.role == ColumnRole::label) ++labels;
  }
  if (labels != 1) throw ConfigError("schema config must declare exactly one label column");
  if (cfg.features().empty()) throw ConfigError("schema config declares no feature columns");
  for (const auto& [raw, mapped] : cfg.label_map) {
    if (!parse_severity(mapped)) throw ConfigError("label_map target '" + mapped + "' is not KA, BC or O");
  }
  return cfg;
}

SchemaConfig SchemaConfig::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json SchemaConfig::to_json() const {
  json cols = json::array();
  for (const auto& c : columns) {
    json col{{"name", c.name}, {"role", role_name(c.role)}};
    if (!c.categories.empty()) col["categories"] = c.categories;
    cols.push_back(col);
  }
  json j{{"mode", mode == IngestMode::strict ? "strict" : "lenient"}, {"columns", cols}};
  if (!label_map.empty()) j["label_map"] = label_map;
  if (!year_column.empty()) j["year_column"] = year_column;
  return j;
}

// ---------------------------------------------------------------------------

std::size_t RawTable::column_index(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

const std::string& RawTable::cell(std::size_t row, std::string_view column) const {
  return rows.at(row).at(column_index(column));
}

RawTable RawTable::select(std::span<const std::size_t> indices) const {
  RawTable out;
  out.header = header;
  for (std::size_t i : indices) {
    out.rows.push_back(rows.at(i));
    out.lines.push_back(lines.at(i));
  }
  return out;
}

RawTable load_csv(std::istream& in, const SchemaConfig& config) {
  auto records = read_csv_records(in);
  if (records.empty()) throw SchemaError("CSV has no header row");
  RawTable table;
  for (auto& h : records.front().cells) table.header.emplace_back(trim(h));

  struct Check {
    const ColumnDecl* decl;
    std::size_t index;
  };
  std::vector<Check> checks;
  for (const auto& c : config.columns) checks.push_back({&c, table.column_index(c.name)});

  const bool strict = config.mode == IngestMode::strict;
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    if (rec.cells.size() != table.header.size()) {
      if (strict) {
        throw RowError(rec.line, "expected " + std::to_string(table.header.size()) + " cells, got " +
                                     std::to_string(rec.cells.size()));
      }
      ++table.dropped_rows;
      ++table.dropped_by_column["(malformed)"];
      continue;
    }
    for (auto& cell : rec.cells) cell = std::string(trim(cell));

    std::string problem;
    const ColumnDecl* bad = nullptr;
    for (const auto& chk : checks) {
      const std::string& cell = rec.cells[chk.index];
      double unused = 0.0;
      if (chk.decl->role == ColumnRole::numerical && !parse_double(cell, unused)) {
        if (!is_missing(cell)) {
          problem = "unparseable number '" + cell + "'";
        } else {
          problem = cell.empty() ? "missing value" : "missing value '" + cell + "'";
        }
      } else if (chk.decl->role == ColumnRole::categorical && is_missing(cell)) {
        problem = "missing value";
      } else if (chk.decl->role == ColumnRole::label && !map_label(cell, config)) {
        problem = is_missing(cell) ? "missing label" : "unknown label '" + cell + "'";
      }
      if (!problem.empty()) {
        bad = chk.decl;
        break;
      }
    }
    if (bad) {
      if (strict) throw RowError(rec.line, "column '" + bad->name + "': " + problem);
      ++table.dropped_rows;
      ++table.dropped_by_column[bad->name];
      continue;
    }
    table.rows.push_back(std::move(rec.cells));
    table.lines.push_back(rec.line);
  }
  return table;
}

RawTable load_csv(const std::filesystem::path& path, const SchemaConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_csv(in, config);
}

std::vector<int> raw_labels(const RawTable& table, const SchemaConfig& config) {
  const std::size_t col = table.column_index(config.label().name);
  std::vector<int> out;
  out.reserve(table.size());
  for (std::size_t r = 0; r < table.size(); ++r) {
    auto cls = map_label(table.rows[r][col], config);
    if (!cls) throw RowError(table.lines[r], "unknown label '" + table.rows[r][col] + "'");
    out.push_back(*cls);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t FeatureSchema::field_index(std::string_view name) const {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].name == name) return i;
  }
  throw ArgumentError("unknown field '" + std::string(name) + "'");
}

std::vector<std::string> FeatureSchema::encoded_column_names() const {
  std::vector<std::string> names;
  for (const auto& f : fields) {
    if (f.role == ColumnRole::numerical) {
      names.push_back(f.name);
    } else {
      for (const auto& v : f.vocabulary) names.push_back(f.name + "=" + v);
    }
  }
  return names;
}

json FeatureSchema::to_json() const {
  json fs = json::array();
  for (const auto& f : fields) {
    json jf{{"name", f.name}, {"role", role_name(f.role)}, {"offset", f.offset}, {"width", f.width}};
    if (f.role == ColumnRole::numerical) {
      jf["mean"] = f.mean;
      jf["std"] = f.stddev;
    } else {
      jf["vocabulary"] = f.vocabulary;
    }
    fs.push_back(jf);
  }
  return json{{"fields", fs}, {"label_column", label_column}, {"encoded_width", encoded_width},
              {"warnings", warnings}};
}

FeatureSchema FeatureSchema::from_json(const json& j) {
  FeatureSchema s;
  try {
    s.label_column = j.at("label_column").get<std::string>();
    s.encoded_width = j.at("encoded_width").get<std::size_t>();
    if (j.contains("warnings")) s.warnings = j.at("warnings").get<std::vector<std::string>>();
    std::size_t offset = 0;
    for (const auto& jf : j.at("fields")) {
      FieldEncoding f;
      f.name = jf.at("name").get<std::string>();
      f.role = parse_role(jf.at("role").get<std::string>());
      f.offset = jf.at("offset").get<std::size_t>();
      f.width = jf.at("width").get<std::size_t>();
      if (f.role == ColumnRole::numerical) {
        f.mean = jf.at("mean").get<double>();
        f.stddev = jf.at("std").get<double>();
        if (f.width != 1 || !(f.stddev > 0.0)) throw SchemaError("bad numeric field '" + f.name + "'");
      } else {
        f.vocabulary = jf.at("vocabulary").get<std::vector<std::string>>();
        if (f.width != f.vocabulary.size()) throw SchemaError("bad categorical field '" + f.name + "'");
      }
      if (f.offset != offset) throw SchemaError("field offsets are not contiguous at '" + f.name + "'");
      offset += f.width;
      s.fields.push_back(std::move(f));
    }
    if (offset != s.encoded_width) throw SchemaError("encoded_width does not match field widths");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("feature schema: ") + e.what());
  }
  return s;
}

std::uint64_t FeatureSchema::fingerprint() const {
  json j = to_json();
  j.erase("warnings");
  return fnv1a64(j.dump());
}

FeatureSchema fit_schema(const RawTable& table, const SchemaConfig& config) {
  if (table.size() == 0) throw ArgumentError("fit_schema: empty table");
  FeatureSchema schema;
  schema.label_column = config.label().name;
  std::size_t offset = 0;
  for (const ColumnDecl* decl : config.features()) {
    const std::size_t col = table.column_index(decl->name);
    FieldEncoding f;
    f.name = decl->name;
    f.role = decl->role;
    f.offset = offset;
    if (decl->role == ColumnRole::numerical) {
      std::vector<double> xs;
      xs.reserve(table.size());
      for (std::size_t r = 0; r < table.size(); ++r) {
        double v = 0.0;
        if (!parse_double(table.rows[r][col], v)) {
          throw RowError(table.lines[r], "column '" + f.name + "': unparseable number '" + table.rows[r][col] + "'");
        }
        xs.push_back(v);
      }
      const double n = static_cast<double>(xs.size());
      double total = 0.0;
      for (double v : xs) total += v;
      f.mean = total / n;
      double ss = 0.0;
      for (double v : xs) ss += (v - f.mean) * (v - f.mean);
      f.stddev = std::sqrt(ss / n);
      if (!(f.stddev > 1e-12 * std::max(1.0, std::abs(f.mean)))) {
        f.stddev = 1.0;
        schema.warnings.push_back("numeric column '" + f.name + "' is constant; using std = 1");
      }
      f.width = 1;
    } else {
      std::set<std::string> vocab;
      if (!decl->categories.empty()) {
        vocab.insert(decl->categories.begin(), decl->categories.end());
      } else {
        for (const auto& row : table.rows) vocab.insert(row[col]);
      }
      f.vocabulary.assign(vocab.begin(), vocab.end());
      f.width = f.vocabulary.size();
    }
    offset += f.width;
    schema.fields.push_back(std::move(f));
  }
  schema.encoded_width = offset;
  return schema;
}

// ---------------------------------------------------------------------------

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

void Dataset::append(std::span<const double> values, int label) {
  if (values.size() != width) {
    throw ShapeError("dataset row has " + std::to_string(values.size()) + " values, expected " + std::to_string(width));
  }
  features.insert(features.end(), values.begin(), values.end());
  labels.push_back(label);
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out;
  out.width = width;
  out.features.reserve(indices.size() * width);
  for (std::size_t i : indices) {
    out.append(row(i), labels.at(i));
    if (!splits.empty()) out.splits.push_back(splits[i]);
  }
  return out;
}

Dataset Dataset::subset(Split s) const {
  if (splits.size() != rows()) throw ArgumentError("dataset has no split tags");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rows(); ++i) {
    if (splits[i] == s) idx.push_back(i);
  }
  Dataset out = select(idx);
  out.splits.clear();
  return out;
}

std::array<std::size_t, kNumClasses> Dataset::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
  return counts;
}

Dataset transform(const RawTable& table, const FeatureSchema& schema, const SchemaConfig& config,
                  TransformStats* stats) {
  Dataset data;
  data.width = schema.encoded_width;
  data.features.reserve(table.size() * schema.encoded_width);
  std::vector<std::size_t> cols;
  for (const auto& f : schema.fields) cols.push_back(table.column_index(f.name));
  const auto labels = raw_labels(table, config);
  const bool strict = config.mode == IngestMode::strict;

  std::vector<double> row(schema.encoded_width);
  for (std::size_t r = 0; r < table.size(); ++r) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t fi = 0; fi < schema.fields.size(); ++fi) {
      const auto& f = schema.fields[fi];
      const std::string& cell = table.rows[r][cols[fi]];
      if (f.role == ColumnRole::numerical) {
        double v = 0.0;
        if (!parse_double(cell, v)) {
          throw RowError(table.lines[r], "column '" + f.name + "': unparseable number '" + cell + "'");
        }
        row[f.offset] = (v - f.mean) / f.stddev;
        continue;
      }
      auto it = std::lower_bound(f.vocabulary.begin(), f.vocabulary.end(), cell);
      if (it == f.vocabulary.end() || *it != cell) {
        if (strict) throw RowError(table.lines[r], "column '" + f.name + "': unseen category '" + cell + "'");
        if (stats) ++stats->unseen_by_column[f.name];
        continue;
      }
      row[f.offset + static_cast<std::size_t>(it - f.vocabulary.begin())] = 1.0;
    }
    data.append(row, labels[r]);
  }
  return data;
}

// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
  for (double f : {train, val, test}) {
    if (!(f > 0.0 && f < 1.0)) throw ArgumentError("split fractions must lie in (0, 1)");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1");
}

std::array<std::size_t, 3> split_counts(std::size_t n, const SplitSpec& spec) {
  const std::array<double, 3> fractions{spec.train, spec.val, spec.test};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double quota = static_cast<double>(n) * fractions[i];
    counts[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    remainders[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best] + 1e-12) best = i;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  return counts;
}

std::vector<Split> stratified_split(std::span<const int> labels, const SplitSpec& spec) {
  spec.validate();
  std::vector<Split> tags(labels.size(), Split::train);
  for (int cls = 0; cls < kNumClasses; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    if (idx.empty()) continue;
    if (idx.size() < 3) {
      throw StratificationError("class " + std::string(severity_name(cls)) + " has " + std::to_string(idx.size()) +
                                " rows; at least 3 are needed");
    }
    Rng rng = Rng::derive(spec.seed, "split", static_cast<std::uint64_t>(cls));
    rng.shuffle(idx);
    const auto counts = split_counts(idx.size(), spec);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      tags[idx[k]] = k < counts[0] ? Split::train : (k < counts[0] + counts[1] ? Split::val : Split::test);
    }
  }
  return tags;
}

void stratified_split(Dataset& dataset, const SplitSpec& spec) {
  dataset.splits = stratified_split(dataset.labels, spec);
}

// ---------------------------------------------------------------------------

std::string encoded_csv(const Dataset& data, const FeatureSchema& schema) {
  if (data.width != schema.encoded_width) throw ShapeError("dataset width does not match schema");
  auto header = schema.encoded_column_names();
  header.push_back("label");
  std::string out = csv_join(header) + "\n";
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (double v : data.row(r)) {
      out += format_double(v);
      out.push_back(',');
    }
    out += std::to_string(data.labels[r]);
    out.push_back('\n');
  }
  return out;
}

Dataset parse_encoded_csv(std::istream& in, const FeatureSchema& schema) {
  auto records = read_csv_records(in);
  auto header = schema.encoded_column_names();
  header.push_back("label");
  if (records.empty() || records.front().cells != header) {
    throw SchemaError("encoded CSV header does not match the feature schema");
  }
  Dataset data;
  data.width = schema.encoded_width;
  std::vector<double> row(data.width);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.cells.size() != header.size()) throw RowError(rec.line, "wrong cell count in encoded CSV");
    for (std::size_t c = 0; c < data.width; ++c) {
      if (!parse_double(rec.cells[c], row[c])) throw RowError(rec.line, "bad number '" + rec.cells[c] + "'");
    }
    double label = 0.0;
    if (!parse_double(rec.cells.back(), label) || label != std::floor(label) || label < 0 || label >= kNumClasses) {
      throw RowError(rec.line, "bad label index '" + rec.cells.back() + "'");
    }
    data.append(row, static_cast<int>(label));
  }
  return data;
}

void write_encoded_csv(const std::filesystem::path& path, const Dataset& data, const FeatureSchema& schema) {
  write_file_atomic(path, encoded_csv(data, schema));
}

Dataset read_encoded_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_encoded_csv(in, schema);
}

}  // namespace severitas
