#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "severitas/ingest.hpp"
#include "severitas/ops.hpp"

namespace severitas {

enum class ModelKind { armnet, mambanet };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct NamedParam {
  std::string name;
  std::string group;  // coarse family, e.g. "embedding", "lstm", "dense_0"
  Tensor value;
};

/// A classifier over encoded rows. Parameters live in `params()`; forward
/// takes them as vars so the same code runs on a tape or on constants.
class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual nlohmann::json config_json() const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;

  /// `bound[i]` carries `params()[i]`; `batch` is [rows x encoded_width].
  virtual Var forward(std::span<const Var> bound, const Var& batch, Mode mode, Rng& rng) const = 0;

  std::vector<NamedParam>& params() { return params_; }
  const std::vector<NamedParam>& params() const { return params_; }
  std::size_t parameter_count() const;
  const FeatureSchema& schema() const { return schema_; }

  /// Eval-mode logits for every row, computed in fixed-size chunks.
  Tensor predict_logits(const Dataset& data, std::size_t chunk = 256) const;

 protected:
  explicit Model(FeatureSchema schema) : schema_(std::move(schema)) {}
  Model(const Model&) = default;

  Tensor& add_param(std::string name, std::string group, Shape shape);

  std::vector<NamedParam> params_;
  FeatureSchema schema_;
};

/// Row-wise argmax; ties go to the lowest class index.
std::vector<int> predict_classes(const Tensor& logits);

/// Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
void init_scaled_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Per-field embedding: the field's encoded block times its table.
/// One-hot blocks select a table row; fractional blocks mix rows; a numeric
/// column scales a single direction row. Returns one [rows x dim] var per field.
std::vector<Var> field_embed(const Var& batch, std::span<const Var> tables, const FeatureSchema& schema);

// ---------------------------------------------------------------------------
// Checkpoints: JSON with model kind, config, schema fingerprint and every
// parameter array. Doubles are written in shortest round-trip form.

nlohmann::json checkpoint_json(const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
/// Rebuilds the model and checks the stored fingerprint against `schema`.
std::unique_ptr<Model> load_checkpoint(const nlohmann::json& j, const FeatureSchema& schema);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path, const FeatureSchema& schema);

/// Builds a freshly initialised model from a kind-specific config json.
std::unique_ptr<Model> make_model(ModelKind kind, const nlohmann::json& config, const FeatureSchema& schema, Rng& rng);

}  // namespace severitas
