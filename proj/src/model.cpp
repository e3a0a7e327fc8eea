#include "severitas/model.hpp"

#include <cmath>
#include <cstdio>

#include "severitas/arm_net.hpp"
#include "severitas/errors.hpp"
#include "severitas/io.hpp"
#include "severitas/mamba_net.hpp"

namespace severitas {

using nlohmann::json;

namespace {
constexpr int kCheckpointVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  return kind == ModelKind::armnet ? "armnet" : "mambanet";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "armnet") return ModelKind::armnet;
  if (name == "mambanet") return ModelKind::mambanet;
  throw ArgumentError("unknown model kind '" + std::string(name) + "' (expected armnet or mambanet)");
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Tensor& Model::add_param(std::string name, std::string group, Shape shape) {
  params_.push_back({std::move(name), std::move(group), Tensor(std::move(shape))});
  return params_.back().value;
}

Tensor Model::predict_logits(const Dataset& data, std::size_t chunk) const {
  if (data.width != schema_.encoded_width) {
    throw ShapeError("dataset width " + std::to_string(data.width) + " does not match encoded width " +
                     std::to_string(schema_.encoded_width));
  }
  if (data.rows() == 0) throw ArgumentError("predict_logits: empty dataset");
  std::vector<Var> bound;
  for (const auto& p : params_) bound.emplace_back(p.value);
  Rng unused(0);
  std::vector<double> out;
  std::size_t classes = 0;
  for (std::size_t start = 0; start < data.rows(); start += chunk) {
    const std::size_t n = std::min(chunk, data.rows() - start);
    std::vector<double> rows(data.features.begin() + static_cast<std::ptrdiff_t>(start * data.width),
                             data.features.begin() + static_cast<std::ptrdiff_t>((start + n) * data.width));
    Var logits = forward(bound, Var(Tensor({n, data.width}, std::move(rows))), Mode::eval, unused);
    classes = logits.shape()[1];
    out.insert(out.end(), logits.value().values().begin(), logits.value().values().end());
  }
  return Tensor({data.rows(), classes}, std::move(out));
}

std::vector<int> predict_classes(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("predict_classes: logits must be rank 2");
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  std::vector<int> out(rows, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

void init_scaled_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
}

std::vector<Var> field_embed(const Var& batch, std::span<const Var> tables, const FeatureSchema& schema) {
  if (batch.shape().size() != 2 || batch.shape()[1] != schema.encoded_width) {
    throw ShapeError("batch shape " + shape_str(batch.shape()) + " does not match encoded width " +
                     std::to_string(schema.encoded_width));
  }
  if (tables.size() != schema.fields.size()) throw ShapeError("one embedding table per field is required");
  std::vector<Var> out;
  out.reserve(tables.size());
  for (std::size_t f = 0; f < schema.fields.size(); ++f) {
    const auto& field = schema.fields[f];
    out.push_back(matmul(slice_last(batch, field.offset, field.width), tables[f]));
  }
  return out;
}

// ---------------------------------------------------------------------------

json checkpoint_json(const Model& model) {
  json params = json::array();
  for (const auto& p : model.params()) {
    params.push_back({{"name", p.name}, {"group", p.group}, {"shape", p.value.shape()}, {"data", p.value.values()}});
  }
  return json{{"format", "severitas-checkpoint"},
              {"version", kCheckpointVersion},
              {"model_kind", model_kind_name(model.kind())},
              {"config", model.config_json()},
              {"schema_fingerprint", hex64(model.schema().fingerprint())},
              {"params", params}};
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  write_file_atomic(path, checkpoint_json(model).dump() + "\n");
}

std::unique_ptr<Model> load_checkpoint(const json& j, const FeatureSchema& schema) {
  try {
    if (j.at("format") != "severitas-checkpoint") throw CheckpointError("not a severitas checkpoint");
    if (j.at("version") != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + j.at("version").dump());
    }
    const std::string stored = j.at("schema_fingerprint").get<std::string>();
    if (stored != hex64(schema.fingerprint())) {
      throw CheckpointError("schema fingerprint mismatch: checkpoint " + stored + ", schema " +
                            hex64(schema.fingerprint()));
    }
    const ModelKind kind = parse_model_kind(j.at("model_kind").get<std::string>());
    Rng unused(0);
    auto model = make_model(kind, j.at("config"), schema, unused);
    const auto& params = j.at("params");
    if (params.size() != model->params().size()) throw CheckpointError("parameter list does not match the config");
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = model->params()[i];
      if (params[i].at("name") != p.name || params[i].at("shape").get<Shape>() != p.value.shape()) {
        throw CheckpointError("parameter '" + p.name + "' does not match the checkpoint");
      }
      p.value = Tensor(p.value.shape(), params[i].at("data").get<std::vector<double>>());
    }
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path, const FeatureSchema& schema) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return load_checkpoint(j, schema);
}

std::unique_ptr<Model> make_model(ModelKind kind, const json& config, const FeatureSchema& schema, Rng& rng) {
  if (kind == ModelKind::armnet) return std::make_unique<ArmNet>(ArmNetConfig::from_json(config), schema, rng);
  return std::make_unique<MambaNet>(MambaNetConfig::from_json(config), schema, rng);
}

}  // namespace severitas
