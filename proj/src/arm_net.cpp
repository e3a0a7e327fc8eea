#include "severitas/arm_net.hpp"

#include "severitas/errors.hpp"

namespace severitas {

using nlohmann::json;

void ArmNetConfig::validate() const {
  if (embed_dim < 1 || n_heads < 1 || n_interactions < 1 || hidden_dim < 1 || num_layers < 1) {
    throw ConfigError("armnet: every size must be >= 1");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("armnet: dropout_rate must lie in [0, 1)");
  if (output_dim != kNumClasses) throw ConfigError("armnet: output_dim must equal the number of severity classes");
  if (!(epsilon > 0.0)) throw ConfigError("armnet: epsilon must be positive");
}

ArmNetConfig ArmNetConfig::from_json(const json& j) {
  ArmNetConfig c;
  try {
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_interactions = j.value("n_interactions", c.n_interactions);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.output_dim = j.value("output_dim", c.output_dim);
    c.epsilon = j.value("epsilon", c.epsilon);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("armnet config: ") + e.what());
  }
  c.validate();
  return c;
}

json ArmNetConfig::to_json() const {
  return json{{"embed_dim", embed_dim},   {"n_heads", n_heads},       {"n_interactions", n_interactions},
              {"hidden_dim", hidden_dim}, {"num_layers", num_layers}, {"dropout_rate", dropout_rate},
              {"output_dim", output_dim}, {"epsilon", epsilon}};
}

InteractionOutput exp_interaction(const Var& embeddings, const Var& key, const Var& query, const Var& gate_logits,
                                  double epsilon) {
  const Shape& s = embeddings.shape();
  if (s.size() != 3) throw ShapeError("exp_interaction: embeddings must be [rows x fields x dim]");
  const std::size_t rows = s[0], fields = s[1], dim = s[2];
  const std::size_t k = query.shape()[0];
  if (gate_logits.shape() != Shape{k}) throw ShapeError("exp_interaction: one gate per interaction is required");

  Var flat = reshape(embeddings, {rows * fields, dim});
  Var scores = matmul(matmul(flat, key), transpose(query));                       // [rows*fields x K]
  Var alpha = sparsemax(transpose(reshape(scores, {rows, fields, k})));           // [rows x K x fields]
  Var exponents = mul(alpha, reshape(sigmoid(gate_logits), {k, 1}));
  Var log_emb = log(add_scalar(relu(embeddings), epsilon));                       // [rows x fields x dim]
  return {exp(bmm(exponents, log_emb)), alpha};
}

ArmNet::ArmNet(ArmNetConfig config, FeatureSchema schema, Rng& rng)
    : Model(std::move(schema)), config_(std::move(config)) {
  config_.validate();
  if (schema_.fields.empty()) throw ShapeError("armnet: schema has no fields");
  const std::size_t d = config_.embed_dim, k = config_.n_interactions;

  layout_.embed = params_.size();
  for (const auto& f : schema_.fields) {
    init_scaled_uniform(add_param("embed." + f.name, "embedding", {f.width, d}), f.width, d, rng);
  }
  layout_.heads = params_.size();
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    const std::string prefix = "head" + std::to_string(h);
    init_scaled_uniform(add_param(prefix + ".key", "attention", {d, d}), d, d, rng);
    init_scaled_uniform(add_param(prefix + ".query", "attention", {k, d}), d, k, rng);
    add_param(prefix + ".gate", "attention", {k});
  }
  layout_.dense = params_.size();
  std::size_t in = config_.n_heads * k * d + schema_.fields.size() * d;
  for (std::size_t l = 0; l <= config_.num_layers; ++l) {
    const bool last = l == config_.num_layers;
    const std::size_t out = last ? config_.output_dim : config_.hidden_dim;
    const std::string prefix = last ? std::string("out") : "dense" + std::to_string(l);
    const std::string group = last ? std::string("dense_out") : "dense_" + std::to_string(l);
    init_scaled_uniform(add_param(prefix + ".weight", group, {in, out}), in, out, rng);
    add_param(prefix + ".bias", group, {out});
    in = out;
  }
}

std::size_t ArmNet::expected_parameter_count(const ArmNetConfig& c, const FeatureSchema& schema) {
  const std::size_t d = c.embed_dim, k = c.n_interactions, m = schema.fields.size();
  const std::size_t head_in = c.n_heads * k * d + m * d;
  return schema.encoded_width * d + c.n_heads * (d * d + k * d + k) + (head_in * c.hidden_dim + c.hidden_dim) +
         (c.num_layers - 1) * (c.hidden_dim * c.hidden_dim + c.hidden_dim) + c.hidden_dim * c.output_dim +
         c.output_dim;
}

Var ArmNet::embed(std::span<const Var> bound, const Var& batch) const {
  auto fields = field_embed(batch, bound.subspan(layout_.embed, schema_.fields.size()), schema_);
  return concat(fields);  // [rows x fields*dim]
}

Var ArmNet::forward(std::span<const Var> bound, const Var& batch, Mode mode, Rng& rng) const {
  if (bound.size() != params_.size()) throw ShapeError("armnet: wrong number of bound parameters");
  const std::size_t rows = batch.shape()[0], m = schema_.fields.size(), d = config_.embed_dim;
  Var flat = embed(bound, batch);
  Var emb = reshape(flat, {rows, m, d});

  std::vector<Var> head_input;
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    const std::size_t p = layout_.heads + 3 * h;
    auto out = exp_interaction(emb, bound[p], bound[p + 1], bound[p + 2], config_.epsilon);
    head_input.push_back(reshape(out.interactions, {rows, config_.n_interactions * d}));
  }
  head_input.push_back(flat);
  Var x = concat(head_input);

  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::size_t p = layout_.dense + 2 * l;
    x = dropout(relu(add(matmul(x, bound[p]), bound[p + 1])), config_.dropout_rate, mode, rng);
  }
  const std::size_t p = layout_.dense + 2 * config_.num_layers;
  return add(matmul(x, bound[p]), bound[p + 1]);
}

std::vector<Tensor> ArmNet::attention(const Dataset& data) const {
  std::vector<Var> bound;
  for (const auto& p : params_) bound.emplace_back(p.value);
  const std::size_t rows = data.rows(), m = schema_.fields.size(), d = config_.embed_dim;
  Var emb = reshape(embed(bound, Var(Tensor({rows, data.width}, data.features))), {rows, m, d});
  std::vector<Tensor> out;
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    const std::size_t p = layout_.heads + 3 * h;
    out.push_back(exp_interaction(emb, bound[p], bound[p + 1], bound[p + 2], config_.epsilon).attention.value());
  }
  return out;
}

}  // namespace severitas
