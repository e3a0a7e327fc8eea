#pragma once

#include "severitas/model.hpp"

namespace severitas {

struct ArmNetConfig {
  std::size_t embed_dim = 8;
  std::size_t n_heads = 4;
  std::size_t n_interactions = 8;  // per head
  std::size_t hidden_dim = 128;
  std::size_t num_layers = 4;
  double dropout_rate = 0.3;
  std::size_t output_dim = kNumClasses;
  double epsilon = 1e-6;

  void validate() const;
  static ArmNetConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct InteractionOutput {
  Var interactions;  // [rows x K x embed_dim], strictly positive
  Var attention;     // [rows x K x fields], sparsemax weights before gating
};

/// Exponential interaction layer for one head.
///
/// embeddings: [rows x fields x dim]; key: [dim x dim]; query: [K x dim];
/// gate_logits: [K]. For every interaction k the field scores
/// <query_k, key(e_f)> pass through sparsemax; the gated weights act as
/// exponents on relu(e_f) + epsilon, i.e. exp(sum_f w_f * ln(relu(e_f) + eps)).
InteractionOutput exp_interaction(const Var& embeddings, const Var& key, const Var& query, const Var& gate_logits,
                                  double epsilon);

/// Field embeddings -> sparse gated exponential interactions -> MLP head.
class ArmNet final : public Model {
 public:
  ArmNet(ArmNetConfig config, FeatureSchema schema, Rng& rng);

  ModelKind kind() const override { return ModelKind::armnet; }
  nlohmann::json config_json() const override { return config_.to_json(); }
  std::unique_ptr<Model> clone() const override { return std::make_unique<ArmNet>(*this); }
  Var forward(std::span<const Var> bound, const Var& batch, Mode mode, Rng& rng) const override;

  const ArmNetConfig& config() const { return config_; }

  /// Sparsemax weights of every head for a batch (eval mode).
  std::vector<Tensor> attention(const Dataset& data) const;

  /// Closed-form parameter count for a config and schema.
  static std::size_t expected_parameter_count(const ArmNetConfig& config, const FeatureSchema& schema);

 private:
  struct Layout {
    std::size_t embed = 0;      // first embedding table
    std::size_t heads = 0;      // key, query, gate per head
    std::size_t dense = 0;      // weight, bias per layer incl. output
  };

  Var embed(std::span<const Var> bound, const Var& batch) const;

  ArmNetConfig config_;
  Layout layout_;
};

}  // namespace severitas
