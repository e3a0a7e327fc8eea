#pragma once

#include "severitas/model.hpp"

namespace severitas {

enum class Readout { final_state, mean };

struct MambaNetConfig {
  std::size_t embed_channels = 16;
  std::size_t conv_out_channels = 32;
  std::size_t conv_kernel = 3;  // odd; padding = kernel / 2
  std::size_t conv_layers = 1;
  std::size_t lstm_hidden = 64;
  std::vector<std::size_t> hidden_dims{128, 64};
  double dropout_rate = 0.3;
  std::size_t output_dim = kNumClasses;
  Readout readout = Readout::final_state;

  void validate() const;
  static MambaNetConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Fields as a sequence (schema declaration order) -> conv1d + ReLU ->
/// LSTM scan -> dense head.
class MambaNet final : public Model {
 public:
  MambaNet(MambaNetConfig config, FeatureSchema schema, Rng& rng);

  ModelKind kind() const override { return ModelKind::mambanet; }
  nlohmann::json config_json() const override { return config_.to_json(); }
  std::unique_ptr<Model> clone() const override { return std::make_unique<MambaNet>(*this); }
  Var forward(std::span<const Var> bound, const Var& batch, Mode mode, Rng& rng) const override;

  const MambaNetConfig& config() const { return config_; }

  /// [rows x fields x embed_channels]
  Var sequence_embed(std::span<const Var> bound, const Var& batch) const;
  /// Conv stack output before the LSTM, [rows x conv_out_channels x fields].
  Var conv_features(std::span<const Var> bound, const Var& batch) const;

  static std::size_t expected_parameter_count(const MambaNetConfig& config, const FeatureSchema& schema);

 private:
  MambaNetConfig config_;
  std::size_t conv_begin_ = 0;
  std::size_t lstm_begin_ = 0;
  std::size_t dense_begin_ = 0;
};

}  // namespace severitas
