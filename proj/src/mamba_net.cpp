#include "severitas/mamba_net.hpp"

#include "severitas/errors.hpp"

namespace severitas {

using nlohmann::json;

void MambaNetConfig::validate() const {
  if (embed_channels < 1 || conv_out_channels < 1 || conv_kernel < 1 || conv_layers < 1 || lstm_hidden < 1) {
    throw ConfigError("mambanet: every size must be >= 1");
  }
  if (conv_kernel % 2 == 0) throw ConfigError("mambanet: conv_kernel must be odd");
  if (hidden_dims.empty()) throw ConfigError("mambanet: hidden_dims must not be empty");
  for (std::size_t h : hidden_dims) {
    if (h < 1) throw ConfigError("mambanet: hidden_dims entries must be >= 1");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("mambanet: dropout_rate must lie in [0, 1)");
  if (output_dim != kNumClasses) throw ConfigError("mambanet: output_dim must equal the number of severity classes");
}

MambaNetConfig MambaNetConfig::from_json(const json& j) {
  MambaNetConfig c;
  try {
    c.embed_channels = j.value("embed_channels", c.embed_channels);
    c.conv_out_channels = j.value("conv_out_channels", c.conv_out_channels);
    c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
    c.conv_layers = j.value("conv_layers", c.conv_layers);
    c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
    c.hidden_dims = j.value("hidden_dims", c.hidden_dims);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.output_dim = j.value("output_dim", c.output_dim);
    const std::string readout = j.value("readout", std::string("final"));
    if (readout == "final") {
      c.readout = Readout::final_state;
    } else if (readout == "mean") {
      c.readout = Readout::mean;
    } else {
      throw ConfigError("mambanet: unknown readout '" + readout + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mambanet config: ") + e.what());
  }
  c.validate();
  return c;
}

json MambaNetConfig::to_json() const {
  return json{{"embed_channels", embed_channels}, {"conv_out_channels", conv_out_channels},
              {"conv_kernel", conv_kernel},       {"conv_layers", conv_layers},
              {"lstm_hidden", lstm_hidden},       {"hidden_dims", hidden_dims},
              {"dropout_rate", dropout_rate},     {"output_dim", output_dim},
              {"readout", readout == Readout::final_state ? "final" : "mean"}};
}

MambaNet::MambaNet(MambaNetConfig config, FeatureSchema schema, Rng& rng)
    : Model(std::move(schema)), config_(std::move(config)) {
  config_.validate();
  if (schema_.fields.empty()) throw ShapeError("mambanet: schema has no fields");
  const std::size_t c = config_.embed_channels, co = config_.conv_out_channels, k = config_.conv_kernel;
  const std::size_t h = config_.lstm_hidden;

  for (const auto& f : schema_.fields) {
    init_scaled_uniform(add_param("embed." + f.name, "embedding", {f.width, c}), f.width, c, rng);
  }
  conv_begin_ = params_.size();
  std::size_t in = c;
  for (std::size_t l = 0; l < config_.conv_layers; ++l) {
    const std::string prefix = "conv" + std::to_string(l);
    init_scaled_uniform(add_param(prefix + ".weight", "conv", {co, in, k}), in * k, co * k, rng);
    add_param(prefix + ".bias", "conv", {co, 1});
    in = co;
  }
  lstm_begin_ = params_.size();
  init_scaled_uniform(add_param("lstm.w_input", "lstm", {co, 4 * h}), co, 4 * h, rng);
  init_scaled_uniform(add_param("lstm.w_recurrent", "lstm", {h, 4 * h}), h, 4 * h, rng);
  Tensor& bias = add_param("lstm.bias", "lstm", {4 * h});
  for (std::size_t i = h; i < 2 * h; ++i) bias[i] = 1.0;  // forget gate

  dense_begin_ = params_.size();
  in = h;
  for (std::size_t l = 0; l <= config_.hidden_dims.size(); ++l) {
    const bool last = l == config_.hidden_dims.size();
    const std::size_t out = last ? config_.output_dim : config_.hidden_dims[l];
    const std::string prefix = last ? std::string("out") : "dense" + std::to_string(l);
    const std::string group = last ? std::string("dense_out") : "dense_" + std::to_string(l);
    init_scaled_uniform(add_param(prefix + ".weight", group, {in, out}), in, out, rng);
    add_param(prefix + ".bias", group, {out});
    in = out;
  }
}

std::size_t MambaNet::expected_parameter_count(const MambaNetConfig& cfg, const FeatureSchema& schema) {
  const std::size_t c = cfg.embed_channels, co = cfg.conv_out_channels, k = cfg.conv_kernel, h = cfg.lstm_hidden;
  std::size_t n = schema.encoded_width * c;
  n += co * c * k + co;
  n += (cfg.conv_layers - 1) * (co * co * k + co);
  n += co * 4 * h + h * 4 * h + 4 * h;
  std::size_t in = h;
  for (std::size_t d : cfg.hidden_dims) {
    n += in * d + d;
    in = d;
  }
  return n + in * cfg.output_dim + cfg.output_dim;
}

Var MambaNet::sequence_embed(std::span<const Var> bound, const Var& batch) const {
  const std::size_t rows = batch.shape()[0], m = schema_.fields.size();
  auto steps = field_embed(batch, bound.subspan(0, m), schema_);
  return reshape(concat(steps), {rows, m, config_.embed_channels});
}

Var MambaNet::conv_features(std::span<const Var> bound, const Var& batch) const {
  Var x = transpose(sequence_embed(bound, batch));  // [rows x channels x fields]
  const std::size_t padding = config_.conv_kernel / 2;
  for (std::size_t l = 0; l < config_.conv_layers; ++l) {
    const std::size_t p = conv_begin_ + 2 * l;
    x = relu(add(conv1d(x, bound[p], padding), bound[p + 1]));
  }
  return x;
}

Var MambaNet::forward(std::span<const Var> bound, const Var& batch, Mode mode, Rng& rng) const {
  if (bound.size() != params_.size()) throw ShapeError("mambanet: wrong number of bound parameters");
  const std::size_t rows = batch.shape()[0], m = schema_.fields.size();
  const std::size_t co = config_.conv_out_channels, h = config_.lstm_hidden;

  Var steps = reshape(transpose(conv_features(bound, batch)), {rows, m * co});
  const LstmParams lstm{bound[lstm_begin_], bound[lstm_begin_ + 1], bound[lstm_begin_ + 2]};
  LstmState state{Var(Tensor({rows, h})), Var(Tensor({rows, h}))};
  Var pooled;
  for (std::size_t t = 0; t < m; ++t) {
    state = lstm_cell(slice_last(steps, t * co, co), state, lstm);
    if (config_.readout == Readout::mean) pooled = t == 0 ? state.h : add(pooled, state.h);
  }
  Var x = config_.readout == Readout::mean ? scale(pooled, 1.0 / static_cast<double>(m)) : state.h;

  for (std::size_t l = 0; l < config_.hidden_dims.size(); ++l) {
    const std::size_t p = dense_begin_ + 2 * l;
    x = dropout(relu(add(matmul(x, bound[p]), bound[p + 1])), config_.dropout_rate, mode, rng);
  }
  const std::size_t p = dense_begin_ + 2 * config_.hidden_dims.size();
  return add(matmul(x, bound[p]), bound[p + 1]);
}

}  // namespace severitas
