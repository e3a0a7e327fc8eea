#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "severitas/model.hpp"

namespace severitas {

// ---------------------------------------------------------------------------
// AdamW

struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;  // first moments, one per parameter
  std::vector<Tensor> v;  // second moments
};

/// One bias-corrected Adam update with decoupled weight decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// An empty gradient tensor counts as all zeros.
void adamw_step(std::span<Tensor> params, std::span<const Tensor> grads, OptimizerState& state, double lr,
                double weight_decay);

// ---------------------------------------------------------------------------
// Reduce-on-plateau

struct PlateauScheduler {
  double factor = 0.5;
  std::size_t patience = 5;
  double min_lr = 1e-6;
  double threshold = 1e-8;  // improvement must beat best - threshold

  double lr = 1e-3;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  /// Feeds one validation loss and returns the (possibly reduced) rate.
  double step(double val_loss);
};

// ---------------------------------------------------------------------------
// Early stopping

struct EarlyStopState {
  std::size_t patience = 10;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t bad_epochs = 0;
  std::vector<Tensor> snapshot;  // parameters at best_epoch

  /// Records epoch `epoch` (1-based). Returns true once `patience`
  /// consecutive epochs fail to improve on the best loss.
  bool update(std::size_t epoch, double val_loss, const std::vector<NamedParam>& params);
};

// ---------------------------------------------------------------------------
// Training

struct HyperParams {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t early_stop_patience = 10;
  PlateauScheduler scheduler{};  // lr field is overwritten by `lr`
  nlohmann::json model_config = nlohmann::json::object();

  void validate() const;
  static HyperParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate used during the epoch
};

using LossCurve = std::vector<EpochRecord>;

/// CSV `epoch,train_loss,val_loss,lr`.
std::string loss_curve_csv(const LossCurve& curve);

struct TrainResult {
  std::unique_ptr<Model> model;  // restored to the best validation epoch
  LossCurve curve;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
  bool diverged = false;
  std::size_t optimizer_steps = 0;
};

/// Mean cross-entropy of the model over a dataset (eval mode).
double mean_log_loss(const Model& model, const Dataset& data);

/// Trains with shuffled mini-batches, AdamW, reduce-on-plateau on the
/// validation log loss and early stopping. The seed fixes initialisation,
/// batch order and dropout masks.
TrainResult train_model(ModelKind kind, const Dataset& train, const Dataset& val, const FeatureSchema& schema,
                        const HyperParams& hp, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Random search

struct TrialParams {
  std::size_t hidden_dim = 128;
  std::size_t num_layers = 4;
  double dropout_rate = 0.3;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;

  nlohmann::json to_json() const;
  friend bool operator==(const TrialParams&, const TrialParams&) = default;
};

struct SearchSpace {
  std::vector<std::size_t> hidden_dim{64, 128, 256};
  std::vector<std::size_t> num_layers{2, 3, 4};
  std::vector<double> dropout_rate{0.1, 0.3, 0.5};
  double lr_min = 1e-4;  // log-uniform
  double lr_max = 1e-2;
  std::vector<double> weight_decay{1e-5, 1e-4, 1e-3};
  std::vector<std::size_t> batch_size{32, 64};
  std::vector<std::size_t> epochs{50};

  void validate() const;
  bool contains(const TrialParams& p) const;
  TrialParams sample(Rng& rng) const;
  static SearchSpace from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Hyperparameters for one trial. ArmNet takes hidden_dim/num_layers as is;
/// MambaNet builds `num_layers` dense widths halving from hidden_dim.
HyperParams trial_hyperparams(ModelKind kind, const HyperParams& base, const TrialParams& trial);

struct TrialResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  TrialParams params;
  double val_accuracy = 0.0;
  double val_loss = 0.0;
  std::size_t epochs_ran = 0;
  std::size_t best_epoch = 0;

  nlohmann::json to_json() const;
};

/// Trial i samples from a stream derived from (seed, i) and trains with
/// seed f(seed, i), so results do not depend on execution order. `threads`
/// workers run trials concurrently. Returned best first: validation
/// accuracy descending, then validation loss, then trial index.
std::vector<TrialResult> random_search(ModelKind kind, const Dataset& train, const Dataset& val,
                                       const FeatureSchema& schema, const HyperParams& base, const SearchSpace& space,
                                       std::size_t n_trials, std::uint64_t seed, std::size_t threads = 1);

}  // namespace severitas
