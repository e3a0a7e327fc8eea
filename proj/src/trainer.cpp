#include "severitas/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "severitas/errors.hpp"
#include "severitas/io.hpp"

namespace severitas {

using nlohmann::json;

void adamw_step(std::span<Tensor> params, std::span<const Tensor> grads, OptimizerState& state, double lr,
                double weight_decay) {
  if (params.size() != grads.size()) throw ShapeError("adamw_step: parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.shape());
      state.v.emplace_back(p.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adamw_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].shape() != params[i].shape()) throw ShapeError("adamw_step: moment shape mismatch");
    if (grads[i].size() != 0 && grads[i].shape() != params[i].shape()) {
      throw ShapeError("adamw_step: gradient " + shape_str(grads[i].shape()) + " for parameter " +
                       shape_str(params[i].shape()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].values();
    auto& m = state.m[i].values();
    auto& v = state.v[i].values();
    const bool has_grad = grads[i].size() != 0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double g = has_grad ? grads[i].data()[j] : 0.0;
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      theta[j] -= lr * (m_hat / (std::sqrt(v_hat) + state.epsilon)) + lr * weight_decay * theta[j];
    }
  }
}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best - threshold) {
    best = val_loss;
    bad_epochs = 0;
  } else {
    ++bad_epochs;
  }
  if (bad_epochs > patience) {
    lr = std::max(lr * factor, min_lr);
    bad_epochs = 0;
  }
  return lr;
}

bool EarlyStopState::update(std::size_t epoch, double val_loss, const std::vector<NamedParam>& params) {
  if (val_loss < best) {
    best = val_loss;
    best_epoch = epoch;
    bad_epochs = 0;
    snapshot.clear();
    for (const auto& p : params) snapshot.push_back(p.value);
    return false;
  }
  ++bad_epochs;
  return bad_epochs >= patience;
}

// ---------------------------------------------------------------------------

void HyperParams::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  if (!(scheduler.factor > 0.0 && scheduler.factor < 1.0)) throw ConfigError("scheduler factor must be in (0, 1)");
  if (!(scheduler.min_lr > 0.0)) throw ConfigError("scheduler min_lr must be positive");
  if (scheduler.min_lr > lr) throw ConfigError("scheduler min_lr exceeds lr");
}

HyperParams HyperParams::from_json(const json& j) {
  HyperParams h;
  try {
    h.lr = j.value("lr", h.lr);
    h.weight_decay = j.value("weight_decay", h.weight_decay);
    h.epochs = j.value("epochs", h.epochs);
    h.batch_size = j.value("batch_size", h.batch_size);
    h.early_stop_patience = j.value("early_stop_patience", h.early_stop_patience);
    if (j.contains("scheduler")) {
      const json& s = j.at("scheduler");
      h.scheduler.factor = s.value("factor", h.scheduler.factor);
      h.scheduler.patience = s.value("patience", h.scheduler.patience);
      h.scheduler.min_lr = s.value("min_lr", h.scheduler.min_lr);
    }
    if (j.contains("model")) h.model_config = j.at("model");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("hyperparameters: ") + e.what());
  }
  h.validate();
  return h;
}

json HyperParams::to_json() const {
  return json{{"lr", lr},
              {"weight_decay", weight_decay},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"early_stop_patience", early_stop_patience},
              {"scheduler", {{"factor", scheduler.factor}, {"patience", scheduler.patience}, {"min_lr", scheduler.min_lr}}},
              {"model", model_config}};
}

std::string loss_curve_csv(const LossCurve& curve) {
  std::string out = "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : curve) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.val_loss) + "," +
           format_double(r.lr) + "\n";
  }
  return out;
}

double mean_log_loss(const Model& model, const Dataset& data) {
  const Tensor logits = model.predict_logits(data);
  return cross_entropy(Var(logits), data.labels).value().data()[0];
}

namespace {

Var batch_var(const Dataset& data, std::span<const std::size_t> order, std::size_t start, std::size_t n,
              std::vector<int>& labels) {
  std::vector<double> rows;
  rows.reserve(n * data.width);
  labels.clear();
  for (std::size_t i = start; i < start + n; ++i) {
    auto r = data.row(order[i]);
    rows.insert(rows.end(), r.begin(), r.end());
    labels.push_back(data.labels[order[i]]);
  }
  return Var(Tensor({n, data.width}, std::move(rows)));
}

}  // namespace

TrainResult train_model(ModelKind kind, const Dataset& train, const Dataset& val, const FeatureSchema& schema,
                        const HyperParams& hp, std::uint64_t seed) {
  hp.validate();
  if (train.rows() == 0) throw ArgumentError("train_model: empty training split");
  if (val.rows() == 0) throw ArgumentError("train_model: empty validation split");
  if (train.width != schema.encoded_width || val.width != schema.encoded_width) {
    throw ShapeError("train_model: dataset width does not match the schema");
  }

  Rng init_rng = Rng::derive(seed, "init");
  Rng order_rng = Rng::derive(seed, "shuffle");
  Rng dropout_rng = Rng::derive(seed, "dropout");

  TrainResult result;
  result.model = make_model(kind, hp.model_config, schema, init_rng);
  Model& model = *result.model;

  OptimizerState opt;
  PlateauScheduler sched = hp.scheduler;
  sched.lr = hp.lr;
  sched.best = std::numeric_limits<double>::infinity();
  sched.bad_epochs = 0;
  EarlyStopState stop;
  stop.patience = hp.early_stop_patience;

  std::vector<std::size_t> order(train.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> labels;

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const double lr = sched.lr;
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t n = std::min(hp.batch_size, order.size() - start);
      Tape tape;
      std::vector<Var> bound;
      bound.reserve(model.params().size());
      for (const auto& p : model.params()) bound.push_back(tape.leaf(p.value));
      Var x = batch_var(train, order, start, n, labels);
      Var loss = cross_entropy(model.forward(bound, x, Mode::train, dropout_rng), labels);
      tape.backward(loss);
      loss_sum += loss.value().data()[0] * static_cast<double>(n);

      std::vector<Tensor> values;
      std::vector<Tensor> grads;
      values.reserve(bound.size());
      grads.reserve(bound.size());
      for (std::size_t i = 0; i < bound.size(); ++i) {
        values.push_back(std::move(model.params()[i].value));
        grads.push_back(bound[i].grad());
      }
      adamw_step(values, grads, opt, lr, hp.weight_decay);
      for (std::size_t i = 0; i < bound.size(); ++i) model.params()[i].value = std::move(values[i]);
      ++result.optimizer_steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.rows());
    rec.val_loss = mean_log_loss(model, val);
    rec.lr = lr;
    result.curve.push_back(rec);

    if (!std::isfinite(rec.val_loss) || !std::isfinite(rec.train_loss)) {
      result.diverged = true;
      break;
    }
    if (stop.update(epoch, rec.val_loss, model.params())) {
      result.stopped_early = true;
      break;
    }
    sched.step(rec.val_loss);
  }

  if (!stop.snapshot.empty()) {
    for (std::size_t i = 0; i < stop.snapshot.size(); ++i) model.params()[i].value = stop.snapshot[i];
  }
  result.best_epoch = stop.best_epoch;
  result.best_val_loss = stop.best;
  return result;
}

// ---------------------------------------------------------------------------
// Random search

json TrialParams::to_json() const {
  return json{{"hidden_dim", hidden_dim}, {"num_layers", num_layers}, {"dropout_rate", dropout_rate},
              {"lr", lr},                 {"weight_decay", weight_decay}, {"batch_size", batch_size},
              {"epochs", epochs}};
}

void SearchSpace::validate() const {
  if (hidden_dim.empty() || num_layers.empty() || dropout_rate.empty() || weight_decay.empty() ||
      batch_size.empty() || epochs.empty()) {
    throw ConfigError("search space: every dimension needs at least one value");
  }
  if (!(lr_min > 0.0) || lr_max < lr_min) throw ConfigError("search space: need 0 < lr_min <= lr_max");
  for (auto h : hidden_dim) {
    if (h < 1) throw ConfigError("search space: hidden_dim must be >= 1");
  }
  for (auto l : num_layers) {
    if (l < 1) throw ConfigError("search space: num_layers must be >= 1");
  }
  for (auto d : dropout_rate) {
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("search space: dropout_rate must be in [0, 1)");
  }
  for (auto w : weight_decay) {
    if (!(w >= 0.0)) throw ConfigError("search space: weight_decay must be >= 0");
  }
  for (auto b : batch_size) {
    if (b < 1) throw ConfigError("search space: batch_size must be >= 1");
  }
  for (auto e : epochs) {
    if (e < 1) throw ConfigError("search space: epochs must be >= 1");
  }
}

namespace {

template <typename T>
bool member(const std::vector<T>& v, const T& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

template <typename T>
T pick(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

}  // namespace

bool SearchSpace::contains(const TrialParams& p) const {
  return member(hidden_dim, p.hidden_dim) && member(num_layers, p.num_layers) && member(dropout_rate, p.dropout_rate) &&
         member(weight_decay, p.weight_decay) && member(batch_size, p.batch_size) && member(epochs, p.epochs) &&
         p.lr >= lr_min && p.lr <= lr_max;
}

TrialParams SearchSpace::sample(Rng& rng) const {
  TrialParams p;
  p.hidden_dim = pick(hidden_dim, rng);
  p.num_layers = pick(num_layers, rng);
  p.dropout_rate = pick(dropout_rate, rng);
  if (lr_min == lr_max) {
    p.lr = lr_min;
  } else {
    p.lr = std::exp(rng.uniform(std::log(lr_min), std::log(lr_max)));
    p.lr = std::clamp(p.lr, lr_min, lr_max);
  }
  p.weight_decay = pick(weight_decay, rng);
  p.batch_size = pick(batch_size, rng);
  p.epochs = pick(epochs, rng);
  return p;
}

SearchSpace SearchSpace::from_json(const json& j) {
  SearchSpace s;
  try {
    s.hidden_dim = j.value("hidden_dim", s.hidden_dim);
    s.num_layers = j.value("num_layers", s.num_layers);
    s.dropout_rate = j.value("dropout_rate", s.dropout_rate);
    s.lr_min = j.value("lr_min", s.lr_min);
    s.lr_max = j.value("lr_max", s.lr_max);
    s.weight_decay = j.value("weight_decay", s.weight_decay);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.epochs = j.value("epochs", s.epochs);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  }
  s.validate();
  return s;
}

json SearchSpace::to_json() const {
  return json{{"hidden_dim", hidden_dim}, {"num_layers", num_layers},     {"dropout_rate", dropout_rate},
              {"lr_min", lr_min},         {"lr_max", lr_max},             {"weight_decay", weight_decay},
              {"batch_size", batch_size}, {"epochs", epochs}};
}

HyperParams trial_hyperparams(ModelKind kind, const HyperParams& base, const TrialParams& trial) {
  HyperParams hp = base;
  hp.lr = trial.lr;
  hp.weight_decay = trial.weight_decay;
  hp.batch_size = trial.batch_size;
  hp.epochs = trial.epochs;
  hp.scheduler.min_lr = std::min(hp.scheduler.min_lr, trial.lr);
  json model = base.model_config.is_object() ? base.model_config : json::object();
  model["dropout_rate"] = trial.dropout_rate;
  if (kind == ModelKind::armnet) {
    model["hidden_dim"] = trial.hidden_dim;
    model["num_layers"] = trial.num_layers;
  } else {
    std::vector<std::size_t> dims;
    std::size_t h = trial.hidden_dim;
    for (std::size_t l = 0; l < trial.num_layers; ++l) {
      dims.push_back(std::max<std::size_t>(h, 1));
      h /= 2;
    }
    model["hidden_dims"] = dims;
  }
  hp.model_config = std::move(model);
  return hp;
}

json TrialResult::to_json() const {
  return json{{"trial", index},
              {"seed", seed},
              {"params", params.to_json()},
              {"val_accuracy", val_accuracy},
              {"val_loss", val_loss},
              {"epochs_ran", epochs_ran},
              {"best_epoch", best_epoch}};
}

std::vector<TrialResult> random_search(ModelKind kind, const Dataset& train, const Dataset& val,
                                       const FeatureSchema& schema, const HyperParams& base, const SearchSpace& space,
                                       std::size_t n_trials, std::uint64_t seed, std::size_t threads) {
  space.validate();
  if (n_trials == 0) throw ArgumentError("random_search: n_trials must be >= 1");
  std::vector<TrialResult> results(n_trials);

  auto run_trial = [&](std::size_t i) {
    Rng sampler = Rng::derive(seed, "search", i);
    TrialResult r;
    r.index = i;
    r.seed = Rng::derive_seed(seed, "trial", i);
    r.params = space.sample(sampler);
    const HyperParams hp = trial_hyperparams(kind, base, r.params);
    TrainResult trained = train_model(kind, train, val, schema, hp, r.seed);
    const Tensor logits = trained.model->predict_logits(val);
    const std::vector<int> pred = predict_classes(logits);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) correct += pred[k] == val.labels[k];
    r.val_accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
    r.val_loss = cross_entropy(Var(logits), val.labels).value().data()[0];
    r.epochs_ran = trained.curve.size();
    r.best_epoch = trained.best_epoch;
    results[i] = std::move(r);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n_trials));
  if (workers == 1) {
    for (std::size_t i = 0; i < n_trials; ++i) run_trial(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n_trials; i = next++) {
          try {
            run_trial(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::stable_sort(results.begin(), results.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.val_accuracy != b.val_accuracy) return a.val_accuracy > b.val_accuracy;
    if (a.val_loss != b.val_loss) return a.val_loss < b.val_loss;
    return a.index < b.index;
  });
  return results;
}

}  // namespace severitas
