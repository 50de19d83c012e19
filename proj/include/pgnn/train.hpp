#pragma once
// Losses, optimizers, and the training loop with its per-epoch measurement
// hooks: train/validation loss, global gradient norm, per-layer residual
// norms, and per-neuron activation variance.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/linalg.hpp"
#include "pgnn/net.hpp"
#include "pgnn/rng.hpp"
#include "pgnn/tasks.hpp"

namespace pgnn::train {

using linalg::Vector;

// ============================================================================
// Losses
// ============================================================================

struct LossResult {
  double loss;
  Vector d_pred;
};

inline LossResult mse_loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size())
    throw ShapeError("mse_loss: pred dim " + std::to_string(pred.size()) +
                     " != target dim " + std::to_string(target.size()));
  const double n = static_cast<double>(pred.size());
  double loss = 0.0;
  Vector d(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    loss += e * e;
    d[i] = 2.0 * e / n;
  }
  return {loss / n, std::move(d)};
}

inline LossResult cross_entropy_loss(const Vector& logits, std::size_t cls) {
  if (cls >= logits.size())
    throw ValidationError("cross_entropy_loss: class " + std::to_string(cls) +
                          " out of range for " + std::to_string(logits.size()) +
                          " logits");
  double mx = logits[0];
  for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
  double z = 0.0;
  Vector soft(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    soft[i] = std::exp(logits[i] - mx);
    z += soft[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) soft[i] /= z;
  const double loss = -(logits[cls] - mx - std::log(z));
  Vector d = soft;
  d[cls] -= 1.0;
  return {loss, std::move(d)};
}

enum class LossKind { mse, cross_entropy };

inline const char* loss_name(LossKind k) {
  return k == LossKind::mse ? "mse" : "cross_entropy";
}

inline LossKind loss_from_name(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "cross_entropy") return LossKind::cross_entropy;
  throw ValidationError("unknown loss: " + s);
}

// ============================================================================
// Optimizers
// ============================================================================

struct SgdConfig {
  double momentum = 0.0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

// Slot-per-parameter moment buffers, aligned with the registry order.
struct OptimizerState {
  std::vector<std::vector<double>> m;  // momentum / first moment
  std::vector<std::vector<double>> v;  // second moment (adam only)
  std::uint64_t t = 0;                 // completed steps
};

inline OptimizerState init_optimizer_state(const std::vector<net::ParamView>& params,
                                           const OptimizerConfig& cfg) {
  OptimizerState st;
  for (const auto& p : params) st.m.emplace_back(p.size, 0.0);
  if (std::holds_alternative<AdamConfig>(cfg))
    for (const auto& p : params) st.v.emplace_back(p.size, 0.0);
  return st;
}

namespace detail {

inline void check_aligned(const std::vector<net::ParamView>& params,
                          const std::vector<net::ParamView>& grads,
                          const OptimizerState& st, bool adam) {
  if (params.size() != grads.size())
    throw ValidationError("optimizer_step: registry size mismatch");
  if (st.m.size() != params.size() || (adam && st.v.size() != params.size()))
    throw ValidationError("optimizer_step: state does not match registry");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != grads[i].name || params[i].size != grads[i].size)
      throw ValidationError("optimizer_step: registry misaligned at '" +
                            params[i].name + "' vs '" + grads[i].name + "'");
    if (st.m[i].size() != params[i].size)
      throw ValidationError("optimizer_step: state slot size mismatch at '" +
                            params[i].name + "'");
  }
}

}  // namespace detail

inline void optimizer_step(const std::vector<net::ParamView>& params,
                           const std::vector<net::ParamView>& grads,
                           OptimizerState& st, const OptimizerConfig& cfg, double lr) {
  const bool adam = std::holds_alternative<AdamConfig>(cfg);
  detail::check_aligned(params, grads, st, adam);
  st.t += 1;
  if (adam) {
    const AdamConfig& a = std::get<AdamConfig>(cfg);
    const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t k = 0; k < params[i].size; ++k) {
        const double g = grads[i].data[k];
        double& m = st.m[i][k];
        double& v = st.v[i][k];
        m = a.beta1 * m + (1.0 - a.beta1) * g;
        v = a.beta2 * v + (1.0 - a.beta2) * g * g;
        params[i].data[k] -= lr * (m / c1) / (std::sqrt(v / c2) + a.eps);
      }
  } else {
    const SgdConfig& s = std::get<SgdConfig>(cfg);
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t k = 0; k < params[i].size; ++k) {
        double& m = st.m[i][k];
        m = s.momentum * m + grads[i].data[k];
        params[i].data[k] -= lr * m;
      }
  }
}

// ============================================================================
// Training configuration and log
// ============================================================================

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;  // 0 is allowed: a no-op loop used in tests
  OptimizerConfig optimizer = AdamConfig{};
  std::uint64_t seed = 0;
  LossKind loss = LossKind::mse;
  std::size_t log_every = 1;

  void validate() const {
    if (epochs < 1) throw ValidationError("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("TrainConfig: batch_size must be >= 1");
    if (learning_rate < 0.0)
      throw ValidationError("TrainConfig: learning_rate must be >= 0");
    if (log_every < 1) throw ValidationError("TrainConfig: log_every must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the pre-training snapshot
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;           // classification only
  double grad_norm = 0.0;                       // over the last batch of the epoch
  std::vector<double> residual_norms;           // per layer; 0 without correction
  std::vector<std::vector<double>> activation_variance;  // per layer, per neuron
};

struct TrainLog {
  std::vector<EpochRecord> records;
};

// Resumable loop state; everything needed to continue training exactly.
struct TrainState {
  OptimizerState opt;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t shuffle_counter = 0;
  std::size_t next_epoch = 0;  // 0 = fresh run, pre-training snapshot pending
  bool initialized = false;
};

using GradObserver =
    std::function<void(std::size_t epoch, const std::vector<net::ParamView>&)>;

// ============================================================================
// Epoch statistics
// ============================================================================

namespace detail {

struct EpochStats {
  std::size_t count = 0;
  std::vector<double> residual_sum;
  std::vector<std::vector<double>> out_sum;
  std::vector<std::vector<double>> out_sumsq;

  explicit EpochStats(std::size_t layers)
      : residual_sum(layers, 0.0), out_sum(layers), out_sumsq(layers) {}
};

inline void accumulate_layer_caches(const std::vector<net::LayerCache>& caches,
                                    EpochStats& st, std::size_t offset) {
  for (std::size_t l = 0; l < caches.size(); ++l) {
    const net::LayerCache& c = caches[l];
    const std::size_t slot = offset + l;
    if (c.correction.has_value()) st.residual_sum[slot] += linalg::norm(*c.correction);
    auto& sum = st.out_sum[slot];
    auto& sumsq = st.out_sumsq[slot];
    if (sum.empty()) {
      sum.assign(c.output.size(), 0.0);
      sumsq.assign(c.output.size(), 0.0);
    }
    for (std::size_t i = 0; i < c.output.size(); ++i) {
      sum[i] += c.output[i];
      sumsq[i] += c.output[i] * c.output[i];
    }
  }
}

inline void accumulate_stats(const net::Network::Caches& caches, EpochStats& st) {
  accumulate_layer_caches(caches, st, 0);
  ++st.count;
}

inline void accumulate_stats(const net::TwoBranchNet::Caches& caches, EpochStats& st) {
  accumulate_layer_caches(caches.c0, st, 0);
  accumulate_layer_caches(caches.c1, st, caches.c0.size());
  ++st.count;
}

inline std::size_t model_layer_count(const net::Network& m) { return m.depth(); }
inline std::size_t model_layer_count(const net::TwoBranchNet& m) {
  return m.branch0().depth() + m.branch1().depth();
}

inline void fill_record_stats(const EpochStats& st, EpochRecord& rec) {
  const double n = static_cast<double>(st.count);
  rec.residual_norms.clear();
  rec.activation_variance.clear();
  for (std::size_t l = 0; l < st.residual_sum.size(); ++l) {
    rec.residual_norms.push_back(st.count ? st.residual_sum[l] / n : 0.0);
    std::vector<double> var(st.out_sum[l].size(), 0.0);
    for (std::size_t i = 0; i < var.size(); ++i) {
      const double mean = st.out_sum[l][i] / n;
      var[i] = std::max(0.0, st.out_sumsq[l][i] / n - mean * mean);
    }
    rec.activation_variance.push_back(std::move(var));
  }
}

inline LossResult apply_loss(const Vector& pred, const tasks::Dataset& data,
                             std::size_t idx, LossKind kind) {
  if (kind == LossKind::mse) return mse_loss(pred, data.targets[idx]);
  return cross_entropy_loss(pred, data.labels[idx]);
}

inline double grad_norm_of(const std::vector<net::ParamView>& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (std::size_t k = 0; k < g.size; ++k) sq += g.data[k] * g.data[k];
  return std::sqrt(sq);
}

constexpr std::uint64_t kShuffleDomain = 0x53485546464C4521ULL;

}  // namespace detail

// ============================================================================
// Evaluation
// ============================================================================

template <class ModelT>
double eval_loss(const ModelT& model, const tasks::Dataset& data,
                 const std::vector<std::size_t>& idx, LossKind kind) {
  if (idx.empty()) throw ValidationError("eval_loss: empty index set");
  double total = 0.0;
  for (std::size_t i : idx)
    total += detail::apply_loss(model.forward(data.inputs[i]), data, i, kind).loss;
  return total / static_cast<double>(idx.size());
}

template <class ModelT>
double eval_accuracy(const ModelT& model, const tasks::Dataset& data,
                     const std::vector<std::size_t>& idx) {
  if (!data.classification())
    throw ValidationError("eval_accuracy: dataset has no class labels");
  if (idx.empty()) throw ValidationError("eval_accuracy: empty index set");
  std::size_t hits = 0;
  for (std::size_t i : idx) {
    const Vector logits = model.forward(data.inputs[i]);
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k)
      if (logits[k] > logits[best]) best = k;
    hits += (best == data.labels[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

// ============================================================================
// Training loop
// ============================================================================

// Runs mini-batch descent for cfg.epochs total epochs with deterministic
// shuffling. A fresh run first records a pre-training snapshot as epoch 0; a
// resumed run (state->next_epoch > 0) emits only the remaining epochs, so a
// split run's records concatenate to exactly an uninterrupted run's.
// Non-finite losses or activations abort with the offending epoch.
template <class ModelT>
TrainLog train(ModelT& model, const tasks::Dataset& data, const TrainConfig& cfg,
               TrainState* state = nullptr, const GradObserver& observer = {}) {
  cfg.validate();
  if (data.in_dim() != model.in_dim())
    throw ShapeError("train: dataset dim " + std::to_string(data.in_dim()) +
                     " != model input dim " + std::to_string(model.in_dim()));
  if (cfg.loss == LossKind::cross_entropy) {
    if (!data.classification())
      throw ValidationError("train: cross_entropy needs a labeled dataset");
    if (data.n_classes() != model.out_dim())
      throw ShapeError("train: model outputs " + std::to_string(model.out_dim()) +
                       " logits for " + std::to_string(data.n_classes()) + " classes");
  } else {
    if (data.targets.empty())
      throw ValidationError("train: mse needs regression targets");
    if (data.targets.front().size() != model.out_dim())
      throw ShapeError("train: target dim does not match model output dim");
  }

  auto params = model.parameter_views();

  TrainState local;
  TrainState& st = state ? *state : local;
  if (!st.initialized) {
    st.opt = init_optimizer_state(params, cfg.optimizer);
    st.shuffle_seed = cfg.seed ^ detail::kShuffleDomain;
    st.shuffle_counter = 0;
    st.next_epoch = 0;
    st.initialized = true;
  }

  const std::size_t n_layers = detail::model_layer_count(model);
  const bool classify = cfg.loss == LossKind::cross_entropy;
  TrainLog log;

  auto should_record = [&](std::size_t epoch) {
    return epoch == 0 || epoch == cfg.epochs || epoch % cfg.log_every == 0;
  };

  auto finish_record = [&](std::size_t epoch, double train_loss, double gnorm,
                           const detail::EpochStats& stats) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss;
    rec.grad_norm = gnorm;
    detail::fill_record_stats(stats, rec);
    if (!data.val_idx.empty()) {
      rec.val_loss = eval_loss(model, data, data.val_idx, cfg.loss);
      if (classify) rec.val_accuracy = eval_accuracy(model, data, data.val_idx);
    }
    log.records.push_back(std::move(rec));
  };

  if (st.next_epoch == 0) {
    // pre-training snapshot: evaluation only, no updates
    detail::EpochStats stats(n_layers);
    double total = 0.0;
    try {
      for (std::size_t i : data.train_idx) {
        auto [pred, caches] = model.forward_cached(data.inputs[i]);
        detail::accumulate_stats(caches, stats);
        total += detail::apply_loss(pred, data, i, cfg.loss).loss;
      }
    } catch (const NumericError&) {
      throw DivergenceError("train: non-finite values before any update", 0);
    }
    const double loss0 = total / static_cast<double>(data.train_idx.size());
    if (!std::isfinite(loss0))
      throw DivergenceError("train: non-finite loss before any update", 0);
    if (should_record(0)) finish_record(0, loss0, 0.0, stats);
    st.next_epoch = 1;
  }

  rng::Prng shuffle(st.shuffle_seed, st.shuffle_counter);

  // slot of each sample id in train_idx, so per-sample losses can be summed
  // in a fixed order regardless of the epoch's shuffle
  std::vector<std::size_t> slot(data.size(), 0);
  for (std::size_t k = 0; k < data.train_idx.size(); ++k)
    slot[data.train_idx[k]] = k;

  for (std::size_t epoch = st.next_epoch; epoch <= cfg.epochs; ++epoch) {
    // Deterministic Fisher-Yates from the identity order each epoch: the
    // permutation depends only on the rng stream position, which the resume
    // state carries.
    std::vector<std::size_t> order = data.train_idx;
    for (std::size_t i = order.size(); i-- > 1;) {
      const std::size_t j = shuffle.next_index(i + 1);
      std::swap(order[i], order[j]);
    }

    detail::EpochStats stats(n_layers);
    std::vector<double> sample_loss(data.train_idx.size(), 0.0);
    double last_gnorm = 0.0;
    auto grads = model.zero_grads();
    auto grad_views = model.gradient_views(grads);

    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
        for (auto& gv : grad_views)
          for (std::size_t k = 0; k < gv.size; ++k) gv.data[k] = 0.0;
        for (std::size_t bi = start; bi < stop; ++bi) {
          const std::size_t i = order[bi];
          auto [pred, caches] = model.forward_cached(data.inputs[i]);
          detail::accumulate_stats(caches, stats);
          LossResult lr = detail::apply_loss(pred, data, i, cfg.loss);
          if (!std::isfinite(lr.loss))
            throw DivergenceError("train: non-finite loss at epoch " +
                                      std::to_string(epoch),
                                  epoch);
          sample_loss[slot[i]] = lr.loss;
          model.backward_accumulate(caches, lr.d_pred, grads);
        }
        const double inv = 1.0 / static_cast<double>(stop - start);
        for (auto& gv : grad_views)
          for (std::size_t k = 0; k < gv.size; ++k) gv.data[k] *= inv;
        last_gnorm = detail::grad_norm_of(grad_views);
        optimizer_step(params, grad_views, st.opt, cfg.optimizer, cfg.learning_rate);
      }
    } catch (const NumericError&) {
      throw DivergenceError("train: non-finite values at epoch " + std::to_string(epoch),
                            epoch);
    }

    // fixed-order sum so the epoch loss is independent of the shuffle
    double epoch_loss = 0.0;
    for (double v : sample_loss) epoch_loss += v;
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss))
      throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch),
                            epoch);
    if (observer) observer(epoch, grad_views);
    if (should_record(epoch)) finish_record(epoch, epoch_loss, last_gnorm, stats);
    st.next_epoch = epoch + 1;
    st.shuffle_counter = shuffle.counter();
  }

  return log;
}

}  // namespace pgnn::train
