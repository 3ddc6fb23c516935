#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hanet/corpus.hpp"
#include "hanet/eval.hpp"
#include "hanet/model.hpp"

namespace hanet {

// -ln p[label], p floored at 1e-12 so the loss stays finite.
inline double cross_entropy(const Tensor& probabilities, int label) {
  if (probabilities.rows() != 1)
    throw DimensionError("cross_entropy: expected 1xK probabilities, got " +
                         probabilities.shape_str());
  if (label < 0 || label >= probabilities.cols())
    throw ContractError("cross_entropy: label " + std::to_string(label) +
                        " out of " + probabilities.shape_str());
  const double p = probabilities.at(0, label);
  return -std::log(p > Tape::kProbFloor ? p : Tape::kProbFloor);
}

// ---------------------------------------------------------------------------
// Triangular cyclical learning rate with the opposite momentum triangle.
// ---------------------------------------------------------------------------

struct CyclicalSchedule {
  double lr_min = 0.0;
  double lr_max = 0.0;
  double momentum_min = 0.85;
  double momentum_max = 0.95;
  long half_cycle_iters = 0;
};

struct LrMomentum {
  double lr = 0.0;
  double momentum = 0.0;
};

// lr climbs linearly from lr_min to lr_max over one half-cycle and back down
// over the next; momentum mirrors it (momentum_max at the lr trough).
inline LrMomentum schedule_at(const CyclicalSchedule& s, long iter) {
  if (!(s.lr_min < s.lr_max))
    throw ContractError("schedule_at: lr_min must be strictly below lr_max");
  if (s.half_cycle_iters <= 0)
    throw ContractError("schedule_at: half_cycle_iters must be positive");
  if (iter < 0) throw ContractError("schedule_at: iter must be >= 0");
  const long period = 2 * s.half_cycle_iters;
  const long phase = iter % period;
  const double frac =
      phase <= s.half_cycle_iters
          ? static_cast<double>(phase) / s.half_cycle_iters
          : static_cast<double>(period - phase) / s.half_cycle_iters;
  return {s.lr_min + (s.lr_max - s.lr_min) * frac,
          s.momentum_max - (s.momentum_max - s.momentum_min) * frac};
}

// ---------------------------------------------------------------------------
// SGD with classical (heavy-ball) momentum: v <- m v - lr g ; theta <- theta + v
// ---------------------------------------------------------------------------

inline void sgd_update(Tensor& theta, Tensor& velocity, const Tensor& grad,
                       double lr, double momentum,
                       const std::string& name = "param") {
  require_same_shape(theta, grad, "sgd_update");
  require_same_shape(theta, velocity, "sgd_update");
  if (!all_finite(grad))
    throw NumericError("sgd: non-finite gradient in " + name);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grad[i];
    theta[i] += velocity[i];
  }
}

inline void sgd_momentum_step(ModelParams& params, const ModelConfig& cfg,
                              const std::vector<Tensor>& grads,
                              std::vector<Tensor>& velocity, double lr,
                              double momentum) {
  std::size_t k = 0;
  visit_params(params, cfg, [&](const std::string& name, Tensor& x) {
    if (k >= grads.size() || k >= velocity.size())
      throw ContractError("sgd: gradient count mismatch");
    sgd_update(x, velocity[k], grads[k], lr, momentum, name);
    ++k;
  });
  if (k != grads.size())
    throw ContractError("sgd: gradient count mismatch");
}

// ---------------------------------------------------------------------------
// Whole-corpus metrics (evaluation mode, no dropout)
// ---------------------------------------------------------------------------

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
};

inline EvalMetrics evaluate_corpus(const ModelParams& p, const ModelConfig& cfg,
                                   const std::vector<Document>& docs,
                                   const EvalOptions& opts = {}) {
  if (docs.empty()) throw ContractError("evaluate_corpus: empty corpus");
  EvalMetrics m;
  m.confusion.assign(cfg.n_classes, std::vector<long>(cfg.n_classes, 0));
  long correct = 0;
  for (const auto& doc : docs) {
    if (doc.label < 0 || doc.label >= cfg.n_classes)
      throw ContractError("evaluate_corpus: label " + std::to_string(doc.label) +
                          " outside " + std::to_string(cfg.n_classes) + " classes");
    ForwardTrace trace = forward_document(p, cfg, make_view(doc), opts);
    m.loss += cross_entropy(trace.probabilities, doc.label);
    const int pred = predict_label(trace.probabilities);
    ++m.confusion[doc.label][pred];
    if (pred == doc.label) ++correct;
  }
  m.loss /= static_cast<double>(docs.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(docs.size());
  return m;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainHistoryRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;  // lr of the epoch's last iteration
};

struct TrainState {
  ModelParams params;
  ModelParams best_params;
  std::vector<Tensor> velocity;
  long iter = 0;
  int epoch = 0;
  double best_monitor = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<TrainHistoryRow> history;
};

struct TrainOptions {
  int batch_size = 64;
  int max_epochs = 50;
  int patience = 13;          // slightly more than one 12-epoch cycle
  int half_cycle_epochs = 6;  // 12-epoch cycles
  double lr_min = 0.0;
  double lr_max = 0.0;
  double momentum_min = 0.85;
  double momentum_max = 0.95;
  std::uint64_t seed = 0;
  std::string monitor = "val";  // "val" or "train": the early-stopping signal
};

// Per-document gradient of the batch-mean loss, accumulated into grads.
// Returns the document's loss. Deterministic given the dropout stream.
inline double accumulate_doc_gradient(const ModelParams& params,
                                      const ModelConfig& cfg, const DocView& doc,
                                      double weight, const DropoutPlan& dp,
                                      std::vector<Tensor>& grads) {
  Tape t;
  t.reserve(4096);
  BoundParams bound = bind(t, params, cfg);
  ForwardResult fr = encode_document(t, bound, cfg, doc, dp);
  Var loss = nll_loss(t, fr.probabilities, doc.label);
  t.backward(loss);
  for (std::size_t j = 0; j < bound.ordered.size(); ++j)
    acc_scaled(grads[j], t.adjoint(bound.ordered[j]), weight);
  return t.value(loss).at(0, 0);
}

inline std::vector<Tensor> zeros_like_params(const ModelParams& p,
                                             const ModelConfig& cfg) {
  std::vector<Tensor> out;
  visit_params(const_cast<ModelParams&>(p), cfg,
               [&](const std::string&, Tensor& x) {
                 out.emplace_back(x.rows(), x.cols());
               });
  return out;
}

// The full recipe: bucketed batches, per-iteration triangular lr / opposite
// momentum, per-epoch validation, early stopping on the monitored loss with
// the given patience, best-epoch parameters retained. Bit-reproducible from
// (config, corpus, seed): batching, dropout, and init each use their own
// seeded substream and gradients accumulate in document order.
inline TrainState train(const ModelConfig& cfg,
                        const std::vector<Document>& train_docs,
                        const std::vector<Document>& val_docs,
                        const TrainOptions& opts) {
  cfg.validate();
  if (train_docs.empty() || val_docs.empty())
    throw ContractError("train: empty train or validation split");
  if (opts.batch_size < 1) throw ContractError("train: batch_size must be >= 1");
  if (opts.max_epochs < 1) throw ContractError("train: max_epochs must be >= 1");
  if (opts.patience < 1) throw ContractError("train: patience must be >= 1");
  if (opts.lr_min < 0.0 || opts.lr_min > opts.lr_max)
    throw ContractError("train: need 0 <= lr_min <= lr_max");
  if (opts.monitor != "val" && opts.monitor != "train")
    throw ConfigError("train: monitor must be \"val\" or \"train\"");

  TrainState st;
  st.params = init_params(cfg, opts.seed);
  st.best_params = st.params;
  st.velocity = zeros_like_params(st.params, cfg);

  const long iters_per_epoch =
      (static_cast<long>(train_docs.size()) + opts.batch_size - 1) /
      opts.batch_size;
  const bool constant_lr = opts.lr_min == opts.lr_max;
  CyclicalSchedule sched{opts.lr_min, opts.lr_max, opts.momentum_min,
                         opts.momentum_max, opts.half_cycle_epochs * iters_per_epoch};

  SeededRng batch_rng = SeededRng::forked(opts.seed, "batching");
  SeededRng dropout_rng = SeededRng::forked(opts.seed, "dropout");

  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    const auto batches = make_batches(train_docs, opts.batch_size, batch_rng);
    double epoch_loss = 0.0;
    long epoch_docs = 0;
    double last_lr = opts.lr_min;
    for (const auto& batch : batches) {
      const LrMomentum lm = constant_lr
                                ? LrMomentum{opts.lr_min, opts.momentum_max}
                                : schedule_at(sched, st.iter);
      std::vector<Tensor> grads = zeros_like_params(st.params, cfg);
      const double w = 1.0 / static_cast<double>(batch.docs.size());
      DropoutPlan dp{true, cfg.dropout_rate, &dropout_rng};
      for (const auto& doc : batch.docs)
        epoch_loss += accumulate_doc_gradient(st.params, cfg, doc, w, dp, grads);
      epoch_docs += static_cast<long>(batch.docs.size());
      if (!cfg.trainable_embeddings) grads[0].fill(0.0);  // embeddings lead the order
      sgd_momentum_step(st.params, cfg, grads, st.velocity, lm.lr, lm.momentum);
      ++st.iter;
      last_lr = lm.lr;
    }
    const double train_loss = epoch_loss / static_cast<double>(epoch_docs);
    const EvalMetrics val = evaluate_corpus(st.params, cfg, val_docs);
    st.history.push_back({epoch, train_loss, val.loss, val.accuracy, last_lr});
    st.epoch = epoch;

    const double monitored = opts.monitor == "train" ? train_loss : val.loss;
    if (monitored < st.best_monitor) {
      st.best_monitor = monitored;
      st.best_epoch = epoch;
      st.best_params = st.params;
    } else if (epoch - st.best_epoch >= opts.patience) {
      break;
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Learning-rate range test
// ---------------------------------------------------------------------------

struct RangeTestPoint {
  long iter = 0;
  double lr = 0.0;
  double loss = 0.0;      // raw validation loss after the step
  double smoothed = 0.0;  // bias-corrected EMA of the above
};

struct RangeTestResult {
  std::vector<RangeTestPoint> curve;
  double suggested_lr_max = 0.0;
  double suggested_lr_min = 0.0;
  bool diverged = false;
};

// Sweeps lr over a log grid from lr_lo to lr_hi, one plain SGD step per
// point (no momentum), recording the smoothed validation loss. The
// suggestion is lr-at-minimum-smoothed-loss / 3 with lr_min a further /10;
// ties resolve to the latest point, so a flat curve suggests final lr / 3.
inline RangeTestResult lr_range_test(const ModelConfig& cfg,
                                     const std::vector<Document>& train_docs,
                                     const std::vector<Document>& val_docs,
                                     int iters, double lr_lo = 0.001,
                                     double lr_hi = 3.0, std::uint64_t seed = 0,
                                     int batch_size = 64) {
  if (iters < 10) throw ContractError("lr_range_test: iters must be >= 10");
  if (!(lr_lo > 0.0 && lr_lo < lr_hi))
    throw ContractError("lr_range_test: need 0 < lr_lo < lr_hi");
  if (train_docs.empty() || val_docs.empty())
    throw ContractError("lr_range_test: empty split");

  ModelParams params = init_params(cfg, seed);
  SeededRng batch_rng = SeededRng::forked(seed, "batching");
  SeededRng dropout_rng = SeededRng::forked(seed, "dropout");
  std::vector<Batch> batches = make_batches(train_docs, batch_size, batch_rng);
  std::size_t next_batch = 0;

  RangeTestResult out;
  const double kBeta = 0.9;
  double ema = 0.0;
  double best_smoothed = std::numeric_limits<double>::infinity();
  int best_index = -1;

  for (int k = 0; k < iters; ++k) {
    const double lr =
        lr_lo * std::pow(lr_hi / lr_lo,
                         static_cast<double>(k) / static_cast<double>(iters - 1));
    const Batch& batch = batches[next_batch];
    next_batch = (next_batch + 1) % batches.size();

    std::vector<Tensor> grads = zeros_like_params(params, cfg);
    const double w = 1.0 / static_cast<double>(batch.docs.size());
    DropoutPlan dp{true, cfg.dropout_rate, &dropout_rng};
    for (const auto& doc : batch.docs)
      accumulate_doc_gradient(params, cfg, doc, w, dp, grads);
    std::size_t j = 0;
    bool finite_step = true;
    visit_params(params, cfg, [&](const std::string&, Tensor& x) {
      if (finite_step && all_finite(grads[j])) acc_scaled(x, grads[j], -lr);
      else finite_step = false;
      ++j;
    });

    double vloss = std::numeric_limits<double>::quiet_NaN();
    if (finite_step) {
      double acc = 0.0;
      bool ok = true;
      for (const auto& doc : val_docs) {
        ForwardTrace tr = forward_document(params, cfg, make_view(doc));
        if (!all_finite(tr.probabilities)) {
          ok = false;
          break;
        }
        acc += cross_entropy(tr.probabilities, doc.label);
      }
      if (ok) vloss = acc / static_cast<double>(val_docs.size());
    }
    if (!std::isfinite(vloss)) {
      out.diverged = true;
      break;
    }
    ema = kBeta * ema + (1.0 - kBeta) * vloss;
    const double smoothed = ema / (1.0 - std::pow(kBeta, k + 1));
    out.curve.push_back({k, lr, vloss, smoothed});
    // Ties (within rounding noise) resolve to the latest point, so a flat
    // curve suggests the final lr / 3.
    const double tol = 1e-12 * std::max(1.0, std::abs(best_smoothed));
    if (smoothed <= best_smoothed + tol) {
      best_smoothed = std::min(best_smoothed, smoothed);
      best_index = k;
    }
  }

  if (best_index >= 0) {
    out.suggested_lr_max = out.curve[best_index].lr / 3.0;
    out.suggested_lr_min = out.suggested_lr_max / 10.0;
  }
  return out;
}

}  // namespace hanet
