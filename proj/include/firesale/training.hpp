#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "firesale/autodiff.hpp"
#include "firesale/contagion.hpp"
#include "firesale/dataset.hpp"
#include "firesale/monotone_net.hpp"
#include "firesale/random.hpp"

namespace firesale {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 2000;
  std::size_t batch_size = 256;
  std::uint64_t seed = 42;
  std::size_t early_stop_patience = 200;
  double validation_fraction = 0.2;
  /// Decoupled weight decay on the weights of multi-layer Price Net branches.
  double price_decay = 0.0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("training: learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("training: beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("training: beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("training: epsilon must be positive");
    if (batch_size < 1) throw std::invalid_argument("training: batch_size must be at least 1");
    if (epochs < 1) throw std::invalid_argument("training: epochs must be at least 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
      throw std::invalid_argument("training: validation_fraction must lie in [0, 1)");
    }
    if (!(price_decay >= 0.0)) throw std::invalid_argument("training: price_decay must be non-negative");
  }
};

struct TrainReport {
  std::vector<double> train_loss;  ///< sample-weighted mean batch MSE per epoch
  std::vector<double> val_loss;    ///< validation MSE after each epoch
  std::size_t best_epoch = 0;      ///< 1-based epoch whose parameters the model holds
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  std::size_t train_count = 0;
  std::size_t val_count = 0;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

inline void write_train_report_csv(std::ostream& os, const TrainReport& r) {
  os << "epoch,train_mse,val_mse\n";
  for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
    os << (e + 1) << ',' << format_double(r.train_loss[e]) << ',' << format_double(r.val_loss[e]) << '\n';
  }
}

class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean of squared differences over all entries.
inline double mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse: prediction " + pred.shape_string() + " vs target " + target.shape_string());
  }
  if (pred.size() == 0) throw ShapeError("mse: empty operands");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

/// Adaptive-moment optimizer followed by projection of the constrained
/// tensors onto the non-negative orthant.
class ProjectedAdam {
 public:
  ProjectedAdam(const TrainConfig& cfg, const std::vector<DualModel::Parameter>& params)
      : lr_(cfg.learning_rate), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.epsilon), decay_(cfg.price_decay) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->size(), 0.0);
      v_.emplace_back(p.value->size(), 0.0);
    }
  }

  void step(const std::vector<DualModel::Parameter>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw std::invalid_argument("adam: parameter list changed between steps");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& theta = params[k].value->values();
      const auto& g = grads[k]->values();
      auto& m = m_[k];
      auto& v = v_[k];
      const double shrink = params[k].decays ? lr_ * decay_ : 0.0;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] -= shrink * theta[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        theta[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        if (params[k].constrained && theta[i] < 0.0) theta[i] = 0.0;
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_, decay_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Model inputs and targets gathered from records, row per sample.
struct Batch {
  Tensor shocks;                    ///< rows × N
  Tensor prices;                    ///< rows × M
  std::optional<Tensor> true_liq;   ///< rows × N·M, Inclusive only

  static Batch gather(const std::vector<EquilibriumRecord>& records,
                      const std::vector<std::size_t>& rows, bool with_liquidations) {
    if (rows.empty()) throw std::invalid_argument("batch: no rows");
    const std::size_t n = records[rows.front()].s.size();
    const std::size_t m = records[rows.front()].p.size();
    Batch b;
    b.shocks = Tensor::zeros({rows.size(), n});
    b.prices = Tensor::zeros({rows.size(), m});
    if (with_liquidations) b.true_liq = Tensor::zeros({rows.size(), n * m});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& rec = records[rows[r]];
      if (rec.s.size() != n || rec.p.size() != m) throw ShapeError("batch: records differ in shape");
      for (std::size_t i = 0; i < n; ++i) b.shocks.at(r, i) = rec.s[i];
      for (std::size_t i = 0; i < m; ++i) b.prices.at(r, i) = rec.p[i];
      if (with_liquidations) {
        if (!rec.has_liquidations()) {
          throw std::invalid_argument("batch: inclusive variant needs per-bank liquidations in the data");
        }
        for (std::size_t i = 0; i < n * m; ++i) b.true_liq->at(r, i) = rec.ell_bank[i];
      }
    }
    return b;
  }

  static Batch gather_all(const std::vector<EquilibriumRecord>& records, bool with_liquidations) {
    std::vector<std::size_t> rows(records.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return gather(records, rows, with_liquidations);
  }
};

inline DualModel::Output predict(const DualModel& model, const Batch& batch) {
  return model.forward(batch.shocks, batch.true_liq ? &*batch.true_liq : nullptr);
}

/// One projected optimizer step on `batch`; returns the pre-step loss.
inline double train_step(DualModel& model, ProjectedAdam& opt, const Batch& batch) {
  Tape tape;
  const auto s = tape.constant(batch.shocks);
  std::optional<Tape::NodeId> liq;
  if (batch.true_liq) liq = tape.constant(*batch.true_liq);
  const auto out = model.forward(tape, s, liq);
  const auto loss = tape.mse(out.p_hat, tape.constant(batch.prices));
  const double value = tape.value(loss)[0];
  if (!std::isfinite(value)) {
    throw TrainingDivergedError("training: loss became non-finite at step " +
                                std::to_string(opt.steps() + 1) +
                                "; lower the learning rate and retry");
  }
  const auto grads = tape.backward(loss);
  std::vector<const Tensor*> g;
  g.reserve(out.params.size());
  for (auto id : out.params) g.push_back(&grads.of(id));
  opt.step(model.parameters(), g);
  assert(model.is_feasible());
  return value;
}

using EpochCallback = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

/// Trains on observed (shock, price) pairs. A seeded split holds out
/// `validation_fraction` of the records; the model is left at the epoch
/// with the lowest validation MSE.
inline TrainReport train(DualModel& model, const std::vector<EquilibriumRecord>& data,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("training: empty dataset");
  if (!model.is_feasible()) model.clamp();
  const bool inclusive = model.needs_true_liquidations();

  auto order = Rng{cfg.seed, 0x73706c6974ULL}.permutation(data.size());
  std::size_t val_count = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(data.size()));
  if (val_count >= data.size()) val_count = data.size() - 1;
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_count));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(val_count), order.end());
  if (val_rows.empty()) val_rows = train_rows;

  const Batch val = Batch::gather(data, val_rows, inclusive);
  ProjectedAdam opt(cfg, model.parameters());

  TrainReport report;
  report.train_count = train_rows.size();
  report.val_count = val_count;
  DualModel best = model;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> perm = train_rows;
    Rng{cfg.seed, 0x65706f6368ULL, epoch}.shuffle(perm);

    double weighted = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(perm.size(), start + cfg.batch_size);
      std::vector<std::size_t> rows(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                    perm.begin() + static_cast<std::ptrdiff_t>(end));
      weighted += train_step(model, opt, Batch::gather(data, rows, inclusive)) *
                  static_cast<double>(rows.size());
    }
    const double train_loss = weighted / static_cast<double>(perm.size());
    const double val_loss = mse(predict(model, val).p_hat, val.prices);
    if (!std::isfinite(val_loss)) {
      throw TrainingDivergedError("training: validation loss became non-finite in epoch " +
                                  std::to_string(epoch) + "; lower the learning rate and retry");
    }
    report.train_loss.push_back(train_loss);
    report.val_loss.push_back(val_loss);
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);

    if (val_loss < report.best_val_loss) {
      report.best_val_loss = val_loss;
      report.best_epoch = epoch;
      best = model;
    } else if (cfg.early_stop_patience > 0 && epoch - report.best_epoch >= cfg.early_stop_patience) {
      break;
    }
  }
  report.steps = opt.steps();
  model = std::move(best);
  return report;
}

}  // namespace firesale
