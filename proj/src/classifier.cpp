#include "mnid/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mnid/error.hpp"

namespace mnid {

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
  }
  if (cfg.epochs == 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
  if (!(cfg.l2_penalty >= 0.0)) throw Error(ErrorCode::InvalidConfig, "l2_penalty must be >= 0");
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> SoftmaxModel::logits(std::span<const float> x) const {
  std::vector<double> z(num_classes());
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double* w = weights.data() + c * dim;
    double s = bias[c];
    for (std::size_t j = 0; j < dim; ++j) s += w[j] * double(x[j]);
    z[c] = s;
  }
  return z;
}

std::vector<double> SoftmaxModel::probabilities(std::span<const float> x) const {
  const auto z = logits(x);
  return softmax(z);
}

LossGradient loss_gradient(const SoftmaxModel& model, const Batch& batch, double l2_penalty) {
  const std::size_t C = model.num_classes();
  const std::size_t d = model.dim;
  LossGradient out;
  out.grad_weights.assign(C * d, 0.0);
  out.grad_bias.assign(C, 0.0);
  const double inv_n = 1.0 / double(batch.rows.size());

  double ce = 0.0;
  for (std::size_t i = 0; i < batch.rows.size(); ++i) {
    const auto x = batch.X->row(batch.rows[i]);
    const auto z = model.logits(x);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double log_z = m + std::log(sum);
    const std::size_t y = batch.targets[i];
    ce += log_z - z[y];
    for (std::size_t c = 0; c < C; ++c) {
      const double err = (std::exp(z[c] - log_z) - (c == y ? 1.0 : 0.0)) * inv_n;
      double* g = out.grad_weights.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) g[j] += err * double(x[j]);
      out.grad_bias[c] += err;
    }
  }

  double sq = 0.0;
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    sq += model.weights[k] * model.weights[k];
    out.grad_weights[k] += l2_penalty * model.weights[k];
  }
  out.loss = ce * inv_n + 0.5 * l2_penalty * sq;
  return out;
}

SoftmaxModel train_rows(std::span<const RowIndex> rows, std::span<const ClassId> labels,
                        const EmbeddingMatrix& X, const TrainConfig& cfg, TrainTrace* trace) {
  validate(cfg);
  if (rows.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "rows and labels differ in length");
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a] != rows[b] ? rows[a] < rows[b] : labels[a] < labels[b];
  });

  SoftmaxModel model;
  model.dim = X.dim;
  model.classes.assign(labels.begin(), labels.end());
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()),
                      model.classes.end());
  if (model.classes.size() < 2) {
    throw Error(ErrorCode::DegenerateLabels,
                "training needs at least 2 classes, got " + std::to_string(model.classes.size()));
  }
  model.weights.assign(model.classes.size() * model.dim, 0.0);
  model.bias.assign(model.classes.size(), 0.0);

  Batch batch{&X, {}, {}};
  batch.rows.reserve(rows.size());
  batch.targets.reserve(rows.size());
  for (std::size_t k : order) {
    if (rows[k] >= X.rows) throw Error(ErrorCode::UnknownPoint, "row " + std::to_string(rows[k]));
    batch.rows.push_back(rows[k]);
    const auto pos = std::lower_bound(model.classes.begin(), model.classes.end(), labels[k]);
    batch.targets.push_back(static_cast<std::size_t>(pos - model.classes.begin()));
  }

  auto current = loss_gradient(model, batch, cfg.l2_penalty);
  if (!std::isfinite(current.loss)) throw Error(ErrorCode::NonFiniteLoss, "initial loss");
  TrainTrace local;
  local.accepted_losses.push_back(current.loss);

  double lr = cfg.learning_rate;
  double best = current.loss;
  std::size_t stale = 0;
  SoftmaxModel candidate = model;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ++local.epochs_run;
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
      candidate.weights[k] = model.weights[k] - lr * current.grad_weights[k];
    }
    for (std::size_t c = 0; c < model.bias.size(); ++c) {
      candidate.bias[c] = model.bias[c] - lr * current.grad_bias[c];
    }
    auto next = loss_gradient(candidate, batch, cfg.l2_penalty);
    if (!std::isfinite(next.loss) || next.loss > current.loss) {
      // Overshoot: keep the parameters, halve the step.
      lr *= 0.5;
      ++stale;
    } else {
      std::swap(model, candidate);
      current = std::move(next);
      local.accepted_losses.push_back(current.loss);
      if (best - current.loss > cfg.min_delta) {
        best = current.loss;
        stale = 0;
      } else {
        ++stale;
      }
    }
    if (stale >= cfg.early_stop_patience) {
      local.early_stopped = true;
      break;
    }
  }
  if (trace) *trace = std::move(local);
  return model;
}

SoftmaxModel train(const LabeledPool& pool, const EmbeddingMatrix& X, const TrainConfig& cfg,
                   TrainTrace* trace) {
  std::vector<RowIndex> rows;
  std::vector<ClassId> labels;
  rows.reserve(pool.size());
  labels.reserve(pool.size());
  for (const auto& [row, entry] : pool.entries()) {
    rows.push_back(row);
    labels.push_back(entry.label);
  }
  return train_rows(rows, labels, X, cfg, trace);
}

ConfidenceTable predict(const SoftmaxModel& model, std::span<const RowIndex> rows,
                        const EmbeddingMatrix& X) {
  ConfidenceTable out;
  for (RowIndex r : rows) {
    if (r >= X.rows) throw Error(ErrorCode::UnknownPoint, "row " + std::to_string(r));
    Confidence c;
    c.probabilities = model.probabilities(X.row(r));
    const std::size_t best = argmax(c.probabilities);
    c.predicted = model.classes[best];
    c.confidence = c.probabilities[best];
    out.emplace(r, std::move(c));
  }
  return out;
}

}  // namespace mnid
