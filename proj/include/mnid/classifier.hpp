#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mnid/core.hpp"
#include "mnid/ingest.hpp"

namespace mnid {

struct TrainConfig {
  // 1/L for unit-norm rows, where the cross-entropy gradient is ~1-Lipschitz.
  double learning_rate = 1.0;
  std::size_t epochs = 1000;
  double l2_penalty = 1e-4;
  std::size_t early_stop_patience = 20;
  // Minimum loss decrease that counts as progress for early stopping.
  double min_delta = 1e-9;
  // Reserved for stochastic variants; full-batch training from zero weights
  // consumes no randomness.
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

// Multinomial logistic regression. Row c of `weights` scores `classes[c]`.
struct SoftmaxModel {
  std::size_t dim = 0;
  std::vector<ClassId> classes;  // ascending vocabulary ids
  std::vector<double> weights;   // classes.size() x dim, row-major
  std::vector<double> bias;

  std::size_t num_classes() const { return classes.size(); }
  std::vector<double> logits(std::span<const float> x) const;
  std::vector<double> probabilities(std::span<const float> x) const;
};

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);
// Argmax with ties to the lowest index.
std::size_t argmax(std::span<const double> values);

struct Confidence {
  ClassId predicted = 0;
  double confidence = 0.0;  // max probability (CS)
  std::vector<double> probabilities;
};

using ConfidenceTable = std::map<RowIndex, Confidence>;

// A training batch: rows of X with targets given as model class positions.
struct Batch {
  const EmbeddingMatrix* X = nullptr;
  std::vector<RowIndex> rows;
  std::vector<std::size_t> targets;
};

struct LossGradient {
  double loss = 0.0;  // mean cross-entropy + (l2/2) * ||W||^2
  std::vector<double> grad_weights;
  std::vector<double> grad_bias;
};

LossGradient loss_gradient(const SoftmaxModel& model, const Batch& batch, double l2_penalty);

struct TrainTrace {
  std::vector<double> accepted_losses;
  std::size_t epochs_run = 0;
  bool early_stopped = false;
};

// Trains on explicit (row, class) pairs. Examples are sorted by row first, so
// the result does not depend on input order.
SoftmaxModel train_rows(std::span<const RowIndex> rows, std::span<const ClassId> labels,
                        const EmbeddingMatrix& X, const TrainConfig& cfg,
                        TrainTrace* trace = nullptr);

// Trains on every entry of the labeled pool.
SoftmaxModel train(const LabeledPool& pool, const EmbeddingMatrix& X, const TrainConfig& cfg,
                   TrainTrace* trace = nullptr);

ConfidenceTable predict(const SoftmaxModel& model, std::span<const RowIndex> rows,
                        const EmbeddingMatrix& X);

}  // namespace mnid
