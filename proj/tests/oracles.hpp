#pragma once

// Independent reference computations used to check the engine.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "mnid/classifier.hpp"
#include "mnid/ingest.hpp"

namespace mnid::oracle {

// Minimum k-means objective over every partition of the points into exactly
// k non-empty groups (restricted growth strings).
inline double best_partition_inertia(const std::vector<std::vector<double>>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  const std::size_t d = pts.empty() ? 0 : pts[0].size();
  std::vector<std::size_t> a(n, 0);
  double best = std::numeric_limits<double>::infinity();
  auto evaluate = [&] {
    std::vector<std::vector<double>> sum(k, std::vector<double>(d, 0.0));
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++cnt[a[i]];
      for (std::size_t j = 0; j < d; ++j) sum[a[i]][j] += pts[i][j];
    }
    for (auto c : cnt) {
      if (c == 0) return;
    }
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double t = pts[i][j] - sum[a[i]][j] / double(cnt[a[i]]);
        cost += t * t;
      }
    }
    best = std::min(best, cost);
  };
  // a[0] = 0 and a[i] <= max(a[0..i-1]) + 1, capped at k-1.
  std::vector<std::size_t> prefix_max(n, 0);
  std::size_t i = n - 1;
  evaluate();
  while (true) {
    while (i > 0) {
      const std::size_t cap = std::min(k - 1, prefix_max[i - 1] + 1);
      if (a[i] < cap) break;
      --i;
    }
    if (i == 0) return best;
    ++a[i];
    prefix_max[i] = std::max(prefix_max[i - 1], a[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      a[j] = 0;
      prefix_max[j] = prefix_max[j - 1];
    }
    i = n - 1;
    evaluate();
  }
}

struct Scores {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Per-class precision and recall over classes present in gold.
inline Scores direct_scores(const std::vector<std::size_t>& pred,
                            const std::vector<std::size_t>& gold) {
  Scores s;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += pred[i] == gold[i];
  s.accuracy = double(correct) / double(gold.size());
  const std::set<std::size_t> classes(gold.begin(), gold.end());
  double sum = 0.0;
  for (auto c : classes) {
    double tp = 0, pred_c = 0, gold_c = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tp += pred[i] == c && gold[i] == c;
      pred_c += pred[i] == c;
      gold_c += gold[i] == c;
    }
    const double precision = pred_c == 0 ? 0.0 : tp / pred_c;
    const double recall = tp / gold_c;
    sum += precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
  }
  s.macro_f1 = sum / double(classes.size());
  return s;
}

// Loss of `model` as a plain function of its parameters.
inline double loss_at(const SoftmaxModel& model, const Batch& batch, double l2) {
  double ce = 0.0;
  for (std::size_t i = 0; i < batch.rows.size(); ++i) {
    const auto x = batch.X->row(batch.rows[i]);
    std::vector<double> z(model.num_classes());
    for (std::size_t c = 0; c < z.size(); ++c) {
      z[c] = model.bias[c];
      for (std::size_t j = 0; j < model.dim; ++j) z[c] += model.weights[c * model.dim + j] * x[j];
    }
    double denom = 0.0;
    for (double v : z) denom += std::exp(v);
    ce += std::log(denom) - z[batch.targets[i]];
  }
  double sq = 0.0;
  for (double w : model.weights) sq += w * w;
  return ce / double(batch.rows.size()) + 0.5 * l2 * sq;
}

// Largest |analytic - central difference| over all parameters.
inline double gradient_gap(const SoftmaxModel& model, const Batch& batch, double l2,
                           double step = 1e-4) {
  const auto analytic = loss_gradient(model, batch, l2);
  double gap = 0.0;
  SoftmaxModel probe = model;
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    probe.weights[k] = model.weights[k] + step;
    const double up = loss_at(probe, batch, l2);
    probe.weights[k] = model.weights[k] - step;
    const double down = loss_at(probe, batch, l2);
    probe.weights[k] = model.weights[k];
    gap = std::max(gap, std::abs((up - down) / (2 * step) - analytic.grad_weights[k]));
  }
  for (std::size_t c = 0; c < model.bias.size(); ++c) {
    probe.bias[c] = model.bias[c] + step;
    const double up = loss_at(probe, batch, l2);
    probe.bias[c] = model.bias[c] - step;
    const double down = loss_at(probe, batch, l2);
    probe.bias[c] = model.bias[c];
    gap = std::max(gap, std::abs((up - down) / (2 * step) - analytic.grad_bias[c]));
  }
  return gap;
}

}  // namespace mnid::oracle
