#include "mnid/ood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mnid/error.hpp"

namespace mnid {

std::string_view ood_method_name(OodMethod m) {
  switch (m) {
    case OodMethod::Msp: return "msp";
    case OodMethod::Doc: return "doc";
    case OodMethod::Proto: return "proto";
  }
  return "proto";
}

OodMethod parse_ood_method(std::string_view name) {
  if (name == "msp") return OodMethod::Msp;
  if (name == "doc") return OodMethod::Doc;
  if (name == "proto") return OodMethod::Proto;
  throw Error(ErrorCode::UnknownMethod, "ood method '" + std::string(name) + "'");
}

void validate(const OodConfig& cfg) {
  auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!open_unit(cfg.msp_threshold)) {
    throw Error(ErrorCode::InvalidConfig, "msp_threshold must be in (0,1)");
  }
  if (!open_unit(cfg.doc_floor)) throw Error(ErrorCode::InvalidConfig, "doc_floor must be in (0,1)");
  if (!(cfg.proto_margin > 0.0)) throw Error(ErrorCode::InvalidConfig, "proto_margin must be > 0");
}

std::vector<RowIndex> OodVerdict::ood_rows() const {
  std::vector<RowIndex> out;
  for (const auto& e : entries) {
    if (e.is_ood) out.push_back(e.row);
  }
  return out;
}

namespace {

struct InitSet {
  std::vector<RowIndex> rows;
  std::vector<ClassId> labels;
  std::vector<ClassId> classes;  // ascending
};

InitSet collect(const LabeledPool& init) {
  InitSet s;
  for (const auto& [row, e] : init.entries()) {
    s.rows.push_back(row);
    s.labels.push_back(e.label);
    s.classes.push_back(e.label);
  }
  std::sort(s.classes.begin(), s.classes.end());
  s.classes.erase(std::unique(s.classes.begin(), s.classes.end()), s.classes.end());
  if (s.classes.size() < 2) {
    throw Error(ErrorCode::DegenerateLabels, "OOD detection needs at least 2 known classes");
  }
  return s;
}

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double dot(std::span<const double> w, std::span<const float> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * double(x[j]);
  return s;
}

// One sigmoid unit fit by full-batch gradient descent on mean binary
// cross-entropy, with the same step-halving rule as the softmax trainer.
struct SigmoidUnit {
  std::vector<double> w;
  double b = 0.0;
};

SigmoidUnit fit_sigmoid(const InitSet& s, ClassId positive, const EmbeddingMatrix& X,
                        const TrainConfig& cfg) {
  const std::size_t d = X.dim;
  const double inv_n = 1.0 / double(s.rows.size());
  auto eval = [&](const SigmoidUnit& u, std::vector<double>& gw, double& gb) {
    gw.assign(d, 0.0);
    gb = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      const auto x = X.row(s.rows[i]);
      const double z = dot(u.w, x) + u.b;
      const double y = s.labels[i] == positive ? 1.0 : 0.0;
      // log(1 + e^z) - y z, stable
      loss += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y * z;
      const double err = (sigmoid(z) - y) * inv_n;
      for (std::size_t j = 0; j < d; ++j) gw[j] += err * double(x[j]);
      gb += err;
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      sq += u.w[j] * u.w[j];
      gw[j] += cfg.l2_penalty * u.w[j];
    }
    return loss * inv_n + 0.5 * cfg.l2_penalty * sq;
  };

  SigmoidUnit unit{std::vector<double>(d, 0.0), 0.0};
  std::vector<double> gw, next_gw;
  double gb = 0.0, next_gb = 0.0;
  double loss = eval(unit, gw, gb);
  double best = loss;
  double lr = cfg.learning_rate;
  std::size_t stale = 0;
  SigmoidUnit cand = unit;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t j = 0; j < d; ++j) cand.w[j] = unit.w[j] - lr * gw[j];
    cand.b = unit.b - lr * gb;
    const double next = eval(cand, next_gw, next_gb);
    if (!std::isfinite(next) || next > loss) {
      lr *= 0.5;
      ++stale;
    } else {
      std::swap(unit, cand);
      std::swap(gw, next_gw);
      gb = next_gb;
      loss = next;
      if (best - loss > cfg.min_delta) {
        best = loss;
        stale = 0;
      } else {
        ++stale;
      }
    }
    if (stale >= cfg.early_stop_patience) break;
  }
  return unit;
}

double distance(std::span<const double> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - double(b[j]);
    s += t * t;
  }
  return std::sqrt(s);
}

OodVerdict run_msp(const InitSet& s, std::span<const RowIndex> pool, const EmbeddingMatrix& X,
                   const OodConfig& cfg, const TrainConfig& train_cfg) {
  const auto model = train_rows(s.rows, s.labels, X, train_cfg);
  OodVerdict v{OodMethod::Msp, {}, {cfg.msp_threshold}};
  for (RowIndex r : pool) {
    const auto p = model.probabilities(X.row(r));
    const double cs = p[argmax(p)];
    v.entries.push_back({r, cs, cs < cfg.msp_threshold});
  }
  return v;
}

OodVerdict run_doc(const InitSet& s, std::span<const RowIndex> pool, const EmbeddingMatrix& X,
                   const OodConfig& cfg, const TrainConfig& train_cfg) {
  std::vector<SigmoidUnit> units;
  std::vector<double> thresholds;
  for (ClassId c : s.classes) {
    units.push_back(fit_sigmoid(s, c, X, train_cfg));
    const auto& u = units.back();
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      if (s.labels[i] != c) continue;
      const double p = sigmoid(dot(u.w, X.row(s.rows[i])) + u.b);
      sum += p;
      sum_sq += p * p;
      ++n;
    }
    const double mean = sum / double(n);
    const double var = std::max(0.0, sum_sq / double(n) - mean * mean);
    thresholds.push_back(std::max(cfg.doc_floor, mean - 3.0 * std::sqrt(var)));
  }
  OodVerdict v{OodMethod::Doc, {}, thresholds};
  for (RowIndex r : pool) {
    const auto x = X.row(r);
    double best = 0.0;
    bool rejected_by_all = true;
    for (std::size_t k = 0; k < units.size(); ++k) {
      const double p = sigmoid(dot(units[k].w, x) + units[k].b);
      best = std::max(best, p);
      if (!(p < thresholds[k])) rejected_by_all = false;
    }
    v.entries.push_back({r, best, rejected_by_all});
  }
  return v;
}

OodVerdict run_proto(const InitSet& s, std::span<const RowIndex> pool, const EmbeddingMatrix& X,
                     const OodConfig& cfg) {
  const std::size_t d = X.dim;
  std::vector<std::vector<double>> protos(s.classes.size(), std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(s.classes.size(), 0);
  auto slot = [&](ClassId c) {
    return static_cast<std::size_t>(std::lower_bound(s.classes.begin(), s.classes.end(), c) -
                                    s.classes.begin());
  };
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    const std::size_t k = slot(s.labels[i]);
    const auto x = X.row(s.rows[i]);
    for (std::size_t j = 0; j < d; ++j) protos[k][j] += double(x[j]);
    ++counts[k];
  }
  for (std::size_t k = 0; k < protos.size(); ++k) {
    for (auto& v : protos[k]) v /= double(counts[k]);
  }
  double radius = 0.0;
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    radius = std::max(radius, distance(protos[slot(s.labels[i])], X.row(s.rows[i])));
  }
  const double cutoff = cfg.proto_margin * radius;
  OodVerdict v{OodMethod::Proto, {}, {cutoff}};
  for (RowIndex r : pool) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& p : protos) nearest = std::min(nearest, distance(p, X.row(r)));
    v.entries.push_back({r, nearest, nearest > cutoff});
  }
  return v;
}

}  // namespace

OodVerdict oodd(const LabeledPool& init, std::span<const RowIndex> pool_rows,
                const EmbeddingMatrix& X, const OodConfig& cfg, const TrainConfig& train_cfg) {
  validate(cfg);
  const InitSet s = collect(init);
  for (RowIndex r : pool_rows) {
    if (r >= X.rows) throw Error(ErrorCode::UnknownPoint, "row " + std::to_string(r));
  }
  switch (cfg.method) {
    case OodMethod::Msp: return run_msp(s, pool_rows, X, cfg, train_cfg);
    case OodMethod::Doc: return run_doc(s, pool_rows, X, cfg, train_cfg);
    case OodMethod::Proto: return run_proto(s, pool_rows, X, cfg);
  }
  throw Error(ErrorCode::UnknownMethod, "ood method");
}

OodConfusion confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                   std::size_t tn) {
  OodConfusion c{tp, fp, fn, tn};
  const std::size_t n = tp + fp + fn + tn;
  c.accuracy = n == 0 ? 0.0 : double(tp + tn) / double(n);
  auto f1 = [](std::size_t t, std::size_t f_pos, std::size_t f_neg) {
    const std::size_t denom = 2 * t + f_pos + f_neg;
    return denom == 0 ? 0.0 : 2.0 * double(t) / double(denom);
  };
  c.f1_ood = f1(tp, fp, fn);
  c.f1_ind = f1(tn, fn, fp);
  const bool has_ood = tp + fn > 0;
  const bool has_ind = tn + fp > 0;
  if (has_ood && has_ind) {
    c.macro_f1 = 0.5 * (c.f1_ood + c.f1_ind);
  } else if (has_ood) {
    c.macro_f1 = c.f1_ood;
  } else if (has_ind) {
    c.macro_f1 = c.f1_ind;
  }
  return c;
}

OodConfusion ood_confusion(const OodVerdict& verdict, const Corpus& corpus) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& e : verdict.entries) {
    const auto& rec = corpus.records.at(e.row);
    if (!rec.has_gold()) throw Error(ErrorCode::MissingGold, "point " + rec.id);
    const auto cls = corpus.vocabulary.find(rec.gold_label);
    const bool truly_ood = !(cls && corpus.vocabulary.known_at_start(*cls));
    if (truly_ood) {
      (e.is_ood ? tp : fn) += 1;
    } else {
      (e.is_ood ? fp : tn) += 1;
    }
  }
  return confusion_from_counts(tp, fp, fn, tn);
}

}  // namespace mnid
