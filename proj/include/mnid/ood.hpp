#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mnid/classifier.hpp"
#include "mnid/core.hpp"
#include "mnid/ingest.hpp"

namespace mnid {

enum class OodMethod { Msp, Doc, Proto };

std::string_view ood_method_name(OodMethod m);
// Throws UnknownMethod.
OodMethod parse_ood_method(std::string_view name);

struct OodConfig {
  OodMethod method = OodMethod::Proto;
  double msp_threshold = 0.5;
  // Floor of the per-class DOC threshold max(floor, mean - 3 std).
  double doc_floor = 0.5;
  double proto_margin = 1.0;
};

void validate(const OodConfig& cfg);

struct OodEntry {
  RowIndex row = 0;
  // msp: max softmax probability; doc: max sigmoid score (higher = in-domain).
  // proto: distance to the nearest prototype (lower = in-domain).
  double score = 0.0;
  bool is_ood = false;
};

struct OodVerdict {
  OodMethod method = OodMethod::Proto;
  std::vector<OodEntry> entries;  // pool order as given
  // Decision parameters actually used: msp threshold, per-class DOC
  // thresholds, or the proto distance cutoff.
  std::vector<double> thresholds;

  std::vector<RowIndex> ood_rows() const;
};

// Fits the chosen detector on the labeled init set and scores the pool.
OodVerdict oodd(const LabeledPool& init, std::span<const RowIndex> pool_rows,
                const EmbeddingMatrix& X, const OodConfig& cfg, const TrainConfig& train_cfg);

struct OodConfusion {
  // OOD is the positive class.
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  double f1_ood = 0.0;
  double f1_ind = 0.0;
  double macro_f1 = 0.0;  // over {IND, OOD} classes present in the ground truth
};

OodConfusion confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

// Ground truth: a pool point is IND iff its gold class is known at start.
OodConfusion ood_confusion(const OodVerdict& verdict, const Corpus& corpus);

}  // namespace mnid
