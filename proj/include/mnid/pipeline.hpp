#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mnid/config.hpp"
#include "mnid/core.hpp"
#include "mnid/discovery.hpp"
#include "mnid/eval.hpp"
#include "mnid/ingest.hpp"

namespace mnid {

struct ClusterSummary {
  std::size_t size = 0;
  std::optional<std::string> verdict;  // "good" / "bad" once judged
};

struct Progress {
  std::string phase;  // oodd, ncd, cqba, train, ppas, final, done
  std::size_t n_new = 0;
  std::vector<ClusterSummary> clusters;
};

using ProgressSink = std::function<void(const Progress&)>;

// B = budget_total if set, else kappa * N with N the corpus class count.
std::size_t budget_for(const RunConfig& cfg, const Corpus& corpus);

// OODD -> NCD -> CQBA -> train -> PPAS -> final training -> test. Uses the
// baseline annotators instead when cfg.baseline is set. Throws
// BudgetInfeasible when B < |D_init|.
PipelineReport run_pipeline(const Corpus& corpus, const EmbeddingMatrix& X, const RunConfig& cfg,
                            Oracle& oracle, const ProgressSink& progress = {});

// Simulated-oracle convenience wrapper.
PipelineReport run_pipeline(const Corpus& corpus, const EmbeddingMatrix& X, const RunConfig& cfg);

// Clusterer bound to the configured algorithm and seed.
Clusterer make_clusterer(const RunConfig& cfg, const EmbeddingMatrix& X);

}  // namespace mnid
