#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mnid/classifier.hpp"
#include "mnid/clustering.hpp"
#include "mnid/core.hpp"
#include "mnid/ingest.hpp"

namespace mnid {

enum class SilverScope { None, GoodClustersAll, GoodClustersHighConf };
enum class GoldScope { None, AnyPointBad, LowConfAny, LowConfBad, LowConfBadWithFallback };

std::string_view silver_scope_name(SilverScope s);
std::string_view gold_scope_name(GoldScope g);

struct StrategyVariant {
  int number = 9;
  SilverScope silver = SilverScope::GoodClustersHighConf;
  GoldScope gold = GoldScope::LowConfBadWithFallback;
};

// MNID-1 ... MNID-9. Throws InvalidConfig outside 1..9.
StrategyVariant strategy_variant(int number);

// Clusters `rows` into k groups; `round` numbers the NCD rounds from 0.
using Clusterer =
    std::function<ClusterSet(std::span<const RowIndex> rows, std::size_t k, std::size_t round)>;

enum class NcdExit {
  Guard,         // N_new < floor(K/2)
  Budget,        // x*K exceeded the remaining budget
  ClusterLimit,  // K exceeded |OS|
};

std::string_view ncd_exit_name(NcdExit e);

struct NcdRound {
  std::size_t k = 0;
  std::size_t new_classes = 0;
  std::size_t charged = 0;
};

struct NcdOutcome {
  std::size_t n_new = 0;
  std::vector<NcdRound> rounds;
  // Last executed clustering; empty when no round could run.
  ClusterSet clusters;
  NcdExit exit = NcdExit::Guard;

  bool has_clusters() const { return !rounds.empty(); }
};

using NcdRoundHook = std::function<void(const NcdRound&, std::size_t n_new)>;

// Doubling-K discovery loop over the OOD set. Per cluster it annotates up to
// x unlabeled points nearest the centroid (ties by id). Throws EmptyOodSet.
NcdOutcome ncd(std::span<const RowIndex> os, Annotator& annotator, const Corpus& corpus,
               const EmbeddingMatrix& X, std::size_t x, const Clusterer& clusterer,
               const NcdRoundHook& on_round = {});

enum class Verdict { Good, Bad };

struct ClusterVerdict {
  Verdict verdict = Verdict::Bad;
  std::optional<ClassId> label;  // set for good clusters
  std::size_t annotated = 0;     // labeled members after probing
  bool probed = false;           // reached min(p, size) labeled members
};

struct ClusterQuality {
  std::vector<ClusterVerdict> clusters;
  std::size_t probe_charged = 0;
  std::size_t extra_charged = 0;

  std::size_t good_count() const;
  std::size_t bad_count() const;
  std::size_t unprobed_count() const;
};

// Tops every cluster up to p labeled members with a seeded random draw
// (existing labels count), judges unanimity, then buys q extra labels in each
// bad cluster (farthest from the centroid first). Batches are cut to the
// remaining budget in cluster order.
ClusterQuality cqba(const ClusterSet& clusters, Annotator& annotator, const Corpus& corpus,
                    const EmbeddingMatrix& X, std::size_t p, std::size_t q, std::uint64_t seed);

struct PpasConfig {
  double th = 0.5;
  double tau = 0.8;
  StrategyVariant variant;
  std::uint64_t seed = 0;
};

struct PpasOutcome {
  std::vector<RowIndex> silver;
  std::vector<RowIndex> gold;  // in selection order
};

double cosine(std::span<const float> a, std::span<const float> b);

// Silver pass (free) then one round-robin gold batch sized to the budget.
PpasOutcome ppas(Annotator& annotator, const ConfidenceTable& all_cs,
                 const ClusterQuality& quality, const ClusterSet& clusters, const Corpus& corpus,
                 const EmbeddingMatrix& X, const PpasConfig& cfg);

struct Shortfall {
  ClassId label = 0;
  std::size_t wanted = 0;
  std::size_t available = 0;
};

struct GoldFewOutcome {
  std::vector<RowIndex> annotated;
  std::vector<Shortfall> shortfalls;
  bool budget_capped = false;
};

// F random pool points of each listed class, chosen from corpus gold labels.
GoldFewOutcome gold_few(std::span<const RowIndex> pool_rows, Annotator& annotator,
                        const Corpus& corpus, std::size_t f, std::span<const ClassId> new_classes,
                        std::uint64_t seed);

// n points drawn uniformly without replacement. Throws SampleTooLarge.
std::vector<RowIndex> random_few(std::span<const RowIndex> pool_rows, Annotator& annotator,
                                 std::size_t n, std::uint64_t seed);

// First k entries of a seeded Fisher-Yates shuffle of `items`.
std::vector<RowIndex> sample_without_replacement(std::span<const RowIndex> items, std::size_t k,
                                                 std::uint64_t seed, std::string_view stream);

}  // namespace mnid
