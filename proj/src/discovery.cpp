#include "mnid/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mnid/error.hpp"
#include "mnid/rng.hpp"

namespace mnid {

std::string_view silver_scope_name(SilverScope s) {
  switch (s) {
    case SilverScope::None: return "none";
    case SilverScope::GoodClustersAll: return "good-clusters-all";
    case SilverScope::GoodClustersHighConf: return "good-clusters-high-conf";
  }
  return "none";
}

std::string_view gold_scope_name(GoldScope g) {
  switch (g) {
    case GoldScope::None: return "none";
    case GoldScope::AnyPointBad: return "any-point-bad";
    case GoldScope::LowConfAny: return "low-conf-any";
    case GoldScope::LowConfBad: return "low-conf-bad";
    case GoldScope::LowConfBadWithFallback: return "low-conf-bad-with-fallback";
  }
  return "none";
}

StrategyVariant strategy_variant(int number) {
  using S = SilverScope;
  using G = GoldScope;
  switch (number) {
    case 1: return {1, S::GoodClustersAll, G::None};
    case 2: return {2, S::GoodClustersAll, G::AnyPointBad};
    case 3: return {3, S::None, G::LowConfAny};
    case 4: return {4, S::GoodClustersHighConf, G::None};
    case 5: return {5, S::GoodClustersHighConf, G::LowConfAny};
    case 6: return {6, S::GoodClustersAll, G::LowConfBad};
    case 7: return {7, S::None, G::LowConfBadWithFallback};
    case 8: return {8, S::GoodClustersAll, G::LowConfBadWithFallback};
    case 9: return {9, S::GoodClustersHighConf, G::LowConfBadWithFallback};
    default: break;
  }
  throw Error(ErrorCode::InvalidConfig, "variant must be in 1..9, got " + std::to_string(number));
}

std::string_view ncd_exit_name(NcdExit e) {
  switch (e) {
    case NcdExit::Guard: return "guard";
    case NcdExit::Budget: return "budget";
    case NcdExit::ClusterLimit: return "cluster-limit";
  }
  return "guard";
}

namespace {

// Unlabeled members of cluster c ordered by distance to its centroid (ties by
// id); `farthest` reverses the distance order.
std::vector<RowIndex> unlabeled_by_distance(const ClusterSet& cs, std::size_t c,
                                            const LabeledPool& pool, const Corpus& corpus,
                                            const EmbeddingMatrix& X, bool farthest) {
  std::vector<std::pair<double, RowIndex>> cand;
  for (RowIndex r : cs.members[c]) {
    if (!pool.contains(r)) cand.emplace_back(squared_distance(cs.centroid(c), X.row(r)), r);
  }
  std::sort(cand.begin(), cand.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return farthest ? a.first > b.first : a.first < b.first;
    return corpus.records[a.second].id < corpus.records[b.second].id;
  });
  std::vector<RowIndex> out;
  out.reserve(cand.size());
  for (const auto& [d, r] : cand) out.push_back(r);
  return out;
}

std::set<ClassId> human_labels(const LabeledPool& pool) {
  std::set<ClassId> out;
  for (const auto& [row, e] : pool.entries()) {
    if (e.provenance != Provenance::Silver) out.insert(e.label);
  }
  return out;
}

}  // namespace

NcdOutcome ncd(std::span<const RowIndex> os, Annotator& annotator, const Corpus& corpus,
               const EmbeddingMatrix& X, std::size_t x, const Clusterer& clusterer,
               const NcdRoundHook& on_round) {
  if (os.empty()) throw Error(ErrorCode::EmptyOodSet, "no out-of-distribution points");
  if (x < 2) throw Error(ErrorCode::InvalidConfig, "x must be at least 2");

  NcdOutcome out;
  std::size_t k = 1;
  while (out.n_new >= k / 2) {
    if (k > os.size()) {
      out.exit = NcdExit::ClusterLimit;
      return out;
    }
    if (x * k > annotator.remaining()) {
      out.exit = NcdExit::Budget;
      return out;
    }
    ClusterSet cs = clusterer(os, k, out.rounds.size());

    std::vector<AnnotationQuery> batch;
    for (std::size_t c = 0; c < cs.k(); ++c) {
      const auto picks = unlabeled_by_distance(cs, c, annotator.pool(), corpus, X, false);
      for (std::size_t i = 0; i < std::min(x, picks.size()); ++i) {
        batch.push_back({picks[i], Phase::Ncd, c});
      }
    }
    const auto seen = human_labels(annotator.pool());
    const auto answered = annotator.annotate(batch);
    std::set<ClassId> fresh;
    for (const auto& a : answered) {
      if (!seen.contains(a.label)) fresh.insert(a.label);
    }

    NcdRound round{k, fresh.size(), batch.size()};
    out.n_new += round.new_classes;
    out.rounds.push_back(round);
    out.clusters = std::move(cs);
    if (on_round) on_round(round, out.n_new);
    k *= 2;
  }
  out.exit = NcdExit::Guard;
  return out;
}

std::size_t ClusterQuality::good_count() const {
  return std::size_t(std::count_if(clusters.begin(), clusters.end(),
                                   [](const auto& v) { return v.verdict == Verdict::Good; }));
}

std::size_t ClusterQuality::bad_count() const { return clusters.size() - good_count(); }

std::size_t ClusterQuality::unprobed_count() const {
  return std::size_t(
      std::count_if(clusters.begin(), clusters.end(), [](const auto& v) { return !v.probed; }));
}

ClusterQuality cqba(const ClusterSet& clusters, Annotator& annotator, const Corpus& corpus,
                    const EmbeddingMatrix& X, std::size_t p, std::size_t q, std::uint64_t seed) {
  if (p == 0) throw Error(ErrorCode::InvalidConfig, "p must be at least 1");
  ClusterQuality out;
  const auto& pool = annotator.pool();
  auto labeled_in = [&](std::size_t c) {
    return std::size_t(std::count_if(clusters.members[c].begin(), clusters.members[c].end(),
                                     [&](RowIndex r) { return pool.contains(r); }));
  };

  // Probe top-up, cut to the budget in cluster order.
  std::vector<AnnotationQuery> batch;
  std::size_t room = annotator.remaining();
  for (std::size_t c = 0; c < clusters.k(); ++c) {
    const std::size_t have = labeled_in(c);
    if (have >= p) continue;
    std::vector<RowIndex> free_rows;
    for (RowIndex r : clusters.members[c]) {
      if (!pool.contains(r)) free_rows.push_back(r);
    }
    const std::size_t take = std::min({p - have, free_rows.size(), room});
    const auto picks =
        sample_without_replacement(free_rows, take, seed, "cqba-probe-" + std::to_string(c));
    for (std::size_t i = 0; i < take; ++i) batch.push_back({picks[i], Phase::Cqba, c});
    room -= take;
  }
  annotator.annotate(batch);
  out.probe_charged = batch.size();

  for (std::size_t c = 0; c < clusters.k(); ++c) {
    ClusterVerdict v;
    std::set<ClassId> labels;
    for (RowIndex r : clusters.members[c]) {
      if (const auto* e = pool.find(r)) {
        labels.insert(e->label);
        ++v.annotated;
      }
    }
    v.probed = v.annotated >= std::min(p, clusters.members[c].size());
    if (v.probed && labels.size() == 1) {
      v.verdict = Verdict::Good;
      v.label = *labels.begin();
    }
    out.clusters.push_back(v);
  }

  // Extra labels in bad clusters.
  batch.clear();
  room = annotator.remaining();
  for (std::size_t c = 0; c < clusters.k() && q > 0; ++c) {
    if (out.clusters[c].verdict != Verdict::Bad) continue;
    const auto picks = unlabeled_by_distance(clusters, c, pool, corpus, X, true);
    const std::size_t take = std::min({q, picks.size(), room});
    for (std::size_t i = 0; i < take; ++i) batch.push_back({picks[i], Phase::Cqba, c});
    room -= take;
    out.clusters[c].annotated += take;
  }
  annotator.annotate(batch);
  out.extra_charged = batch.size();
  return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    ab += double(a[j]) * double(b[j]);
    aa += double(a[j]) * double(a[j]);
    bb += double(b[j]) * double(b[j]);
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

PpasOutcome ppas(Annotator& annotator, const ConfidenceTable& all_cs,
                 const ClusterQuality& quality, const ClusterSet& clusters, const Corpus& corpus,
                 const EmbeddingMatrix& X, const PpasConfig& cfg) {
  PpasOutcome out;
  LabeledPool& pool = annotator.pool();
  const StrategyVariant& v = cfg.variant;

  // Silver. References are the human labels present before the pass.
  if (v.silver != SilverScope::None) {
    const double th = v.silver == SilverScope::GoodClustersAll ? 0.0 : cfg.th;
    std::map<ClassId, std::vector<RowIndex>> refs;
    for (const auto& [row, e] : pool.entries()) {
      if (e.provenance != Provenance::Silver) refs[e.label].push_back(row);
    }
    for (std::size_t c = 0; c < clusters.k(); ++c) {
      const auto& verdict = quality.clusters[c];
      if (verdict.verdict != Verdict::Good) continue;
      const auto ref = refs.find(*verdict.label);
      if (ref == refs.end()) continue;
      for (RowIndex r : clusters.members[c]) {
        if (pool.contains(r)) continue;
        const auto cs = all_cs.find(r);
        if (cs == all_cs.end() || cs->second.confidence < th) continue;
        double sim = 0.0;
        for (RowIndex a : ref->second) sim += cosine(X.row(r), X.row(a));
        sim /= double(ref->second.size());
        if (sim >= cfg.tau) out.silver.push_back(r);
      }
    }
    for (RowIndex r : out.silver) {
      pool.add(r, *quality.clusters[clusters.assignment.at(r)].label, Provenance::Silver);
    }
  }

  if (v.gold == GoldScope::None || annotator.remaining() == 0) return out;

  // Per-cluster queues of eligible points.
  auto queue_for = [&](std::size_t c) {
    std::vector<RowIndex> rows;
    for (RowIndex r : clusters.members[c]) {
      if (!pool.contains(r) && all_cs.contains(r)) rows.push_back(r);
    }
    if (v.gold == GoldScope::AnyPointBad) {
      return sample_without_replacement(rows, rows.size(), cfg.seed, "ppas-any-" + std::to_string(c));
    }
    std::sort(rows.begin(), rows.end(), [&](RowIndex a, RowIndex b) {
      const double ca = all_cs.at(a).confidence;
      const double cb = all_cs.at(b).confidence;
      if (ca != cb) return ca < cb;
      return corpus.records[a].id < corpus.records[b].id;
    });
    return rows;
  };
  auto scope = [&](Verdict want) {
    std::vector<std::size_t> ids;
    for (std::size_t c = 0; c < clusters.k(); ++c) {
      if (quality.clusters[c].verdict == want) ids.push_back(c);
    }
    return ids;
  };

  std::vector<std::vector<std::size_t>> tiers;
  switch (v.gold) {
    case GoldScope::AnyPointBad:
    case GoldScope::LowConfBad: tiers = {scope(Verdict::Bad)}; break;
    case GoldScope::LowConfAny: {
      std::vector<std::size_t> all(clusters.k());
      for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
      tiers = {all};
      break;
    }
    case GoldScope::LowConfBadWithFallback:
      tiers = {scope(Verdict::Bad), scope(Verdict::Good)};
      break;
    case GoldScope::None: break;
  }

  std::size_t room = annotator.remaining();
  std::vector<AnnotationQuery> batch;
  for (const auto& tier : tiers) {
    std::vector<std::vector<RowIndex>> queues;
    for (std::size_t c : tier) queues.push_back(queue_for(c));
    std::vector<std::size_t> head(queues.size(), 0);
    bool progress = true;
    while (room > 0 && progress) {
      progress = false;
      for (std::size_t i = 0; i < queues.size() && room > 0; ++i) {
        if (head[i] >= queues[i].size()) continue;
        batch.push_back({queues[i][head[i]++], Phase::Gold, tier[i]});
        --room;
        progress = true;
      }
    }
  }
  annotator.annotate(batch);
  for (const auto& q : batch) out.gold.push_back(q.row);
  return out;
}

std::vector<RowIndex> sample_without_replacement(std::span<const RowIndex> items, std::size_t k,
                                                 std::uint64_t seed, std::string_view stream) {
  if (k > items.size()) {
    throw Error(ErrorCode::SampleTooLarge, "sample of " + std::to_string(k) + " from " +
                                               std::to_string(items.size()));
  }
  std::vector<RowIndex> v(items.begin(), items.end());
  Rng rng = Rng::stream(seed, stream);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + std::size_t(rng.below(v.size() - i));
    std::swap(v[i], v[j]);
  }
  v.resize(k);
  return v;
}

GoldFewOutcome gold_few(std::span<const RowIndex> pool_rows, Annotator& annotator,
                        const Corpus& corpus, std::size_t f, std::span<const ClassId> new_classes,
                        std::uint64_t seed) {
  GoldFewOutcome out;
  std::vector<AnnotationQuery> batch;
  std::size_t room = annotator.remaining();
  for (ClassId cls : new_classes) {
    std::vector<RowIndex> members;
    for (RowIndex r : pool_rows) {
      const auto& rec = corpus.records.at(r);
      if (!rec.has_gold()) throw Error(ErrorCode::MissingGold, "point " + rec.id);
      if (rec.gold_label == corpus.vocabulary.name(cls) && !annotator.pool().contains(r)) {
        members.push_back(r);
      }
    }
    std::sort(members.begin(), members.end());
    if (members.size() < f) out.shortfalls.push_back({cls, f, members.size()});
    const auto picks = sample_without_replacement(members, std::min(f, members.size()), seed,
                                                  "gold-few-" + corpus.vocabulary.name(cls));
    for (RowIndex r : picks) {
      if (room == 0) {
        out.budget_capped = true;
        break;
      }
      batch.push_back({r, Phase::Gold, std::nullopt});
      --room;
    }
  }
  annotator.annotate(batch);
  for (const auto& q : batch) out.annotated.push_back(q.row);
  return out;
}

std::vector<RowIndex> random_few(std::span<const RowIndex> pool_rows, Annotator& annotator,
                                 std::size_t n, std::uint64_t seed) {
  std::vector<RowIndex> rows(pool_rows.begin(), pool_rows.end());
  std::sort(rows.begin(), rows.end());
  const auto picks = sample_without_replacement(rows, n, seed, "random-few");
  std::vector<AnnotationQuery> batch;
  for (RowIndex r : picks) batch.push_back({r, Phase::Gold, std::nullopt});
  annotator.annotate(batch);
  return picks;
}

}  // namespace mnid
