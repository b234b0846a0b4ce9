#include "mnid/pipeline.hpp"

#include <chrono>

#include "mnid/error.hpp"
#include "mnid/ood.hpp"
#include "mnid/rng.hpp"

namespace mnid {

std::size_t budget_for(const RunConfig& cfg, const Corpus& corpus) {
  if (cfg.budget_total) return *cfg.budget_total;
  return cfg.kappa * corpus.vocabulary.size();
}

Clusterer make_clusterer(const RunConfig& cfg, const EmbeddingMatrix& X) {
  if (cfg.clusterer == ClustererKind::Agglomerative) {
    const Linkage linkage = cfg.linkage;
    return [&X, linkage](std::span<const RowIndex> rows, std::size_t k, std::size_t) {
      return agglomerative(rows, X, k, linkage);
    };
  }
  const std::uint64_t seed = cfg.seed;
  const std::size_t restarts = cfg.kmeans_restarts;
  return [&X, seed, restarts](std::span<const RowIndex> rows, std::size_t k, std::size_t round) {
    const std::uint64_t s = Rng::stream(seed, "ncd-kmeans", round).next_u64();
    return kmeans_best_of(rows, X, k, s, restarts);
  };
}

namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}

  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    out_.push_back({stage, std::chrono::duration<double, std::milli>(now - last_).count()});
    last_ = now;
  }

 private:
  std::vector<StageTiming>& out_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::vector<ClusterSummary> summarize(const ClusterSet& cs, const ClusterQuality* quality) {
  std::vector<ClusterSummary> out;
  for (std::size_t c = 0; c < cs.k(); ++c) {
    ClusterSummary s{cs.members[c].size(), std::nullopt};
    if (quality) s.verdict = quality->clusters[c].verdict == Verdict::Good ? "good" : "bad";
    out.push_back(s);
  }
  return out;
}

void finish_report(PipelineReport& report, const Corpus& corpus, const EmbeddingMatrix& X,
                   const RunConfig& cfg, const LabeledPool& pool, const ClassVocabulary& vocab,
                   const BudgetLedger& ledger) {
  const auto model = train(pool, X, cfg.classifier);

  report.test_rows = corpus.rows_in(Split::Test);
  report.test_size = report.test_rows.size();
  const auto table = predict(model, report.test_rows, X);
  ClassVocabulary test_vocab = vocab;
  bool all_gold = !report.test_rows.empty();
  for (RowIndex r : report.test_rows) {
    report.test_predictions.push_back(table.at(r).predicted);
    const auto& rec = corpus.records[r];
    if (!rec.has_gold()) {
      all_gold = false;
      continue;
    }
    // Test-only classes get an id too so they count as misses.
    report.test_gold.push_back(test_vocab.intern(rec.gold_label));
  }
  if (all_gold) {
    report.test_scores = accuracy_macro_f1(report.test_predictions, report.test_gold);
  } else {
    report.test_gold.clear();
    report.notes.push_back("test split lacks gold labels; accuracy not computed");
  }

  report.budget_total = ledger.total();
  report.budget_spent = ledger.spent();
  report.budget_trace = ledger.events();
  report.discovery = discovery_rate(pool, vocab);
  try {
    report.silver = silver_precision(pool, vocab, corpus);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MissingGold) throw;
    report.silver = {};
    report.silver.count = pool.silver_count();
    report.notes.push_back("silver precision needs gold labels; not computed");
  }

  report.classes.clear();
  for (ClassId c = 0; c < vocab.size(); ++c) {
    report.classes.push_back({vocab.name(c), vocab.known_at_start(c), 0, 0, 0});
  }
  for (const auto& [row, e] : pool.entries()) {
    auto& cc = report.classes[e.label];
    switch (e.provenance) {
      case Provenance::Initial: ++cc.initial; break;
      case Provenance::Silver: ++cc.silver; break;
      default: ++cc.annotated; break;
    }
  }
  report.final_pool = pool;
}

}  // namespace

PipelineReport run_pipeline(const Corpus& corpus, const EmbeddingMatrix& X, const RunConfig& cfg,
                            Oracle& oracle, const ProgressSink& progress) {
  validate(cfg);
  if (X.rows != corpus.size()) {
    throw Error(ErrorCode::CountMismatch, std::to_string(X.rows) + " embedding rows for " +
                                              std::to_string(corpus.size()) + " records");
  }
  auto emit = [&](Progress p) {
    if (progress) progress(p);
  };

  PipelineReport report;
  StageClock clock(report.timing);
  report.config = to_json(cfg);

  ClassVocabulary vocab = corpus.vocabulary;
  LabeledPool pool;
  const auto init_rows = corpus.rows_in(Split::Init);
  for (RowIndex r : init_rows) {
    pool.add(r, *vocab.find(corpus.records[r].gold_label), Provenance::Initial);
  }
  const std::size_t total = budget_for(cfg, corpus);
  if (total < init_rows.size()) {
    throw Error(ErrorCode::BudgetInfeasible, "B=" + std::to_string(total) + " is below |D_init|=" +
                                                 std::to_string(init_rows.size()));
  }
  BudgetLedger ledger(total, init_rows.size());
  Annotator annotator(oracle, ledger, pool, vocab, corpus.size());
  const auto pool_rows = corpus.rows_in(Split::Pool);

  if (cfg.baseline != Baseline::None) {
    report.mode = "baseline";
    report.variant = std::string(baseline_name(cfg.baseline));
    if (cfg.baseline == Baseline::GoldFew) {
      std::vector<ClassId> unknown;
      for (ClassId c = 0; c < corpus.vocabulary.size(); ++c) {
        if (!corpus.vocabulary.known_at_start(c)) unknown.push_back(c);
      }
      const auto out = gold_few(pool_rows, annotator, corpus, cfg.kappa, unknown, cfg.seed);
      for (const auto& s : out.shortfalls) {
        report.notes.push_back("shortfall: class " + corpus.vocabulary.name(s.label) + " has " +
                               std::to_string(s.available) + " pool points, wanted " +
                               std::to_string(s.wanted));
      }
      if (out.budget_capped) report.notes.push_back("gold_few selection cut by the budget");
    } else {
      std::size_t n = ledger.remaining();
      if (n > pool_rows.size()) {
        report.notes.push_back("random_few capped at the " + std::to_string(pool_rows.size()) +
                               " pool points, budget allowed " + std::to_string(n));
        n = pool_rows.size();
      }
      random_few(pool_rows, annotator, n, cfg.seed);
    }
    clock.lap("annotate");
    emit({"final", 0, {}});
    finish_report(report, corpus, X, cfg, pool, vocab, ledger);
    clock.lap("final");
    emit({"done", 0, {}});
    return report;
  }

  const StrategyVariant variant = strategy_variant(cfg.variant);
  report.mode = "mnid";
  report.variant = "MNID-" + std::to_string(cfg.variant);

  // OODD
  emit({"oodd", 0, {}});
  LabeledPool init_pool = pool;
  const OodVerdict verdict = oodd(init_pool, pool_rows, X, cfg.ood, cfg.classifier);
  const auto os = verdict.ood_rows();
  OodSummary ood{std::string(ood_method_name(verdict.method)), pool_rows.size(), os.size(),
                 verdict.thresholds, std::nullopt};
  bool pool_gold = true;
  for (RowIndex r : pool_rows) pool_gold = pool_gold && corpus.records[r].has_gold();
  if (pool_gold) ood.confusion = ood_confusion(verdict, corpus);
  report.ood = ood;
  clock.lap("oodd");

  if (os.empty()) {
    report.notes.push_back("OOD detection flagged no pool points; training on D_init only");
    report.ncd.exit_reason = "empty-ood-set";
    emit({"final", 0, {}});
    finish_report(report, corpus, X, cfg, pool, vocab, ledger);
    clock.lap("final");
    emit({"done", 0, {}});
    return report;
  }

  // NCD
  emit({"ncd", 0, {}});
  const auto clusterer = make_clusterer(cfg, X);
  NcdOutcome nc = ncd(os, annotator, corpus, X, cfg.x, clusterer,
                      [&](const NcdRound&, std::size_t n_new) { emit({"ncd", n_new, {}}); });
  report.ncd.ran = true;
  report.ncd.n_new = nc.n_new;
  report.ncd.exit_reason = std::string(ncd_exit_name(nc.exit));
  report.ncd.stored_clusters = nc.has_clusters() ? nc.clusters.k() : 0;
  for (const auto& r : nc.rounds) report.ncd.rounds.push_back({r.k, r.new_classes, r.charged});
  if (nc.exit == NcdExit::Budget) {
    report.notes.push_back("NCD stopped early: next round needs " +
                           std::to_string(cfg.x * (nc.rounds.empty() ? 1 : 2 * nc.rounds.back().k)) +
                           " labels, " + std::to_string(ledger.remaining()) + " remain");
  }
  clock.lap("ncd");

  if (nc.has_clusters()) {
    // CQBA
    emit({"cqba", nc.n_new, summarize(nc.clusters, nullptr)});
    const ClusterQuality quality = cqba(nc.clusters, annotator, corpus, X, cfg.p, cfg.q, cfg.seed);
    report.quality = {true, quality.good_count(), quality.bad_count(), quality.unprobed_count(),
                      quality.probe_charged, quality.extra_charged};
    clock.lap("cqba");

    // Model M and All_CS over unlabeled cluster members.
    emit({"train", nc.n_new, summarize(nc.clusters, &quality)});
    const auto model = train(pool, X, cfg.classifier);
    std::vector<RowIndex> rest;
    for (const auto& members : nc.clusters.members) {
      for (RowIndex r : members) {
        if (!pool.contains(r)) rest.push_back(r);
      }
    }
    const ConfidenceTable all_cs = predict(model, rest, X);
    clock.lap("train");

    // PPAS
    emit({"ppas", nc.n_new, summarize(nc.clusters, &quality)});
    PpasConfig pc{cfg.th, cfg.tau, variant, cfg.seed};
    const PpasOutcome pp = ppas(annotator, all_cs, quality, nc.clusters, corpus, X, pc);
    report.ppas = {true, pp.silver.size(), pp.gold.size()};
    clock.lap("ppas");
  } else {
    report.notes.push_back("no clustering could run within the budget; CQBA and PPAS skipped");
  }

  emit({"final", nc.n_new, {}});
  finish_report(report, corpus, X, cfg, pool, vocab, ledger);
  clock.lap("final");
  emit({"done", nc.n_new, {}});
  return report;
}

PipelineReport run_pipeline(const Corpus& corpus, const EmbeddingMatrix& X, const RunConfig& cfg) {
  SimulatedOracle oracle(corpus.records);
  return run_pipeline(corpus, X, cfg, oracle);
}

}  // namespace mnid
