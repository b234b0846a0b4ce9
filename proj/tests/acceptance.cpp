// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mnid/config.hpp"
#include "mnid/discovery.hpp"
#include "mnid/error.hpp"
#include "mnid/eval.hpp"
#include "mnid/pipeline.hpp"
#include "mnid/rng.hpp"
#include "oracles.hpp"

using namespace mnid;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string join(const std::vector<double>& v, int digits) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + fmt(v[i], digits);
  return out;
}

SyntheticData normalized(const SyntheticSpec& spec) {
  auto d = generate_synthetic(spec);
  normalize_rows(d.embeddings);
  return d;
}

// Violations of the NCD loop shape in one report; empty when lawful.
std::string ncd_law_violation(const PipelineReport& r) {
  std::size_t k = 1, cumulative = 0;
  for (const auto& round : r.ncd.rounds) {
    if (round.k != k) return "K sequence broke at " + std::to_string(round.k);
    cumulative += round.new_classes;
    k *= 2;
  }
  if (cumulative != r.ncd.n_new) return "round sum differs from N_new";
  if (r.ncd.exit_reason == "guard" && r.ncd.stored_clusters <= r.ncd.n_new) {
    return "stored " + std::to_string(r.ncd.stored_clusters) + " <= N_new " +
           std::to_string(r.ncd.n_new);
  }
  return {};
}

Outcome budget_fuzz() {
  std::size_t runs = 0, infeasible = 0, violations = 0, law_breaks = 0;
  std::string first_problem;
  for (std::uint64_t seed = 1; runs < 200; ++seed) {
    Rng rng = Rng::stream(seed, "acceptance-fuzz");
    SyntheticSpec s;
    s.n_classes = 4 + rng.below(9);
    s.n_known = 2 + rng.below(std::min<std::uint64_t>(3, s.n_classes - 2));
    s.dim = 2 + rng.below(10);
    s.cluster_std = 0.03 + 0.5 * rng.uniform();
    s.seed = seed;
    RunConfig cfg;
    cfg.seed = seed;
    cfg.kappa = 2 + rng.below(11);
    s.init_per_class = 1 + rng.below(cfg.kappa);
    s.points_per_class = s.init_per_class + 10 + rng.below(30);
    cfg.x = 2 + rng.below(3);
    cfg.p = 1 + rng.below(4);
    cfg.q = rng.below(4);
    cfg.th = rng.uniform();
    cfg.tau = rng.uniform() * 1.2 - 0.2;
    cfg.variant = 1 + int(rng.below(9));
    cfg.ood.method = std::vector<OodMethod>{OodMethod::Msp, OodMethod::Doc, OodMethod::Proto}[rng.below(3)];
    cfg.clusterer = rng.below(4) == 0 ? ClustererKind::Agglomerative : ClustererKind::KMeans;
    cfg.classifier.epochs = 200;
    const auto roll = rng.below(10);
    if (roll == 0) cfg.baseline = Baseline::RandomFew;
    if (roll == 1) cfg.baseline = Baseline::GoldFew;
    if (rng.below(5) == 0) cfg.budget_total = rng.below(200);
    const auto d = normalized(s);
    try {
      const auto r = run_pipeline(d.corpus, d.embeddings, cfg);
      ++runs;
      std::size_t charged = 0;
      bool silver_charged = false;
      for (const auto& e : r.budget_trace) {
        charged += e.charged;
        silver_charged = silver_charged || e.stage == "silver";
      }
      const bool ok = r.final_pool.non_silver_count() <= r.budget_total &&
                      r.final_pool.non_silver_count() == r.budget_spent &&
                      charged == r.budget_spent && !silver_charged &&
                      r.final_pool.silver_count() == r.silver.count;
      if (!ok) {
        ++violations;
        if (first_problem.empty()) first_problem = "seed " + std::to_string(seed);
        std::cerr << "fuzz seed " << seed << ": budget invariant broken" << std::endl;
      }
      if (!ncd_law_violation(r).empty()) ++law_breaks;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BudgetInfeasible) {
        ++violations;
        if (first_problem.empty()) first_problem = e.what();
        std::cerr << "fuzz seed " << seed << ": " << e.what() << std::endl;
      }
      ++infeasible;
    }
  }
  std::string detail = std::to_string(runs) + " runs, " + std::to_string(violations) +
                       " budget violations, " + std::to_string(infeasible) +
                       " infeasible configs rejected, " + std::to_string(law_breaks) +
                       " NCD law breaks";
  if (!first_problem.empty()) detail += " (first: " + first_problem + ")";
  return {violations == 0 && law_breaks == 0 && runs >= 200, detail};
}

Outcome ncd_hand_trace() {
  std::vector<UtteranceRecord> recs;
  std::vector<float> values;
  auto add = [&](const std::string& label, Split split, float a, float b) {
    recs.push_back({"h" + std::to_string(recs.size()), "t", label, split});
    values.insert(values.end(), {a, b});
  };
  add("A", Split::Init, -5, 0);
  add("A", Split::Init, -5, 1);
  add("B", Split::Init, 5, 0);
  add("B", Split::Init, 5, 1);
  Rng rng(4);
  for (int i = 0; i < 12; ++i) add("N", Split::Pool, float(rng.normal() * 0.1), float(10 + rng.normal() * 0.1));
  const Corpus c = make_corpus(recs);
  EmbeddingMatrix X{c.size(), 2, values, false};
  SimulatedOracle oracle(c.records);
  LabeledPool pool;
  for (RowIndex r : c.rows_in(Split::Init)) pool.add(r, *c.vocabulary.find(c.records[r].gold_label), Provenance::Initial);
  ClassVocabulary vocab = c.vocabulary;
  BudgetLedger ledger(100, pool.size());
  Annotator annotator(oracle, ledger, pool, vocab, c.size());
  const auto os = c.rows_in(Split::Pool);
  RunConfig cfg;
  const auto out = ncd(os, annotator, c, X, 2, make_clusterer(cfg, X));
  const std::size_t charged = ledger.spent() - 4;
  return {charged == 6 && out.n_new == 1 && out.clusters.k() == 2,
          "charged " + std::to_string(charged) + ", N_new " + std::to_string(out.n_new) +
              ", |CL| " + std::to_string(out.clusters.k())};
}

Outcome ncd_law_54() {
  std::vector<std::string> lines;
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec s;
    s.n_classes = 59;
    s.n_known = 5;
    s.points_per_class = 50;
    s.seed = seed;
    const auto d = normalized(s);
    RunConfig cfg;
    cfg.seed = seed;
    cfg.budget_total = 100000;
    const auto r = run_pipeline(d.corpus, d.embeddings, cfg);
    const auto law = ncd_law_violation(r);
    ok = ok && law.empty() && r.ncd.stored_clusters == 64 && r.ncd.exit_reason == "guard";
    std::string ks;
    for (const auto& round : r.ncd.rounds) ks += (ks.empty() ? "" : ",") + std::to_string(round.k);
    lines.push_back("seed " + std::to_string(seed) + ": stored " +
                    std::to_string(r.ncd.stored_clusters) + ", N_new " +
                    std::to_string(r.ncd.n_new) + ", K " + ks + (law.empty() ? "" : ", " + law));
  }
  std::string detail;
  for (const auto& l : lines) detail += (detail.empty() ? "" : "; ") + l;
  return {ok, detail};
}

struct BenchmarkRuns {
  // Per seed, per method.
  std::map<std::string, std::vector<PipelineReport>> by_method;
};

BenchmarkRuns run_benchmark() {
  BenchmarkRuns out;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticSpec s;
    s.seed = seed;
    const auto d = normalized(s);
    for (const std::string method : {"MNID-9", "MNID-1", "MNID-3", "random_few"}) {
      RunConfig cfg;
      cfg.seed = seed;
      if (method == "random_few") {
        cfg.baseline = Baseline::RandomFew;
      } else {
        cfg.variant = method.back() - '0';
      }
      out.by_method[method].push_back(run_pipeline(d.corpus, d.embeddings, cfg));
    }
  }
  return out;
}

std::vector<double> accuracies(const std::vector<PipelineReport>& runs) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.test_scores ? r.test_scores->accuracy : 0.0);
  return v;
}

Outcome discovery(const BenchmarkRuns& b) {
  std::vector<double> found;
  for (const auto& r : b.by_method.at("MNID-9")) found.push_back(double(r.discovery.found));
  const double m = median(found);
  return {m >= 14.0, "median " + fmt(m, 1) + " of 15 (per seed: " + join(found, 0) + ")"};
}

Outcome beats_random(const BenchmarkRuns& b) {
  const auto& mnid9 = b.by_method.at("MNID-9");
  const auto& rn = b.by_method.at("random_few");
  const double ma = median(accuracies(mnid9));
  const double mr = median(accuracies(rn));
  std::vector<ClassId> pa, pb, gold;
  for (std::size_t i = 0; i < mnid9.size(); ++i) {
    pa.insert(pa.end(), mnid9[i].test_predictions.begin(), mnid9[i].test_predictions.end());
    pb.insert(pb.end(), rn[i].test_predictions.begin(), rn[i].test_predictions.end());
    gold.insert(gold.end(), mnid9[i].test_gold.begin(), mnid9[i].test_gold.end());
  }
  const auto mc = mcnemar(pa, pb, gold);
  // Significance only counts when MNID-9 is the pair member with more wins.
  const bool mnid_wins = mc.significant && mc.b > mc.c;
  return {ma > mr && mnid_wins,
          "median accuracy MNID-9 " + fmt(ma) + " vs Rn_F " + fmt(mr) + "; McNemar b=" +
              std::to_string(mc.b) + " c=" + std::to_string(mc.c) + " chi2=" +
              fmt(mc.chi_square, 3) +
              (mnid_wins         ? " significant for MNID-9"
               : mc.significant ? " significant for Rn_F"
                                : " not significant") +
              " (MNID-9 per seed: " + join(accuracies(mnid9), 3) + "; Rn_F per seed: " +
              join(accuracies(rn), 3) + ")"};
}

Outcome variant_order(const BenchmarkRuns& b) {
  const double m9 = median(accuracies(b.by_method.at("MNID-9")));
  const double m1 = median(accuracies(b.by_method.at("MNID-1")));
  const double m3 = median(accuracies(b.by_method.at("MNID-3")));
  return {m9 >= m1 && m9 >= m3,
          "median accuracy MNID-9 " + fmt(m9) + ", MNID-1 " + fmt(m1) + ", MNID-3 " + fmt(m3)};
}

Outcome silver(const BenchmarkRuns& b) {
  std::vector<double> precision;
  std::size_t without = 0, total = 0;
  for (const auto& r : b.by_method.at("MNID-9")) {
    total += r.silver.count;
    if (r.silver.precision) {
      precision.push_back(*r.silver.precision);
    } else {
      ++without;
    }
  }
  if (precision.empty()) return {false, "no run produced silver labels"};
  const double m = median(precision);
  return {m >= 0.95, "median precision " + fmt(m) + " over " + std::to_string(precision.size()) +
                         " seeds with silver (" + std::to_string(total) + " silver labels, " +
                         std::to_string(without) + " seeds without)"};
}

Outcome kmeans_oracle() {
  std::size_t hits = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng = Rng::stream(seed, "acceptance-kmeans");
    const std::size_t n = 2 + rng.below(9);
    const std::size_t k = 1 + rng.below(std::min<std::uint64_t>(3, n));
    const std::size_t d = 1 + rng.below(3);
    EmbeddingMatrix X;
    X.rows = n;
    X.dim = d;
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        X.values.push_back(float(rng.normal()));
        pts[i][j] = X.values.back();
      }
    }
    std::vector<RowIndex> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    const double got = kmeans_best_of(rows, X, k, seed, 20).inertia;
    const double opt = oracle::best_partition_inertia(pts, k);
    hits += std::abs(got - opt) <= 1e-6 * std::max(opt, 1e-12) || (opt == 0.0 && got <= 1e-12);
  }
  return {hits >= 95, std::to_string(hits) + "/100 instances at the exhaustive optimum"};
}

Outcome gradient_check() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng = Rng::stream(seed, "acceptance-grad");
    const std::size_t n = 6 + rng.below(10), d = 4, C = 3;
    EmbeddingMatrix X;
    X.rows = n;
    X.dim = d;
    for (std::size_t i = 0; i < n * d; ++i) X.values.push_back(float(rng.normal()));
    SoftmaxModel m;
    m.dim = d;
    m.classes = {0, 1, 2};
    for (std::size_t i = 0; i < C * d; ++i) m.weights.push_back(rng.normal());
    for (std::size_t c = 0; c < C; ++c) m.bias.push_back(rng.normal());
    Batch b{&X, {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
      b.rows.push_back(i);
      b.targets.push_back(rng.below(C));
    }
    worst = std::max(worst, oracle::gradient_gap(m, b, 1e-4 * (1 + rng.below(100))));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", worst);
  return {worst <= 1e-5, std::string("max |analytic - finite difference| = ") + buf +
                             " over 20 instances"};
}

Outcome metric_oracles() {
  std::size_t exact = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng = Rng::stream(seed, "acceptance-metrics");
    const std::size_t n = 1 + rng.below(80), classes = 1 + rng.below(8);
    std::vector<ClassId> pred, gold;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(rng.below(classes));
      pred.push_back(rng.uniform() < 0.5 ? gold.back() : rng.below(classes + 1));
    }
    const auto got = accuracy_macro_f1(pred, gold);
    const auto want = oracle::direct_scores(pred, gold);
    exact += std::abs(got.accuracy - want.accuracy) <= 1e-12 &&
             std::abs(got.macro_f1 - want.macro_f1) <= 1e-12;
  }
  const double a = mcnemar_from_counts(2, 8).chi_square;
  const double b = mcnemar_from_counts(1, 14).chi_square;
  return {exact == 100 && a == 2.5 && b == 9.6,
          std::to_string(exact) + "/100 metric cases exact; chi2(2,8)=" + fmt(a, 6) +
              ", chi2(1,14)=" + fmt(b, 6)};
}

Outcome determinism() {
  SyntheticSpec s;
  s.seed = 21;
  const auto d = normalized(s);
  RunConfig cfg;
  cfg.seed = 21;
  const auto a = without_timing(to_json(run_pipeline(d.corpus, d.embeddings, cfg))).dump(2);
  const auto b = without_timing(to_json(run_pipeline(d.corpus, d.embeddings, cfg))).dump(2);
  return {a == b, std::to_string(a.size()) + "-byte reports " + (a == b ? "identical" : "differ")};
}

}  // namespace

int main() {
  std::size_t failed = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(secs, 1)
              << "s]" << std::endl;
  };

  report("budget safety fuzz", budget_fuzz);
  report("NCD hand trace", ncd_hand_trace);
  report("NCD stored-cluster law at 54 new classes", ncd_law_54);
  std::optional<BenchmarkRuns> bench;
  report("class discovery on the 20-class benchmark", [&] {
    bench = run_benchmark();
    return discovery(*bench);
  });
  auto with_bench = [&](Outcome (*fn)(const BenchmarkRuns&)) {
    return [&bench, fn] {
      if (!bench) return Outcome{false, "benchmark runs unavailable"};
      return fn(*bench);
    };
  };
  report("MNID-9 beats random annotation", with_bench(beats_random));
  report("MNID-9 at least MNID-1 and MNID-3", with_bench(variant_order));
  report("silver precision", with_bench(silver));
  report("k-means exhaustive oracle", kmeans_oracle);
  report("classifier gradient check", gradient_check);
  report("metric oracles", metric_oracles);
  report("determinism", determinism);

  const std::string noun = failed == 1 ? " criterion failed" : " criteria failed";
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + noun)
            << std::endl;
  return failed == 0 ? 0 : 1;
}
