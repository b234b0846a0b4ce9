#include "mnid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "mnid/error.hpp"

namespace mnid {

using nlohmann::json;
using nlohmann::ordered_json;

Scores accuracy_macro_f1(std::span<const ClassId> pred, std::span<const ClassId> gold) {
  if (pred.size() != gold.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(pred.size()) + " predictions for " +
                                               std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
  std::map<ClassId, std::size_t> tp, fp, fn;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (pred[i] == gold[i]) {
      ++correct;
      ++tp[gold[i]];
    } else {
      ++fp[pred[i]];
      ++fn[gold[i]];
    }
  }
  std::set<ClassId> present(gold.begin(), gold.end());
  double f1_sum = 0.0;
  for (ClassId c : present) {
    const double t = double(tp[c]);
    const double denom = 2.0 * t + double(fp[c]) + double(fn[c]);
    f1_sum += denom == 0.0 ? 0.0 : 2.0 * t / denom;
  }
  return {double(correct) / double(gold.size()), f1_sum / double(present.size())};
}

McNemar mcnemar_from_counts(std::size_t b, std::size_t c) {
  McNemar m{b, c, 0.0, false};
  if (b + c == 0) return m;
  const double diff = std::max(std::fabs(double(b) - double(c)) - 1.0, 0.0);
  m.chi_square = diff * diff / double(b + c);
  m.significant = m.chi_square > kChiSquare95;
  return m;
}

McNemar mcnemar(std::span<const ClassId> pred_a, std::span<const ClassId> pred_b,
                std::span<const ClassId> gold) {
  if (pred_a.size() != gold.size() || pred_b.size() != gold.size()) {
    throw Error(ErrorCode::LengthMismatch, "prediction and gold lengths differ");
  }
  std::size_t b = 0, c = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool a_ok = pred_a[i] == gold[i];
    const bool b_ok = pred_b[i] == gold[i];
    if (a_ok && !b_ok) ++b;
    if (!a_ok && b_ok) ++c;
  }
  return mcnemar_from_counts(b, c);
}

DiscoveryStats discovery_rate(const LabeledPool& pool, const ClassVocabulary& vocab) {
  DiscoveryStats d;
  std::set<ClassId> found;
  for (const auto& [row, e] : pool.entries()) {
    if (e.provenance != Provenance::Silver && !vocab.known_at_start(e.label)) found.insert(e.label);
  }
  d.found = found.size();
  d.total_unknown = vocab.size() - vocab.known_count();
  d.rate = d.total_unknown == 0 ? 0.0 : double(d.found) / double(d.total_unknown);
  return d;
}

SilverStats silver_precision(const LabeledPool& pool, const ClassVocabulary& vocab,
                             const Corpus& corpus) {
  SilverStats s;
  std::size_t right = 0;
  std::set<ClassId> classes;
  for (const auto& [row, e] : pool.entries()) {
    if (e.provenance != Provenance::Silver) continue;
    const auto& rec = corpus.records.at(row);
    if (!rec.has_gold()) throw Error(ErrorCode::MissingGold, "point " + rec.id);
    ++s.count;
    classes.insert(e.label);
    if (vocab.name(e.label) == rec.gold_label) ++right;
  }
  if (s.count > 0) {
    s.precision = double(right) / double(s.count);
    s.mean_per_class = double(s.count) / double(classes.size());
  }
  return s;
}

namespace {

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

ordered_json to_json(const PipelineReport& r) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["mode"] = r.mode;
  j["variant"] = r.variant;
  j["config"] = r.config;

  if (r.ood) {
    ordered_json o;
    o["method"] = r.ood->method;
    o["pool_size"] = r.ood->pool_size;
    o["flagged"] = r.ood->flagged;
    o["thresholds"] = r.ood->thresholds;
    if (r.ood->confusion) {
      const auto& c = *r.ood->confusion;
      o["confusion"] = {{"tp", c.tp},           {"fp", c.fp},         {"fn", c.fn},
                        {"tn", c.tn},           {"accuracy", c.accuracy}, {"f1_ood", c.f1_ood},
                        {"f1_ind", c.f1_ind},   {"macro_f1", c.macro_f1}};
    } else {
      o["confusion"] = nullptr;
    }
    j["ood"] = o;
  } else {
    j["ood"] = nullptr;
  }

  ordered_json rounds = ordered_json::array();
  for (const auto& rd : r.ncd.rounds) {
    rounds.push_back({{"k", rd.k}, {"new_classes", rd.new_classes}, {"charged", rd.charged}});
  }
  j["ncd"] = {{"ran", r.ncd.ran},
              {"n_new", r.ncd.n_new},
              {"stored_clusters", r.ncd.stored_clusters},
              {"exit", r.ncd.exit_reason},
              {"rounds", rounds}};

  const std::size_t judged = r.quality.good + r.quality.bad;
  auto frac = [&](std::size_t n) {
    return judged == 0 ? ordered_json(nullptr) : ordered_json(double(n) / double(judged));
  };
  j["clusters"] = {{"ran", r.quality.ran},
                   {"good", r.quality.good},
                   {"bad", r.quality.bad},
                   {"unprobed", r.quality.unprobed},
                   {"good_fraction", frac(r.quality.good)},
                   {"bad_fraction", frac(r.quality.bad)},
                   {"probe_charged", r.quality.probe_charged},
                   {"extra_charged", r.quality.extra_charged}};
  j["ppas"] = {{"ran", r.ppas.ran}, {"silver", r.ppas.silver}, {"gold", r.ppas.gold}};

  ordered_json trace = ordered_json::array();
  for (const auto& e : r.budget_trace) {
    trace.push_back({{"stage", e.stage}, {"charged", e.charged}, {"spent_after", e.spent_after}});
  }
  j["budget"] = {{"total", r.budget_total},
                 {"spent", r.budget_spent},
                 {"remaining", r.budget_total - r.budget_spent},
                 {"trace", trace}};

  j["discovery"] = {{"found", r.discovery.found},
                    {"total_unknown", r.discovery.total_unknown},
                    {"rate", r.discovery.rate}};

  ordered_json test;
  test["size"] = r.test_size;
  test["accuracy"] = optional_number(r.test_scores ? std::optional(r.test_scores->accuracy)
                                                   : std::nullopt);
  test["macro_f1"] = optional_number(r.test_scores ? std::optional(r.test_scores->macro_f1)
                                                   : std::nullopt);
  j["test"] = test;

  j["silver"] = {{"count", r.silver.count},
                 {"precision", optional_number(r.silver.precision)},
                 {"mean_per_class", r.silver.mean_per_class}};

  ordered_json classes = ordered_json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"name", c.name},
                       {"known_at_start", c.known_at_start},
                       {"initial", c.initial},
                       {"annotated", c.annotated},
                       {"silver", c.silver}});
  }
  j["classes"] = classes;
  j["mcnemar_continuity_correction"] = true;
  j["notes"] = r.notes;

  ordered_json timing = ordered_json::array();
  for (const auto& t : r.timing) timing.push_back({{"stage", t.stage}, {"millis", t.millis}});
  j["timing"] = timing;
  return j;
}

ordered_json without_timing(ordered_json doc) {
  doc.erase("timing");
  return doc;
}

std::string to_csv(const PipelineReport& r) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "metric,value\n";
  auto row = [&](const std::string& name, const auto& value) { out << name << ',' << value << '\n'; };
  auto opt = [&](const std::string& name, const std::optional<double>& v) {
    out << name << ',';
    if (v) out << *v;
    out << '\n';
  };
  row("schema_version", kReportSchemaVersion);
  row("mode", r.mode);
  row("variant", r.variant);
  row("budget_total", r.budget_total);
  row("budget_spent", r.budget_spent);
  row("ncd_n_new", r.ncd.n_new);
  row("ncd_rounds", r.ncd.rounds.size());
  row("ncd_stored_clusters", r.ncd.stored_clusters);
  row("clusters_good", r.quality.good);
  row("clusters_bad", r.quality.bad);
  row("silver_count", r.silver.count);
  opt("silver_precision", r.silver.precision);
  row("gold_ppas", r.ppas.gold);
  row("discovery_found", r.discovery.found);
  row("discovery_total_unknown", r.discovery.total_unknown);
  row("discovery_rate", r.discovery.rate);
  row("test_size", r.test_size);
  opt("accuracy", r.test_scores ? std::optional(r.test_scores->accuracy) : std::nullopt);
  opt("macro_f1", r.test_scores ? std::optional(r.test_scores->macro_f1) : std::nullopt);
  for (const auto& c : r.classes) row("annotated[" + c.name + "]", c.annotated);
  return out.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::Io, "cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::vector<std::string> check_report_schema(const json& doc) {
  std::vector<std::string> problems;
  auto need = [&](const json& obj, const std::string& path, const char* key,
                  bool (json::*is)() const noexcept, bool nullable = false) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back("missing " + path + key);
      return;
    }
    const json& v = obj.at(key);
    if (nullable && v.is_null()) return;
    if (!(v.*is)()) problems.push_back("bad type at " + path + key);
  };
  if (!doc.is_object()) return {"document is not an object"};
  need(doc, "", "schema_version", &json::is_number_integer);
  if (doc.contains("schema_version") && doc["schema_version"] != kReportSchemaVersion) {
    problems.push_back("unsupported schema_version");
  }
  need(doc, "", "mode", &json::is_string);
  need(doc, "", "variant", &json::is_string);
  need(doc, "", "config", &json::is_object);
  need(doc, "", "ood", &json::is_object, true);
  need(doc, "", "ncd", &json::is_object);
  need(doc, "", "clusters", &json::is_object);
  need(doc, "", "ppas", &json::is_object);
  need(doc, "", "budget", &json::is_object);
  need(doc, "", "discovery", &json::is_object);
  need(doc, "", "test", &json::is_object);
  need(doc, "", "silver", &json::is_object);
  need(doc, "", "classes", &json::is_array);
  need(doc, "", "notes", &json::is_array);
  need(doc, "", "timing", &json::is_array);
  if (!problems.empty()) return problems;

  const json& ncd = doc["ncd"];
  need(ncd, "ncd.", "n_new", &json::is_number_unsigned);
  need(ncd, "ncd.", "stored_clusters", &json::is_number_unsigned);
  need(ncd, "ncd.", "exit", &json::is_string);
  need(ncd, "ncd.", "rounds", &json::is_array);
  const json& budget = doc["budget"];
  need(budget, "budget.", "total", &json::is_number_unsigned);
  need(budget, "budget.", "spent", &json::is_number_unsigned);
  need(budget, "budget.", "trace", &json::is_array);
  const json& disc = doc["discovery"];
  need(disc, "discovery.", "found", &json::is_number_unsigned);
  need(disc, "discovery.", "total_unknown", &json::is_number_unsigned);
  need(disc, "discovery.", "rate", &json::is_number);
  const json& test = doc["test"];
  need(test, "test.", "accuracy", &json::is_number, true);
  need(test, "test.", "macro_f1", &json::is_number, true);
  const json& silver = doc["silver"];
  need(silver, "silver.", "count", &json::is_number_unsigned);
  need(silver, "silver.", "precision", &json::is_number, true);
  const json& clusters = doc["clusters"];
  need(clusters, "clusters.", "good", &json::is_number_unsigned);
  need(clusters, "clusters.", "bad", &json::is_number_unsigned);
  return problems;
}

}  // namespace mnid
