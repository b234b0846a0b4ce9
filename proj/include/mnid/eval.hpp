#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mnid/core.hpp"
#include "mnid/ingest.hpp"
#include "mnid/ood.hpp"

namespace mnid {

inline constexpr int kReportSchemaVersion = 1;

struct Scores {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Macro-F1 averages per-class F1 over the classes present in `gold`.
Scores accuracy_macro_f1(std::span<const ClassId> pred, std::span<const ClassId> gold);

struct McNemar {
  std::size_t b = 0;  // a right, b wrong
  std::size_t c = 0;  // a wrong, b right
  double chi_square = 0.0;
  bool significant = false;  // chi_square > 3.841 (1 dof, p = 0.05)
};

inline constexpr double kChiSquare95 = 3.841;

// Continuity-corrected statistic (max(|b - c| - 1, 0))^2 / (b + c).
McNemar mcnemar_from_counts(std::size_t b, std::size_t c);
McNemar mcnemar(std::span<const ClassId> pred_a, std::span<const ClassId> pred_b,
                std::span<const ClassId> gold);

struct DiscoveryStats {
  std::size_t found = 0;
  std::size_t total_unknown = 0;
  double rate = 0.0;
};

// Unknown-at-start classes carrying at least one non-silver label in L.
DiscoveryStats discovery_rate(const LabeledPool& pool, const ClassVocabulary& vocab);

struct SilverStats {
  std::size_t count = 0;
  std::optional<double> precision;  // absent when there are no silver labels
  double mean_per_class = 0.0;      // over classes holding silver labels
};

SilverStats silver_precision(const LabeledPool& pool, const ClassVocabulary& vocab,
                             const Corpus& corpus);

struct NcdRoundLog {
  std::size_t k = 0;
  std::size_t new_classes = 0;
  std::size_t charged = 0;
};

struct OodSummary {
  std::string method;
  std::size_t pool_size = 0;
  std::size_t flagged = 0;
  std::vector<double> thresholds;
  std::optional<OodConfusion> confusion;
};

struct NcdSummary {
  bool ran = false;
  std::size_t n_new = 0;
  std::size_t stored_clusters = 0;
  std::string exit_reason;
  std::vector<NcdRoundLog> rounds;
};

struct QualitySummary {
  bool ran = false;
  std::size_t good = 0;
  std::size_t bad = 0;
  std::size_t unprobed = 0;
  std::size_t probe_charged = 0;
  std::size_t extra_charged = 0;
};

struct PpasSummary {
  bool ran = false;
  std::size_t silver = 0;
  std::size_t gold = 0;
};

struct ClassCount {
  std::string name;
  bool known_at_start = false;
  std::size_t initial = 0;
  std::size_t annotated = 0;  // gold labels bought during the run
  std::size_t silver = 0;
};

struct StageTiming {
  std::string stage;
  double millis = 0.0;
};

struct PipelineReport {
  nlohmann::ordered_json config;
  std::string mode;  // "mnid" or "baseline"
  std::string variant;
  std::optional<OodSummary> ood;
  NcdSummary ncd;
  QualitySummary quality;
  PpasSummary ppas;
  std::size_t budget_total = 0;
  std::size_t budget_spent = 0;
  std::vector<BudgetEvent> budget_trace;
  DiscoveryStats discovery;
  std::optional<Scores> test_scores;
  std::size_t test_size = 0;
  SilverStats silver;
  std::vector<ClassCount> classes;
  std::vector<std::string> notes;
  std::vector<StageTiming> timing;

  // In-memory only.
  LabeledPool final_pool;
  std::vector<RowIndex> test_rows;
  std::vector<ClassId> test_predictions;
  std::vector<ClassId> test_gold;
};

// The JSON document. Wall-clock data sits under "timing" only.
nlohmann::ordered_json to_json(const PipelineReport& report);
// Same document without "timing", for reproducibility comparisons.
nlohmann::ordered_json without_timing(nlohmann::ordered_json doc);
// Flat metric,value rows.
std::string to_csv(const PipelineReport& report);

// Writes to a sibling temp file then renames, so readers never see a
// partial file. Throws Io.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// Missing or mistyped required members; empty when the document conforms.
std::vector<std::string> check_report_schema(const nlohmann::json& doc);

}  // namespace mnid
