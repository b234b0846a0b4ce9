#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mnid {

// Row position in the corpus; also the row of the embedding matrix.
using RowIndex = std::size_t;
// Dense index into a ClassVocabulary.
using ClassId = std::size_t;

// Gold label placeholder for points whose label only a human can supply.
inline constexpr std::string_view kUnknownLabel = "?";

enum class Split { Init, Pool, Test };

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view s);

struct UtteranceRecord {
  std::string id;
  std::string text;
  std::string gold_label;
  Split split = Split::Pool;

  bool has_gold() const { return !gold_label.empty() && gold_label != kUnknownLabel; }
};

class ClassVocabulary {
 public:
  // Returns the index for `name`, appending it if unseen.
  ClassId intern(std::string_view name);
  std::optional<ClassId> find(std::string_view name) const;

  const std::string& name(ClassId id) const { return names_.at(id); }
  bool known_at_start(ClassId id) const { return known_.at(id); }
  void mark_known(ClassId id) { known_.at(id) = true; }

  std::size_t size() const { return names_.size(); }
  std::size_t known_count() const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<bool> known_;
  std::unordered_map<std::string, ClassId> index_;
};

struct BudgetEvent {
  std::string stage;
  std::size_t charged = 0;
  std::size_t spent_after = 0;
};

// Gold-label budget. `total` is B and includes |D_init|, which is charged at
// construction.
class BudgetLedger {
 public:
  BudgetLedger(std::size_t total, std::size_t initial_spent);

  std::size_t total() const { return total_; }
  std::size_t spent() const { return spent_; }
  std::size_t remaining() const { return total_ - spent_; }

  // Atomic: either all `n` labels are charged or none (BudgetExhausted).
  void charge(std::size_t n, std::string_view stage);

  const std::vector<BudgetEvent>& events() const { return events_; }

 private:
  std::size_t total_;
  std::size_t spent_;
  std::vector<BudgetEvent> events_;
};

inline std::size_t remaining(const BudgetLedger& ledger) { return ledger.remaining(); }

enum class Provenance { Initial, Ncd, Cqba, Gold, Silver };

std::string_view provenance_name(Provenance p);

struct LabelEntry {
  ClassId label = 0;
  Provenance provenance = Provenance::Initial;
};

// The labeled set L. Keyed by row so iteration order is canonical.
class LabeledPool {
 public:
  void add(RowIndex row, ClassId label, Provenance provenance);

  bool contains(RowIndex row) const { return entries_.contains(row); }
  const LabelEntry* find(RowIndex row) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t silver_count() const { return silver_; }
  std::size_t non_silver_count() const { return entries_.size() - silver_; }

  const std::map<RowIndex, LabelEntry>& entries() const { return entries_; }

 private:
  std::map<RowIndex, LabelEntry> entries_;
  std::size_t silver_ = 0;
};

enum class Phase { Ncd, Cqba, Gold };

std::string_view phase_name(Phase p);
Provenance provenance_for(Phase p);

struct AnnotationQuery {
  RowIndex row = 0;
  Phase phase = Phase::Gold;
  std::optional<std::size_t> cluster;
};

// Backend that turns annotation queries into label strings.
class Oracle {
 public:
  virtual ~Oracle() = default;
  // One answer per query, same order. May block (live backend).
  virtual std::vector<std::string> answer(std::span<const AnnotationQuery> queries) = 0;
  virtual std::string_view backend() const = 0;
};

// Answers from the corpus gold labels.
class SimulatedOracle final : public Oracle {
 public:
  explicit SimulatedOracle(const std::vector<UtteranceRecord>& records) : records_(records) {}

  std::vector<std::string> answer(std::span<const AnnotationQuery> queries) override;
  std::string_view backend() const override { return "simulated-gold"; }

 private:
  const std::vector<UtteranceRecord>& records_;
};

struct AnnotatedPoint {
  RowIndex row = 0;
  ClassId label = 0;
};

// The oracle handle: the only path by which gold labels enter L. Validates a
// batch, charges the ledger, interns returned class names, and records the
// labels in the pool with provenance derived from each query's phase.
class Annotator {
 public:
  Annotator(Oracle& oracle, BudgetLedger& ledger, LabeledPool& pool,
            ClassVocabulary& vocabulary, std::size_t point_count)
      : oracle_(oracle), ledger_(ledger), pool_(pool), vocabulary_(vocabulary),
        point_count_(point_count) {}

  std::vector<AnnotatedPoint> annotate(std::span<const AnnotationQuery> queries);

  std::size_t remaining() const { return ledger_.remaining(); }
  const BudgetLedger& ledger() const { return ledger_; }
  const LabeledPool& pool() const { return pool_; }
  LabeledPool& pool() { return pool_; }
  const ClassVocabulary& vocabulary() const { return vocabulary_; }
  std::string_view backend() const { return oracle_.backend(); }

 private:
  Oracle& oracle_;
  BudgetLedger& ledger_;
  LabeledPool& pool_;
  ClassVocabulary& vocabulary_;
  std::size_t point_count_;
};

}  // namespace mnid
