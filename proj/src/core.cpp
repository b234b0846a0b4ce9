#include "mnid/core.hpp"

#include <set>

#include "mnid/error.hpp"

namespace mnid {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Init: return "init";
    case Split::Pool: return "pool";
    case Split::Test: return "test";
  }
  return "pool";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "init") return Split::Init;
  if (s == "pool") return Split::Pool;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

ClassId ClassVocabulary::intern(std::string_view name) {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  const ClassId id = names_.size();
  names_.emplace_back(name);
  known_.push_back(false);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<ClassId> ClassVocabulary::find(std::string_view name) const {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::size_t ClassVocabulary::known_count() const {
  std::size_t n = 0;
  for (bool k : known_) n += k ? 1 : 0;
  return n;
}

BudgetLedger::BudgetLedger(std::size_t total, std::size_t initial_spent)
    : total_(total), spent_(initial_spent) {
  if (initial_spent > total) {
    throw Error(ErrorCode::BudgetInfeasible,
                "budget " + std::to_string(total) + " is smaller than the " +
                    std::to_string(initial_spent) + " initial labels");
  }
  events_.push_back({"initial", initial_spent, spent_});
}

void BudgetLedger::charge(std::size_t n, std::string_view stage) {
  if (n > remaining()) {
    throw Error(ErrorCode::BudgetExhausted, "requested " + std::to_string(n) +
                                                " labels with " +
                                                std::to_string(remaining()) + " remaining");
  }
  spent_ += n;
  events_.push_back({std::string(stage), n, spent_});
}

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Initial: return "initial";
    case Provenance::Ncd: return "ncd";
    case Provenance::Cqba: return "cqba";
    case Provenance::Gold: return "gold";
    case Provenance::Silver: return "silver";
  }
  return "initial";
}

void LabeledPool::add(RowIndex row, ClassId label, Provenance provenance) {
  if (entries_.contains(row)) {
    throw Error(ErrorCode::AlreadyLabeled, "row " + std::to_string(row));
  }
  entries_.emplace(row, LabelEntry{label, provenance});
  if (provenance == Provenance::Silver) ++silver_;
}

const LabelEntry* LabeledPool::find(RowIndex row) const {
  auto it = entries_.find(row);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Ncd: return "ncd";
    case Phase::Cqba: return "cqba";
    case Phase::Gold: return "gold";
  }
  return "gold";
}

Provenance provenance_for(Phase p) {
  switch (p) {
    case Phase::Ncd: return Provenance::Ncd;
    case Phase::Cqba: return Provenance::Cqba;
    case Phase::Gold: return Provenance::Gold;
  }
  return Provenance::Gold;
}

std::vector<std::string> SimulatedOracle::answer(std::span<const AnnotationQuery> queries) {
  std::vector<std::string> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    const auto& rec = records_.at(q.row);
    if (!rec.has_gold()) {
      throw Error(ErrorCode::MissingGold, "point " + rec.id + " has no gold label");
    }
    out.push_back(rec.gold_label);
  }
  return out;
}

std::vector<AnnotatedPoint> Annotator::annotate(std::span<const AnnotationQuery> queries) {
  if (queries.empty()) return {};
  std::set<RowIndex> seen;
  for (const auto& q : queries) {
    if (q.row >= point_count_) {
      throw Error(ErrorCode::UnknownPoint, "row " + std::to_string(q.row));
    }
    if (pool_.contains(q.row) || !seen.insert(q.row).second) {
      throw Error(ErrorCode::AlreadyLabeled, "row " + std::to_string(q.row));
    }
  }
  // Reject before anything is revealed.
  if (queries.size() > ledger_.remaining()) {
    throw Error(ErrorCode::BudgetExhausted,
                "batch of " + std::to_string(queries.size()) + " with " +
                    std::to_string(ledger_.remaining()) + " remaining");
  }

  const auto labels = oracle_.answer(queries);
  if (labels.size() != queries.size()) {
    throw Error(ErrorCode::LengthMismatch, "oracle returned " + std::to_string(labels.size()) +
                                               " labels for " +
                                               std::to_string(queries.size()) + " queries");
  }
  ledger_.charge(queries.size(), phase_name(queries.front().phase));

  std::vector<AnnotatedPoint> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const ClassId label = vocabulary_.intern(labels[i]);
    pool_.add(queries[i].row, label, provenance_for(queries[i].phase));
    out.push_back({queries[i].row, label});
  }
  return out;
}

}  // namespace mnid
