#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mnid/core.hpp"
#include "mnid/ingest.hpp"

namespace mnid::testing {

inline EmbeddingMatrix matrix(const std::vector<std::vector<float>>& rows) {
  EmbeddingMatrix m;
  m.rows = rows.size();
  m.dim = rows.empty() ? 0 : rows.front().size();
  for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
  return m;
}

// Records "p0", "p1", ... with the given labels and splits.
inline Corpus corpus(const std::vector<std::string>& labels, const std::vector<Split>& splits) {
  std::vector<UtteranceRecord> recs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    recs.push_back({"p" + std::to_string(i), "text " + std::to_string(i), labels[i], splits[i]});
  }
  return make_corpus(std::move(recs));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("mnid-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Pool holding the init split of `c`, labeled with its own vocabulary.
inline LabeledPool init_pool(const Corpus& c) {
  LabeledPool pool;
  for (RowIndex r : c.rows_in(Split::Init)) {
    pool.add(r, *c.vocabulary.find(c.records[r].gold_label), Provenance::Initial);
  }
  return pool;
}

}  // namespace mnid::testing
