#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "mnid/core.hpp"

namespace mnid {

struct Corpus {
  std::vector<UtteranceRecord> records;
  // Built from gold labels in row order; classes seen in the init split are
  // marked known_at_start.
  ClassVocabulary vocabulary;

  std::size_t size() const { return records.size(); }
  std::vector<RowIndex> rows_in(Split split) const;
  // True when every record carries a usable gold label.
  bool fully_labeled() const;
};

// Validates ids and builds the vocabulary.
Corpus make_corpus(std::vector<UtteranceRecord> records);

Corpus parse_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;  // rows * dim, row-major
  bool normalized = false;

  std::span<const float> row(RowIndex i) const { return {values.data() + i * dim, dim}; }
};

// L2-normalizes every row in place. Throws ZeroNormRow.
void normalize_rows(EmbeddingMatrix& m);

// Binary layout: "MNIDEMB1", u32 version (1), u64 count, u32 dim, then
// count*dim float32, all little-endian.
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Corpus& corpus,
                                bool normalize);

struct SyntheticSpec {
  std::size_t n_classes = 20;
  std::size_t n_known = 5;
  std::size_t points_per_class = 100;
  std::size_t dim = 16;
  double center_scale = 1.0;
  double cluster_std = 0.05;
  std::uint64_t seed = 1;
  // Points per known class placed in the init split (kappa).
  std::size_t init_per_class = 10;
  double test_fraction = 0.2;
};

void validate(const SyntheticSpec& spec);

struct SyntheticData {
  Corpus corpus;
  EmbeddingMatrix embeddings;  // raw (not normalized)
};

// Gaussian class blobs. Classes are named "class_00", "class_01", ...; the
// first n_known are known. Row order is a seeded shuffle.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace mnid
