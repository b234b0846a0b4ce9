#include "mnid/ingest.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "mnid/error.hpp"
#include "mnid/rng.hpp"

namespace mnid {

static_assert(std::endian::native == std::endian::little,
              "embedding I/O assumes a little-endian host");

std::vector<RowIndex> Corpus::rows_in(Split split) const {
  std::vector<RowIndex> out;
  for (RowIndex i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(i);
  }
  return out;
}

bool Corpus::fully_labeled() const {
  for (const auto& r : records) {
    if (!r.has_gold()) return false;
  }
  return true;
}

Corpus make_corpus(std::vector<UtteranceRecord> records) {
  Corpus c;
  std::unordered_map<std::string, std::size_t> first_line;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.id.empty()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(i + 1) + ": empty id");
    }
    if (!first_line.emplace(r.id, i + 1).second) {
      throw Error(ErrorCode::DuplicateId,
                  "id '" + r.id + "' repeated at line " + std::to_string(i + 1));
    }
    if (r.has_gold()) {
      const ClassId id = c.vocabulary.intern(r.gold_label);
      if (r.split == Split::Init) c.vocabulary.mark_known(id);
    } else if (r.split == Split::Init) {
      throw Error(ErrorCode::MissingGold,
                  "init record '" + r.id + "' at line " + std::to_string(i + 1) +
                      " needs a gold label");
    }
  }
  c.records = std::move(records);
  return c;
}

Corpus parse_corpus(std::istream& in) {
  std::vector<UtteranceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    auto get = [&](const char* key) -> std::string {
      if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string()) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) +
                                               ": missing string field '" + key + "'");
      }
      return obj[key].get<std::string>();
    };
    UtteranceRecord rec;
    rec.id = get("id");
    rec.text = get("text");
    rec.gold_label = get("label");
    const std::string split = get("split");
    auto parsed = parse_split(split);
    if (!parsed) {
      throw Error(ErrorCode::InvalidSplit,
                  "line " + std::to_string(line_no) + ": split '" + split + "'");
    }
    rec.split = *parsed;
    records.push_back(std::move(rec));
  }
  return make_corpus(std::move(records));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_corpus(in);
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& r : corpus.records) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["text"] = r.text;
    obj["label"] = r.gold_label;
    obj["split"] = split_name(r.split);
    out << obj.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

void normalize_rows(EmbeddingMatrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    float* row = m.values.data() + i * m.dim;
    double sq = 0.0;
    for (std::size_t j = 0; j < m.dim; ++j) sq += double(row[j]) * double(row[j]);
    if (sq == 0.0) throw Error(ErrorCode::ZeroNormRow, "row " + std::to_string(i));
    const double norm = std::sqrt(sq);
    for (std::size_t j = 0; j < m.dim; ++j) row[j] = static_cast<float>(row[j] / norm);
  }
  m.normalized = true;
}

namespace {

constexpr char kMagic[8] = {'M', 'N', 'I', 'D', 'E', 'M', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw Error(ErrorCode::ParseError, "truncated header (" + what + ")");
  }
  return v;
}

}  // namespace

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error(ErrorCode::BadMagic, path.string());
  }
  const auto version = take<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw Error(ErrorCode::BadMagic, "unsupported version " + std::to_string(version));
  }
  EmbeddingMatrix m;
  m.rows = take<std::uint64_t>(in, "count");
  m.dim = take<std::uint32_t>(in, "dim");
  if (m.dim == 0) throw Error(ErrorCode::ParseError, "dim must be positive");
  m.values.resize(m.rows * m.dim);
  if (!in.read(reinterpret_cast<char*>(m.values.data()),
               static_cast<std::streamsize>(m.values.size() * sizeof(float)))) {
    throw Error(ErrorCode::ParseError, "truncated payload in " + path.string());
  }
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    if (!std::isfinite(m.values[i])) {
      throw Error(ErrorCode::NonFiniteValue,
                  "row " + std::to_string(i / m.dim) + ", col " + std::to_string(i % m.dim));
    }
  }
  return m;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(kMagic, 8);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, m.rows);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim));
  out.write(reinterpret_cast<const char*>(m.values.data()),
            static_cast<std::streamsize>(m.values.size() * sizeof(float)));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Corpus& corpus,
                                bool normalize) {
  auto m = read_embeddings(path);
  if (m.rows != corpus.size()) {
    throw Error(ErrorCode::CountMismatch, "embeddings have " + std::to_string(m.rows) +
                                              " rows, corpus has " +
                                              std::to_string(corpus.size()));
  }
  if (normalize) normalize_rows(m);
  return m;
}

void validate(const SyntheticSpec& s) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); };
  if (s.n_known == 0 || s.n_known >= s.n_classes) fail("need 0 < n_known < n_classes");
  if (s.dim == 0) fail("dim must be positive");
  if (!(s.center_scale > 0.0)) fail("center_scale must be positive");
  if (!(s.cluster_std > 0.0)) fail("cluster_std must be positive");
  if (!(s.test_fraction >= 0.0 && s.test_fraction < 1.0)) fail("test_fraction must be in [0,1)");
  if (s.init_per_class == 0) fail("init_per_class must be positive");
  const auto test_n = static_cast<std::size_t>(std::floor(s.test_fraction * double(s.points_per_class)));
  if (s.points_per_class < s.init_per_class + test_n) {
    fail("points_per_class must cover init_per_class plus the test share");
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Rng center_rng = Rng::stream(spec.seed, "synthetic-centers");
  Rng point_rng = Rng::stream(spec.seed, "synthetic-points");
  Rng order_rng = Rng::stream(spec.seed, "synthetic-order");

  std::vector<double> centers(spec.n_classes * spec.dim);
  for (auto& v : centers) v = center_rng.normal() * spec.center_scale;

  const auto test_n =
      static_cast<std::size_t>(std::floor(spec.test_fraction * double(spec.points_per_class)));

  struct Draft {
    std::size_t cls;
    Split split;
    std::vector<float> x;
  };
  std::vector<Draft> drafts;
  drafts.reserve(spec.n_classes * spec.points_per_class);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    const bool known = c < spec.n_known;
    for (std::size_t k = 0; k < spec.points_per_class; ++k) {
      Split split = Split::Pool;
      if (known && k < spec.init_per_class) {
        split = Split::Init;
      } else if (k >= spec.points_per_class - test_n) {
        split = Split::Test;
      }
      std::vector<float> x(spec.dim);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        x[j] = static_cast<float>(centers[c * spec.dim + j] + point_rng.normal() * spec.cluster_std);
      }
      drafts.push_back({c, split, std::move(x)});
    }
  }

  // Fisher-Yates so row position carries no class information.
  std::vector<std::size_t> order(drafts.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[order_rng.below(i)]);
  }

  auto class_name = [](std::size_t c) {
    std::string s = std::to_string(c);
    return "class_" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
  };

  std::vector<UtteranceRecord> records;
  EmbeddingMatrix m;
  m.rows = drafts.size();
  m.dim = spec.dim;
  m.values.reserve(m.rows * m.dim);
  const std::size_t width = std::to_string(drafts.size()).size();
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& d = drafts[order[r]];
    std::string num = std::to_string(r);
    UtteranceRecord rec;
    rec.id = "u" + std::string(width - num.size(), '0') + num;
    rec.text = "synthetic utterance " + std::to_string(order[r]) + " of " + class_name(d.cls);
    rec.gold_label = class_name(d.cls);
    rec.split = d.split;
    records.push_back(std::move(rec));
    m.values.insert(m.values.end(), d.x.begin(), d.x.end());
  }

  return SyntheticData{make_corpus(std::move(records)), std::move(m)};
}

}  // namespace mnid
