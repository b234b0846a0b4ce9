#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "mnid/error.hpp"
#include "mnid/rng.hpp"

using namespace mnid;
using mnid::testing::TempDir;

namespace {

template <class Fn>
Error caught(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an mnid::Error");
  return Error(ErrorCode::Io, "unreachable");
}

std::string line(const std::string& id, const std::string& label, const std::string& split) {
  return R"({"id":")" + id + R"(","text":"t )" + id + R"(","label":")" + label +
         R"(","split":")" + split + "\"}\n";
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Raw embedding file with an arbitrary header.
void write_raw(const std::filesystem::path& p, const char magic[8], std::uint32_t version,
               std::uint64_t count, std::uint32_t dim, const std::vector<float>& values) {
  std::ofstream out(p, std::ios::binary);
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
}

// Mean silhouette over all points, straight from the definition.
double silhouette(const EmbeddingMatrix& X, const std::vector<std::size_t>& label) {
  const std::size_t n = X.rows;
  std::size_t classes = 0;
  for (auto l : label) classes = std::max(classes, l + 1);
  std::vector<std::size_t> sizes(classes, 0);
  for (auto l : label) ++sizes[l];
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(classes, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < X.dim; ++k) {
        const double diff = double(X.row(i)[k]) - double(X.row(j)[k]);
        d += diff * diff;
      }
      sum[label[j]] += std::sqrt(d);
    }
    if (sizes[label[i]] < 2) continue;
    const double a = sum[label[i]] / double(sizes[label[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) {
      if (c != label[i]) b = std::min(b, sum[c] / double(sizes[c]));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / double(n);
}

}  // namespace

TEST_CASE("three-line corpus") {
  std::istringstream in(line("a", "X", "init") + line("b", "Y", "pool") + line("c", "X", "test"));
  const Corpus c = parse_corpus(in);
  CHECK(c.size() == 3);
  CHECK(c.vocabulary.size() == 2);
  CHECK(c.vocabulary.known_count() == 1);
  CHECK(c.records[1].split == Split::Pool);
  CHECK(c.rows_in(Split::Test) == std::vector<RowIndex>{2});
}

TEST_CASE("duplicate id reports the later line") {
  std::string text;
  for (int i = 1; i <= 6; ++i) text += line("u" + std::to_string(i == 1 ? 1 : i + 10), "X", "pool");
  text += line("u1", "Y", "pool");
  std::istringstream in(text);
  const auto e = caught([&] { parse_corpus(in); });
  CHECK(e.code() == ErrorCode::DuplicateId);
  CHECK(std::string(e.what()).find("line 7") != std::string::npos);
}

TEST_CASE("malformed corpus lines") {
  SUBCASE("bad json") {
    std::istringstream in(line("a", "X", "init") + "{not json\n");
    const auto e = caught([&] { parse_corpus(in); });
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  SUBCASE("missing field") {
    std::istringstream in(R"({"id":"a","text":"t","split":"pool"})" "\n");
    CHECK(caught([&] { parse_corpus(in); }).code() == ErrorCode::ParseError);
  }
  SUBCASE("unknown split") {
    std::istringstream in(line("a", "X", "train"));
    CHECK(caught([&] { parse_corpus(in); }).code() == ErrorCode::InvalidSplit);
  }
  SUBCASE("missing file") {
    CHECK(caught([] { load_corpus("/nonexistent/corpus.jsonl"); }).code() == ErrorCode::Io);
  }
}

TEST_CASE("SNIPS-shaped corpus counts classes") {
  std::vector<UtteranceRecord> recs;
  const std::vector<std::string> names{"AddToPlaylist", "BookRestaurant", "GetWeather",
                                       "PlayMusic",     "RateBook",       "SearchCreativeWork",
                                       "SearchScreeningEvent"};
  std::size_t id = 0;
  auto add = [&](std::size_t n, Split s, std::size_t first_class, std::size_t classes) {
    for (std::size_t i = 0; i < n; ++i) {
      recs.push_back({"s" + std::to_string(id++), "t", names[first_class + i % classes], s});
    }
  };
  add(50, Split::Init, 0, 5);
  add(12050, Split::Pool, 0, 7);
  add(2384, Split::Test, 0, 7);
  const Corpus c = make_corpus(std::move(recs));
  CHECK(c.vocabulary.size() == 7);
  CHECK(c.vocabulary.known_count() == 5);
}

TEST_CASE("embedding files") {
  TempDir dir("emb");
  const auto path = dir / "e.bin";
  auto corpus4 = mnid::testing::corpus({"A", "B", "A", "B"},
                                       {Split::Init, Split::Init, Split::Pool, Split::Pool});
  const auto m = mnid::testing::matrix({{1, 0}, {0, 1}, {3, 4}, {0, 0}});
  write_embeddings(path, m);

  SUBCASE("raw load keeps values") {
    const auto loaded = load_embeddings(path, corpus4, false);
    CHECK(loaded.rows == 4);
    CHECK(loaded.dim == 2);
    CHECK(loaded.row(2)[0] == 3.0f);
    CHECK(loaded.row(2)[1] == 4.0f);
  }
  SUBCASE("normalizing a zero row fails on that row") {
    const auto e = caught([&] { load_embeddings(path, corpus4, true); });
    CHECK(e.code() == ErrorCode::ZeroNormRow);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  SUBCASE("count must match the corpus") {
    auto corpus5 = mnid::testing::corpus({"A", "B", "A", "B", "A"},
                                         {Split::Init, Split::Init, Split::Pool, Split::Pool,
                                          Split::Pool});
    CHECK(caught([&] { load_embeddings(path, corpus5, false); }).code() ==
          ErrorCode::CountMismatch);
  }
  SUBCASE("header layout is little-endian and exact") {
    const std::string bytes = read_bytes(path);
    REQUIRE(bytes.size() == 8 + 4 + 8 + 4 + 4 * 2 * 4);
    CHECK(bytes.substr(0, 8) == "MNIDEMB1");
    CHECK(static_cast<unsigned char>(bytes[8]) == 1);
    CHECK(static_cast<unsigned char>(bytes[12]) == 4);
    CHECK(static_cast<unsigned char>(bytes[20]) == 2);
  }
  SUBCASE("bad magic and version") {
    write_raw(dir / "m.bin", "NOTEMB01", 1, 1, 1, {1.0f});
    CHECK(caught([&] { read_embeddings(dir / "m.bin"); }).code() == ErrorCode::BadMagic);
    write_raw(dir / "v.bin", "MNIDEMB1", 2, 1, 1, {1.0f});
    CHECK(caught([&] { read_embeddings(dir / "v.bin"); }).code() == ErrorCode::BadMagic);
  }
  SUBCASE("non-finite values are rejected") {
    write_raw(dir / "n.bin", "MNIDEMB1", 1, 2, 2,
              {1.0f, 0.0f, 0.0f, std::numeric_limits<float>::quiet_NaN()});
    CHECK(caught([&] { read_embeddings(dir / "n.bin"); }).code() == ErrorCode::NonFiniteValue);
  }
  SUBCASE("truncated payload") {
    write_raw(dir / "t.bin", "MNIDEMB1", 1, 3, 2, {1.0f, 0.0f});
    CHECK(caught([&] { read_embeddings(dir / "t.bin"); }).code() == ErrorCode::ParseError);
  }
}

TEST_CASE("embedding round trip is bit-exact") {
  TempDir dir("roundtrip");
  Rng rng(99);
  EmbeddingMatrix m;
  m.rows = 37;
  m.dim = 5;
  for (std::size_t i = 0; i < m.rows * m.dim; ++i) {
    m.values.push_back(static_cast<float>(rng.normal() * 1e3));
  }
  m.values[3] = -0.0f;
  m.values[4] = std::numeric_limits<float>::denorm_min();
  write_embeddings(dir / "r.bin", m);
  const auto back = read_embeddings(dir / "r.bin");
  REQUIRE(back.values.size() == m.values.size());
  CHECK(std::memcmp(back.values.data(), m.values.data(), m.values.size() * sizeof(float)) == 0);
}

TEST_CASE("normalized rows have unit length") {
  auto m = mnid::testing::matrix({{3, 4}, {0, 2}, {-1, 1}});
  normalize_rows(m);
  CHECK(m.normalized);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double n = std::hypot(m.row(i)[0], m.row(i)[1]);
    CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(m.row(0)[0] == doctest::Approx(0.6));
}

TEST_CASE("synthetic generation is deterministic") {
  SyntheticSpec s;
  s.n_classes = 2;
  s.n_known = 1;
  s.points_per_class = 10;
  s.dim = 2;
  s.center_scale = 10;
  s.cluster_std = 0.1;
  s.seed = 7;
  s.init_per_class = 2;
  TempDir dir("synth");
  for (int run = 0; run < 2; ++run) {
    const auto d = generate_synthetic(s);
    write_corpus(dir / ("c" + std::to_string(run)), d.corpus);
    write_embeddings(dir / ("e" + std::to_string(run)), d.embeddings);
  }
  CHECK(read_bytes(dir / "c0") == read_bytes(dir / "c1"));
  CHECK(read_bytes(dir / "e0") == read_bytes(dir / "e1"));
  s.seed = 8;
  const auto other = generate_synthetic(s);
  write_embeddings(dir / "e2", other.embeddings);
  CHECK(read_bytes(dir / "e0") != read_bytes(dir / "e2"));
}

TEST_CASE("invalid synthetic specs") {
  SyntheticSpec s;
  s.n_known = s.n_classes;
  CHECK(caught([&] { generate_synthetic(s); }).code() == ErrorCode::InvalidSpec);
  s = {};
  s.n_known = 0;
  CHECK(caught([&] { validate(s); }).code() == ErrorCode::InvalidSpec);
  s = {};
  s.cluster_std = 0.0;
  CHECK(caught([&] { validate(s); }).code() == ErrorCode::InvalidSpec);
  s = {};
  s.points_per_class = 11;
  CHECK(caught([&] { validate(s); }).code() == ErrorCode::InvalidSpec);
}

TEST_CASE("benchmark corpus shape and gold-partition silhouette") {
  SyntheticSpec s;
  const auto d = generate_synthetic(s);
  CHECK(d.corpus.size() == 2000);
  CHECK(d.corpus.vocabulary.size() == 20);
  CHECK(d.corpus.vocabulary.size() - d.corpus.vocabulary.known_count() == 15);
  std::vector<std::size_t> label;
  for (const auto& r : d.corpus.records) label.push_back(*d.corpus.vocabulary.find(r.gold_label));
  const double sil = silhouette(d.embeddings, label);
  MESSAGE("silhouette " << sil);
  CHECK(sil >= 0.5);
}

TEST_CASE("split partition is exact") {
  SyntheticSpec s;
  s.seed = 3;
  const auto d = generate_synthetic(s);
  const auto& v = d.corpus.vocabulary;
  std::map<std::string, std::map<Split, std::size_t>> per_class;
  for (const auto& r : d.corpus.records) {
    ++per_class[r.gold_label][r.split];
    if (r.split == Split::Init) CHECK(v.known_at_start(*v.find(r.gold_label)));
  }
  const std::size_t test_n = 20;
  for (const auto& [name, counts] : per_class) {
    const bool known = v.known_at_start(*v.find(name));
    CHECK(counts.count(Split::Init) == (known ? 1u : 0u));
    if (known) CHECK(counts.at(Split::Init) == s.init_per_class);
    CHECK(counts.at(Split::Test) == test_n);
    const std::size_t pool = counts.count(Split::Pool) ? counts.at(Split::Pool) : 0;
    CHECK(pool == s.points_per_class - test_n - (known ? s.init_per_class : 0));
  }
  std::set<std::string> ids;
  for (const auto& r : d.corpus.records) ids.insert(r.id);
  CHECK(ids.size() == d.corpus.size());
}

TEST_CASE("corpus write and reload") {
  TempDir dir("corpus");
  auto c = mnid::testing::corpus({"A", "?", "B \"quoted\""}, {Split::Init, Split::Pool, Split::Init});
  write_corpus(dir / "c.jsonl", c);
  const auto back = load_corpus(dir / "c.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back.records[2].gold_label == "B \"quoted\"");
  CHECK_FALSE(back.records[1].has_gold());
  CHECK_FALSE(back.fully_labeled());
}
