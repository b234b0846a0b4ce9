#include "mnid/config.hpp"

#include <fstream>
#include <set>
#include <string>

#include "mnid/error.hpp"

namespace mnid {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view baseline_name(Baseline b) {
  switch (b) {
    case Baseline::None: return "none";
    case Baseline::GoldFew: return "gold_few";
    case Baseline::RandomFew: return "random_few";
  }
  return "none";
}

Baseline parse_baseline(std::string_view name) {
  if (name == "none") return Baseline::None;
  if (name == "gold_few" || name == "gold-few") return Baseline::GoldFew;
  if (name == "random_few" || name == "random-few") return Baseline::RandomFew;
  throw Error(ErrorCode::InvalidConfig, "unknown baseline '" + std::string(name) + "'");
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (c.kappa == 0) fail("kappa must be positive");
  if (c.x < 2) fail("x must be at least 2");
  if (c.p < 1) fail("p must be at least 1");
  if (!(c.th >= 0.0 && c.th <= 1.0)) fail("th must be in [0,1]");
  if (!(c.tau >= -1.0 && c.tau <= 1.0)) fail("tau must be in [-1,1]");
  if (c.variant < 1 || c.variant > 9) fail("variant must be in 1..9");
  if (c.kmeans_restarts == 0) fail("kmeans_restarts must be positive");
  validate(c.ood);
  validate(c.classifier);
}

namespace {

// Typed member access that records which keys were consumed.
class Reader {
 public:
  Reader(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) fail("expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) fail(std::string(key) + " must be a boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) fail(std::string(key) + " must be a non-negative integer");
      } else if constexpr (std::is_same_v<T, int>) {
        if (!it->is_number_integer()) fail(std::string(key) + " must be an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) fail(std::string(key) + " must be a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) fail(std::string(key) + " must be a string");
      }
      out = it->template get<T>();
    } catch (const json::exception& e) {
      fail(std::string(key) + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    return it == doc_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.contains(key)) fail("unknown key '" + key + "'");
    }
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::InvalidConfig, where_ + ": " + why);
  }

 private:
  const json& doc_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_run_fields(Reader& r, RunConfig& c) {
  r.get("seed", c.seed);
  r.get("kappa", c.kappa);
  r.get("x", c.x);
  r.get("p", c.p);
  r.get("q", c.q);
  r.get("th", c.th);
  r.get("tau", c.tau);
  r.get("variant", c.variant);
  r.get("normalize_embeddings", c.normalize_embeddings);
  r.get("kmeans_restarts", c.kmeans_restarts);
  std::string name;
  r.get("baseline", name);
  if (!name.empty()) c.baseline = parse_baseline(name);
  name.clear();
  r.get("clusterer", name);
  if (name == "kmeans") {
    c.clusterer = ClustererKind::KMeans;
  } else if (name == "agglomerative") {
    c.clusterer = ClustererKind::Agglomerative;
  } else if (!name.empty()) {
    r.fail("clusterer must be kmeans or agglomerative");
  }
  name.clear();
  r.get("linkage", name);
  if (!name.empty()) {
    try {
      c.linkage = parse_linkage(name);
    } catch (const Error&) {
      r.fail("linkage must be average or complete");
    }
  }
  if (const json* b = r.child("budget_total")) {
    if (!b->is_number_unsigned()) r.fail("budget_total must be a non-negative integer");
    c.budget_total = b->get<std::size_t>();
  }
  if (const json* o = r.child("ood")) {
    Reader ro(*o, "ood");
    std::string method;
    ro.get("method", method);
    if (!method.empty()) {
      try {
        c.ood.method = parse_ood_method(method);
      } catch (const Error&) {
        ro.fail("method must be msp, doc or proto");
      }
    }
    ro.get("msp_threshold", c.ood.msp_threshold);
    ro.get("doc_floor", c.ood.doc_floor);
    ro.get("proto_margin", c.ood.proto_margin);
    ro.finish();
  }
  if (const json* t = r.child("classifier")) {
    Reader rt(*t, "classifier");
    rt.get("learning_rate", c.classifier.learning_rate);
    rt.get("epochs", c.classifier.epochs);
    rt.get("l2_penalty", c.classifier.l2_penalty);
    rt.get("early_stop_patience", c.classifier.early_stop_patience);
    rt.get("min_delta", c.classifier.min_delta);
    rt.get("seed", c.classifier.seed);
    rt.finish();
  }
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  RunConfig c;
  Reader r(doc, "config");
  read_run_fields(r, c);
  r.finish();
  validate(c);
  return c;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["kappa"] = c.kappa;
  j["x"] = c.x;
  j["p"] = c.p;
  j["q"] = c.q;
  j["th"] = c.th;
  j["tau"] = c.tau;
  j["variant"] = c.variant;
  j["ood"] = {{"method", ood_method_name(c.ood.method)},
              {"msp_threshold", c.ood.msp_threshold},
              {"doc_floor", c.ood.doc_floor},
              {"proto_margin", c.ood.proto_margin}};
  j["clusterer"] = c.clusterer == ClustererKind::KMeans ? "kmeans" : "agglomerative";
  j["linkage"] = linkage_name(c.linkage);
  j["kmeans_restarts"] = c.kmeans_restarts;
  j["classifier"] = {{"learning_rate", c.classifier.learning_rate},
                     {"epochs", c.classifier.epochs},
                     {"l2_penalty", c.classifier.l2_penalty},
                     {"early_stop_patience", c.classifier.early_stop_patience},
                     {"min_delta", c.classifier.min_delta},
                     {"seed", c.classifier.seed}};
  j["normalize_embeddings"] = c.normalize_embeddings;
  j["baseline"] = baseline_name(c.baseline);
  if (c.budget_total) {
    j["budget_total"] = *c.budget_total;
  } else {
    j["budget_total"] = nullptr;
  }
  return j;
}

SyntheticSpec parse_synthetic_spec(const json& doc) {
  SyntheticSpec s;
  Reader r(doc, "synthetic");
  r.get("n_classes", s.n_classes);
  r.get("n_known", s.n_known);
  r.get("points_per_class", s.points_per_class);
  r.get("dim", s.dim);
  r.get("center_scale", s.center_scale);
  r.get("cluster_std", s.cluster_std);
  r.get("seed", s.seed);
  r.get("init_per_class", s.init_per_class);
  r.get("test_fraction", s.test_fraction);
  r.finish();
  return s;
}

ordered_json to_json(const SyntheticSpec& s) {
  return {{"n_classes", s.n_classes},       {"n_known", s.n_known},
          {"points_per_class", s.points_per_class}, {"dim", s.dim},
          {"center_scale", s.center_scale}, {"cluster_std", s.cluster_std},
          {"seed", s.seed},                 {"init_per_class", s.init_per_class},
          {"test_fraction", s.test_fraction}};
}

SweepConfig parse_sweep_config(const json& doc, const std::filesystem::path& base_dir) {
  SweepConfig s;
  Reader r(doc, "config");
  read_run_fields(r, s.run);
  auto path_of = [&](const char* key) -> std::optional<std::filesystem::path> {
    std::string v;
    r.get(key, v);
    if (v.empty()) return std::nullopt;
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };
  s.corpus = path_of("corpus");
  s.embeddings = path_of("embeddings");
  if (const json* syn = r.child("synthetic")) s.synthetic = parse_synthetic_spec(*syn);
  if (const json* g = r.child("grid")) {
    Reader rg(*g, "grid");
    rg.get("p", s.grid_p);
    rg.get("q", s.grid_q);
    rg.finish();
    if (s.grid_p.empty() != s.grid_q.empty()) r.fail("grid needs both p and q lists");
  }
  r.finish();
  validate(s.run);
  if (s.synthetic) {
    if (s.corpus || s.embeddings) r.fail("give either synthetic or corpus/embeddings, not both");
  } else if (s.corpus.has_value() != s.embeddings.has_value()) {
    r.fail("corpus and embeddings must be given together");
  }
  return s;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace mnid
