#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mnid/classifier.hpp"
#include "mnid/clustering.hpp"
#include "mnid/ingest.hpp"
#include "mnid/ood.hpp"

namespace mnid {

enum class Baseline { None, GoldFew, RandomFew };
enum class ClustererKind { KMeans, Agglomerative };

std::string_view baseline_name(Baseline b);
// Accepts "none", "gold_few"/"gold-few", "random_few"/"random-few".
Baseline parse_baseline(std::string_view name);

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t kappa = 10;
  std::size_t x = 2;
  std::size_t p = 3;
  std::size_t q = 2;
  double th = 0.5;
  double tau = 0.8;
  int variant = 9;
  OodConfig ood;
  ClustererKind clusterer = ClustererKind::KMeans;
  Linkage linkage = Linkage::Average;
  std::size_t kmeans_restarts = 1;
  TrainConfig classifier;
  bool normalize_embeddings = true;
  Baseline baseline = Baseline::None;
  // Overrides B = kappa * N, e.g. for live sessions where N is not known.
  std::optional<std::size_t> budget_total;
};

// Throws InvalidConfig.
void validate(const RunConfig& cfg);

// Missing keys take defaults; unknown keys are rejected (InvalidConfig).
RunConfig parse_run_config(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const RunConfig& cfg);

// Sweep input: a run config plus the data source and an optional (p, q) grid.
struct SweepConfig {
  RunConfig run;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> embeddings;
  std::optional<SyntheticSpec> synthetic;
  std::vector<std::size_t> grid_p;
  std::vector<std::size_t> grid_q;
};

SweepConfig parse_sweep_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

SyntheticSpec parse_synthetic_spec(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const SyntheticSpec& spec);

// Reads and parses a JSON file; ParseError on malformed input, Io when unreadable.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace mnid
