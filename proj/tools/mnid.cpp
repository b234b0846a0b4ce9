// mnid command-line front end. Exit codes: 0 ok, 1 runtime failure,
// 2 invalid spec or config, 3 budget infeasible (B < |D_init|).

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mnid/config.hpp"
#include "mnid/error.hpp"
#include "mnid/eval.hpp"
#include "mnid/ingest.hpp"
#include "mnid/pipeline.hpp"
#include "mnid/service.hpp"

namespace fs = std::filesystem;
using namespace mnid;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitInfeasible = 3;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::BudgetInfeasible: return kExitInfeasible;
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidConfig:
    case ErrorCode::UnknownMethod: return kExitInvalid;
    default: return kExitFailure;
  }
}

int gen_synth(const fs::path& spec_path, const fs::path& out_dir) {
  const SyntheticSpec spec = parse_synthetic_spec(read_json_file(spec_path));
  const auto data = generate_synthetic(spec);
  fs::create_directories(out_dir);
  write_corpus(out_dir / "corpus.jsonl", data.corpus);
  write_embeddings(out_dir / "embeddings.bin", data.embeddings);
  std::cout << "wrote " << data.corpus.size() << " records (" << data.corpus.vocabulary.size()
            << " classes, " << data.corpus.vocabulary.known_count() << " known, dim "
            << data.embeddings.dim << ") to " << out_dir.string() << "\n";
  return 0;
}

int run(const fs::path& config_path, const fs::path& corpus_path, const fs::path& emb_path,
        const fs::path& report_path, const std::string& baseline) {
  RunConfig cfg = parse_run_config(read_json_file(config_path));
  if (!baseline.empty()) cfg.baseline = parse_baseline(baseline);
  const Corpus corpus = load_corpus(corpus_path);
  const EmbeddingMatrix X = load_embeddings(emb_path, corpus, cfg.normalize_embeddings);
  const PipelineReport report = run_pipeline(corpus, X, cfg);
  write_text_atomic(report_path, to_json(report).dump(2) + "\n");

  std::cout << report.variant << ": spent " << report.budget_spent << "/" << report.budget_total
            << ", discovered " << report.discovery.found << "/" << report.discovery.total_unknown;
  if (report.test_scores) {
    std::cout << std::fixed << std::setprecision(4) << ", accuracy " << report.test_scores->accuracy
              << ", macro-F1 " << report.test_scores->macro_f1;
  }
  std::cout << "\n";
  for (const auto& n : report.notes) std::cout << "note: " << n << "\n";
  return 0;
}

// "1..9", "9,random-few", "3,5..7,gold-few".
std::vector<std::string> parse_variants(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(item.substr(0, dots));
      const int hi = std::stoi(item.substr(dots + 2));
      if (lo > hi) throw Error(ErrorCode::InvalidConfig, "empty variant range " + item);
      for (int v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
    } else {
      out.push_back(item);
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "no variants given");
  for (const auto& v : out) {
    if (std::all_of(v.begin(), v.end(), ::isdigit)) {
      strategy_variant(std::stoi(v));
    } else if (parse_baseline(v) == Baseline::None) {
      throw Error(ErrorCode::InvalidConfig, "'none' is not a sweep variant");
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

int sweep(const fs::path& config_path, const std::string& variants_text, std::size_t seeds,
          const fs::path& out_path) {
  const SweepConfig sc =
      parse_sweep_config(read_json_file(config_path), config_path.parent_path());
  if (!sc.synthetic && !sc.corpus) {
    throw Error(ErrorCode::InvalidConfig, "sweep config needs synthetic or corpus/embeddings");
  }
  const auto variants = parse_variants(variants_text);
  if (seeds == 0) throw Error(ErrorCode::InvalidConfig, "--seeds must be positive");

  std::vector<std::pair<std::size_t, std::size_t>> grid;
  if (sc.grid_p.empty()) {
    grid.push_back({sc.run.p, sc.run.q});
  } else {
    for (auto p : sc.grid_p) {
      for (auto q : sc.grid_q) grid.push_back({p, q});
    }
  }

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "variant,seed,p,q,status,accuracy,macro_f1,discovered,total_unknown,discovery_rate,"
         "budget_total,budget_spent,silver_count,silver_precision,message\n";
  std::size_t failures = 0;
  for (std::size_t i = 0; i < seeds; ++i) {
    const std::uint64_t seed = sc.run.seed + i;
    std::optional<Corpus> corpus;
    std::optional<EmbeddingMatrix> X;
    std::string load_error;
    try {
      if (sc.synthetic) {
        SyntheticSpec spec = *sc.synthetic;
        spec.seed += i;
        auto data = generate_synthetic(spec);
        if (sc.run.normalize_embeddings) normalize_rows(data.embeddings);
        corpus = std::move(data.corpus);
        X = std::move(data.embeddings);
      } else {
        corpus = load_corpus(*sc.corpus);
        X = load_embeddings(*sc.embeddings, *corpus, sc.run.normalize_embeddings);
      }
    } catch (const std::exception& e) {
      load_error = e.what();
    }
    for (const auto& v : variants) {
      for (const auto& [p, q] : grid) {
        RunConfig cfg = sc.run;
        cfg.seed = seed;
        cfg.p = p;
        cfg.q = q;
        if (std::all_of(v.begin(), v.end(), ::isdigit)) {
          cfg.variant = std::stoi(v);
          cfg.baseline = Baseline::None;
        } else {
          cfg.baseline = parse_baseline(v);
        }
        csv << csv_field(v) << ',' << seed << ',' << p << ',' << q << ',';
        try {
          if (!corpus) throw std::runtime_error(load_error);
          const auto r = run_pipeline(*corpus, *X, cfg);
          csv << "ok,";
          if (r.test_scores) csv << r.test_scores->accuracy;
          csv << ',';
          if (r.test_scores) csv << r.test_scores->macro_f1;
          csv << ',' << r.discovery.found << ',' << r.discovery.total_unknown << ','
              << r.discovery.rate << ',' << r.budget_total << ',' << r.budget_spent << ','
              << r.silver.count << ',';
          if (r.silver.precision) csv << *r.silver.precision;
          csv << ",\n";
        } catch (const std::exception& e) {
          ++failures;
          csv << "error,,,,,,,,,," << csv_field(e.what()) << '\n';
        }
      }
    }
  }
  write_text_atomic(out_path, csv.str());
  const std::size_t runs = seeds * variants.size() * grid.size();
  std::cout << "sweep: " << runs << " runs, " << failures << " failed, wrote "
            << out_path.string() << "\n";
  return 0;
}

AnnotationService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int serve(const std::string& host, int port) {
  AnnotationService service;
  if (!service.bind(host, port)) {
    std::cerr << "error: cannot bind " << host << ":" << port << "\n";
    return kExitFailure;
  }
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving on http://" << host << ":" << service.port() << std::endl;
  service.listen();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted novel-intent discovery"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic corpus and embeddings");
  gen->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();

  std::string config, corpus, embeddings, report, baseline;
  auto* run_cmd = app.add_subcommand("run", "Run the pipeline or a baseline");
  run_cmd->add_option("--config", config, "Run config JSON")->required();
  run_cmd->add_option("--corpus", corpus, "Corpus JSONL")->required();
  run_cmd->add_option("--embeddings", embeddings, "Embedding binary")->required();
  run_cmd->add_option("--report", report, "Report JSON path")->required();
  run_cmd->add_option("--baseline", baseline, "gold-few or random-few")
      ->check(CLI::IsMember({"gold-few", "random-few", "gold_few", "random_few", "none"}));

  std::string sweep_config, variants = "1..9", sweep_out;
  std::size_t seeds = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run variants over seeds into one CSV");
  sweep_cmd->add_option("--config", sweep_config, "Sweep config JSON")->required();
  sweep_cmd->add_option("--variants", variants, "e.g. 1..9 or 9,random-few");
  sweep_cmd->add_option("--seeds", seeds, "Number of seeds");
  sweep_cmd->add_option("--out", sweep_out, "CSV path")->required();

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the annotation API");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_synth(spec_path, out_dir);
    if (*run_cmd) return run(config, corpus, embeddings, report, baseline);
    if (*sweep_cmd) return sweep(sweep_config, variants, seeds, sweep_out);
    if (*serve_cmd) return serve(host, port);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
