#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mnid/config.hpp"
#include "mnid/core.hpp"
#include "mnid/error.hpp"
#include "mnid/ingest.hpp"
#include "mnid/pipeline.hpp"

namespace httplib {
class Server;
}

namespace mnid {

struct AnnotationRequest {
  std::uint64_t request_id = 0;
  RowIndex row = 0;
  std::string point_id;
  std::string text;
  Phase phase = Phase::Gold;
  std::optional<std::size_t> cluster;
  std::string issued_at;
};

nlohmann::ordered_json to_json(const AnnotationRequest& r);

struct SubmitAck {
  std::uint64_t request_id = 0;
  std::string point_id;
  std::string label;
  std::size_t answered = 0;  // distinct answered requests after this one
};

// Oracle whose answers come from a human through submit(). answer() blocks
// the pipeline worker until every request of the batch is answered.
class LiveOracle final : public Oracle {
 public:
  explicit LiveOracle(const Corpus& corpus) : corpus_(corpus) {}

  std::vector<std::string> answer(std::span<const AnnotationQuery> queries) override;
  std::string_view backend() const override { return "live-queue"; }

  // Open requests in issue order.
  std::vector<AnnotationRequest> open(std::size_t limit) const;
  // Throws UnknownRequest, or DuplicateSubmission when a settled request is
  // answered with a different label. A same-label replay returns the first ack.
  SubmitAck submit(std::uint64_t request_id, const std::string& label);
  bool is_open(std::uint64_t request_id) const;
  std::size_t answered() const;
  // Unblocks answer() with Cancelled.
  void cancel();

 private:
  const Corpus& corpus_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, AnnotationRequest> open_;
  std::map<std::uint64_t, std::string> labels_;  // answers of the current batch
  std::map<std::uint64_t, SubmitAck> acks_;
  bool cancelled_ = false;
};

// Oracle wrapper that counts answered labels, for the simulated backend.
class CountingOracle final : public Oracle {
 public:
  explicit CountingOracle(Oracle& inner) : inner_(inner) {}
  std::vector<std::string> answer(std::span<const AnnotationQuery> queries) override;
  std::string_view backend() const override { return inner_.backend(); }
  std::size_t answered() const;

 private:
  Oracle& inner_;
  mutable std::mutex mu_;
  std::size_t answered_ = 0;
};

struct SessionSpec {
  RunConfig config;
  Corpus corpus;
  EmbeddingMatrix embeddings;
  bool live = true;
  std::optional<std::filesystem::path> report_path;
};

// One pipeline run on a worker thread.
class Session {
 public:
  Session(std::string id, SessionSpec spec);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }
  bool done() const;
  nlohmann::ordered_json state() const;
  nlohmann::ordered_json queue(std::size_t limit) const;
  nlohmann::ordered_json submit(std::uint64_t request_id, const std::string& label);
  nlohmann::ordered_json classes() const;
  // Throws ReportNotReady while running.
  nlohmann::ordered_json report() const;
  // Blocks until the worker finishes.
  void wait() const;

 private:
  void run();
  std::size_t spent_now() const;

  std::string id_;
  SessionSpec spec_;
  std::size_t budget_total_ = 0;
  std::size_t initial_spent_ = 0;
  SimulatedOracle simulated_;
  LiveOracle live_;
  CountingOracle counting_;

  mutable std::mutex mu_;
  mutable std::condition_variable done_cv_;
  Progress progress_;
  bool done_ = false;
  std::optional<std::string> error_;
  std::optional<nlohmann::ordered_json> report_;
  std::vector<std::string> new_classes_;  // submitted names outside the corpus vocabulary
  std::thread worker_;
};

// JSON-over-HTTP front end for a single session.
class AnnotationService {
 public:
  AnnotationService();
  ~AnnotationService();

  // Binds and serves until stop(); port 0 picks a free port (see port()).
  bool bind(const std::string& host, int port);
  void listen();
  void stop();
  int port() const { return port_; }

  Session* session();

 private:
  void routes();

  std::unique_ptr<httplib::Server> server_;
  std::mutex mu_;
  std::unique_ptr<Session> session_;
  std::uint64_t sessions_started_ = 0;
  int port_ = 0;
};

// HTTP status for an error code as served by the annotation API.
int http_status(ErrorCode code);

}  // namespace mnid
