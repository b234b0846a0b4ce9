#include "mnid/service.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include <httplib.h>

#include "mnid/error.hpp"

namespace mnid {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json ack_json(const SubmitAck& a) {
  return {{"request_id", a.request_id},
          {"point_id", a.point_id},
          {"label", a.label},
          {"answered", a.answered}};
}

}  // namespace

ordered_json to_json(const AnnotationRequest& r) {
  ordered_json j;
  j["request_id"] = r.request_id;
  j["point_id"] = r.point_id;
  j["text"] = r.text;
  j["phase"] = phase_name(r.phase);
  j["cluster_id"] = r.cluster ? ordered_json(*r.cluster) : ordered_json(nullptr);
  j["issued_at"] = r.issued_at;
  return j;
}

std::vector<std::string> LiveOracle::answer(std::span<const AnnotationQuery> queries) {
  std::unique_lock lk(mu_);
  if (cancelled_) throw Error(ErrorCode::Cancelled, "session cancelled");
  std::vector<std::uint64_t> ids;
  const std::string now = utc_now();
  for (const auto& q : queries) {
    const auto& rec = corpus_.records.at(q.row);
    const std::uint64_t id = next_id_++;
    open_[id] = {id, q.row, rec.id, rec.text, q.phase, q.cluster, now};
    ids.push_back(id);
  }
  cv_.wait(lk, [&] {
    return cancelled_ ||
           std::all_of(ids.begin(), ids.end(), [&](auto id) { return labels_.contains(id); });
  });
  if (cancelled_) throw Error(ErrorCode::Cancelled, "session cancelled");
  std::vector<std::string> out;
  for (auto id : ids) {
    out.push_back(labels_.at(id));
    labels_.erase(id);
  }
  return out;
}

std::vector<AnnotationRequest> LiveOracle::open(std::size_t limit) const {
  std::lock_guard lk(mu_);
  std::vector<AnnotationRequest> out;
  for (const auto& [id, r] : open_) {
    if (out.size() >= limit) break;
    out.push_back(r);
  }
  return out;
}

SubmitAck LiveOracle::submit(std::uint64_t request_id, const std::string& label) {
  std::lock_guard lk(mu_);
  if (const auto it = acks_.find(request_id); it != acks_.end()) {
    if (it->second.label == label) return it->second;
    throw Error(ErrorCode::DuplicateSubmission,
                "request " + std::to_string(request_id) + " already answered with '" +
                    it->second.label + "'");
  }
  const auto it = open_.find(request_id);
  if (it == open_.end()) {
    throw Error(ErrorCode::UnknownRequest, "request " + std::to_string(request_id));
  }
  if (label.empty() || label == kUnknownLabel) {
    throw Error(ErrorCode::ParseError, "label must be a class name");
  }
  SubmitAck ack{request_id, it->second.point_id, label, acks_.size() + 1};
  acks_[request_id] = ack;
  labels_[request_id] = label;
  open_.erase(it);
  cv_.notify_all();
  return ack;
}

bool LiveOracle::is_open(std::uint64_t request_id) const {
  std::lock_guard lk(mu_);
  return open_.contains(request_id);
}

std::size_t LiveOracle::answered() const {
  std::lock_guard lk(mu_);
  return acks_.size();
}

void LiveOracle::cancel() {
  std::lock_guard lk(mu_);
  cancelled_ = true;
  cv_.notify_all();
}

std::vector<std::string> CountingOracle::answer(std::span<const AnnotationQuery> queries) {
  auto out = inner_.answer(queries);
  std::lock_guard lk(mu_);
  answered_ += out.size();
  return out;
}

std::size_t CountingOracle::answered() const {
  std::lock_guard lk(mu_);
  return answered_;
}

Session::Session(std::string id, SessionSpec spec)
    : id_(std::move(id)),
      spec_(std::move(spec)),
      simulated_(spec_.corpus.records),
      live_(spec_.corpus),
      counting_(spec_.live ? static_cast<Oracle&>(live_) : static_cast<Oracle&>(simulated_)) {
  validate(spec_.config);
  budget_total_ = budget_for(spec_.config, spec_.corpus);
  initial_spent_ = spec_.corpus.rows_in(Split::Init).size();
  if (budget_total_ < initial_spent_) {
    throw Error(ErrorCode::BudgetInfeasible, "B=" + std::to_string(budget_total_) +
                                                 " is below |D_init|=" +
                                                 std::to_string(initial_spent_));
  }
  progress_.phase = "starting";
  worker_ = std::thread([this] { run(); });
}

Session::~Session() {
  live_.cancel();
  if (worker_.joinable()) worker_.join();
}

void Session::run() {
  std::optional<ordered_json> doc;
  std::optional<std::string> error;
  try {
    auto report = run_pipeline(spec_.corpus, spec_.embeddings, spec_.config, counting_,
                               [this](const Progress& p) {
                                 std::lock_guard lk(mu_);
                                 // Keep the last cluster summary through phases that omit it.
                                 auto clusters = p.clusters.empty() && p.phase != "ncd"
                                                     ? progress_.clusters
                                                     : p.clusters;
                                 progress_ = p;
                                 progress_.clusters = std::move(clusters);
                               });
    doc = to_json(report);
    if (spec_.report_path) write_text_atomic(*spec_.report_path, doc->dump(2) + "\n");
  } catch (const std::exception& e) {
    error = e.what();
  }
  std::lock_guard lk(mu_);
  report_ = std::move(doc);
  error_ = std::move(error);
  done_ = true;
  progress_.phase = error_ ? "failed" : "done";
  done_cv_.notify_all();
}

bool Session::done() const {
  std::lock_guard lk(mu_);
  return done_;
}

void Session::wait() const {
  std::unique_lock lk(mu_);
  done_cv_.wait(lk, [&] { return done_; });
}

std::size_t Session::spent_now() const {
  return initial_spent_ + (spec_.live ? live_.answered() : counting_.answered());
}

ordered_json Session::state() const {
  const std::size_t spent = spent_now();
  std::lock_guard lk(mu_);
  ordered_json j;
  j["session_id"] = id_;
  j["backend"] = spec_.live ? "live-queue" : "simulated-gold";
  j["phase"] = progress_.phase;
  j["budget"] = {{"total", budget_total_},
                 {"spent", spent},
                 {"remaining", budget_total_ - std::min(spent, budget_total_)}};
  j["n_new"] = progress_.n_new;
  ordered_json clusters = ordered_json::array();
  for (const auto& c : progress_.clusters) {
    clusters.push_back({{"size", c.size},
                        {"verdict", c.verdict ? ordered_json(*c.verdict) : ordered_json(nullptr)}});
  }
  j["clusters"] = clusters;
  j["done"] = done_;
  j["error"] = error_ ? ordered_json(*error_) : ordered_json(nullptr);
  j["report"] = report_ ? *report_ : ordered_json(nullptr);
  return j;
}

ordered_json Session::queue(std::size_t limit) const {
  ordered_json list = ordered_json::array();
  if (spec_.live) {
    for (const auto& r : live_.open(limit)) list.push_back(to_json(r));
  }
  return {{"requests", list}};
}

ordered_json Session::submit(std::uint64_t request_id, const std::string& label) {
  if (!spec_.live) throw Error(ErrorCode::UnknownRequest, "simulated sessions take no labels");
  SubmitAck ack;
  try {
    ack = live_.submit(request_id, label);
  } catch (const Error& e) {
    // Nothing open can be answered once the budget is spent.
    if (e.code() == ErrorCode::UnknownRequest && spent_now() >= budget_total_) {
      throw Error(ErrorCode::BudgetExhausted,
                  "no budget left for request " + std::to_string(request_id));
    }
    throw;
  }
  std::lock_guard lk(mu_);
  if (!spec_.corpus.vocabulary.find(label) &&
      std::find(new_classes_.begin(), new_classes_.end(), label) == new_classes_.end()) {
    new_classes_.push_back(label);
  }
  return ack_json(ack);
}

ordered_json Session::classes() const {
  ordered_json list = ordered_json::array();
  for (ClassId c = 0; c < spec_.corpus.vocabulary.size(); ++c) {
    const auto& name = spec_.corpus.vocabulary.name(c);
    list.push_back({{"name", name}, {"known_at_start", spec_.corpus.vocabulary.known_at_start(c)}});
  }
  std::lock_guard lk(mu_);
  for (const auto& name : new_classes_) list.push_back({{"name", name}, {"known_at_start", false}});
  return {{"classes", list}};
}

ordered_json Session::report() const {
  std::lock_guard lk(mu_);
  if (!done_) throw Error(ErrorCode::ReportNotReady, "pipeline still running");
  if (error_) throw Error(ErrorCode::ReportNotReady, "pipeline failed: " + *error_);
  return *report_;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownRequest:
    case ErrorCode::NoSession:
    case ErrorCode::UnknownPoint: return 404;
    case ErrorCode::SessionBusy:
    case ErrorCode::DuplicateSubmission:
    case ErrorCode::ReportNotReady: return 409;
    case ErrorCode::BudgetExhausted: return 402;
    default: return 400;
  }
}

AnnotationService::AnnotationService() : server_(std::make_unique<httplib::Server>()) { routes(); }

AnnotationService::~AnnotationService() {
  stop();
  std::lock_guard lk(mu_);
  session_.reset();
}

bool AnnotationService::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    return port_ > 0;
  }
  port_ = port;
  return server_->bind_to_port(host, port);
}

void AnnotationService::listen() { server_->listen_after_bind(); }

void AnnotationService::stop() {
  if (server_->is_running()) server_->stop();
}

Session* AnnotationService::session() {
  std::lock_guard lk(mu_);
  return session_.get();
}

void AnnotationService::routes() {
  using httplib::Request;
  using httplib::Response;

  auto send = [](Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto fail = [send](Response& res, const Error& e) {
    send(res, http_status(e.code()),
         {{"error", error_name(e.code())}, {"message", e.what()}});
  };
  // Runs `body` against the current session under the service lock.
  auto with_session = [this, fail](Response& res, auto&& body) {
    try {
      std::lock_guard lk(mu_);
      if (!session_) throw Error(ErrorCode::NoSession, "no session started");
      body(*session_);
    } catch (const Error& e) {
      fail(res, e);
    }
  };

  server_->Post("/api/session", [this, send, fail](const Request& req, Response& res) {
    try {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, e.what());
      }
      if (!body.is_object()) throw Error(ErrorCode::ParseError, "body must be an object");
      std::lock_guard lk(mu_);
      if (session_ && !session_->done()) {
        throw Error(ErrorCode::SessionBusy, "session " + session_->id() + " is running");
      }
      auto text = [&](const char* key, bool required) -> std::string {
        if (!body.contains(key)) {
          if (required) throw Error(ErrorCode::InvalidConfig, std::string("missing ") + key);
          return {};
        }
        if (!body[key].is_string()) {
          throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be a string");
        }
        return body[key].get<std::string>();
      };
      SessionSpec spec;
      spec.config = parse_run_config(body.value("config", json::object()));
      spec.corpus = load_corpus(text("corpus", true));
      spec.embeddings =
          load_embeddings(text("embeddings", true), spec.corpus, spec.config.normalize_embeddings);
      const std::string backend = body.contains("backend") ? text("backend", false) : "live-queue";
      if (backend != "live-queue" && backend != "simulated-gold") {
        throw Error(ErrorCode::InvalidConfig, "backend must be live-queue or simulated-gold");
      }
      spec.live = backend == "live-queue";
      if (const auto r = text("report", false); !r.empty()) spec.report_path = r;

      session_.reset();
      const std::string id = "s" + std::to_string(++sessions_started_);
      session_ = std::make_unique<Session>(id, std::move(spec));
      send(res, 201, {{"session_id", id}, {"backend", backend}});
    } catch (const Error& e) {
      fail(res, e);
    }
  });

  server_->Get("/api/state", [with_session, send](const Request&, Response& res) {
    with_session(res, [&](Session& s) { send(res, 200, s.state()); });
  });

  server_->Get("/api/queue", [with_session, send](const Request& req, Response& res) {
    with_session(res, [&](Session& s) {
      std::size_t limit = std::numeric_limits<std::size_t>::max();
      if (req.has_param("limit")) {
        try {
          limit = std::stoull(req.get_param_value("limit"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::ParseError, "limit must be a non-negative integer");
        }
      }
      send(res, 200, s.queue(limit));
    });
  });

  server_->Post("/api/labels", [with_session, send](const Request& req, Response& res) {
    with_session(res, [&](Session& s) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, e.what());
      }
      if (!body.is_object() || !body.contains("request_id") ||
          !body["request_id"].is_number_unsigned() || !body.contains("label") ||
          !body["label"].is_string()) {
        throw Error(ErrorCode::ParseError, "expected {request_id: integer, label: string}");
      }
      send(res, 200, s.submit(body["request_id"].get<std::uint64_t>(), body["label"]));
    });
  });

  server_->Get("/api/classes", [with_session, send](const Request&, Response& res) {
    with_session(res, [&](Session& s) { send(res, 200, s.classes()); });
  });

  server_->Get("/api/report", [with_session, send](const Request&, Response& res) {
    with_session(res, [&](Session& s) { send(res, 200, s.report()); });
  });
}

}  // namespace mnid
