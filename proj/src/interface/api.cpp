#include "c3mod/interface/api.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cctype>

#include "c3mod/eval/eval.hpp"
#include "c3mod/eval/report.hpp"
#include "c3mod/text.hpp"

namespace c3mod::interface {

std::string_view to_string(ApiErrorCode code) {
  switch (code) {
    case ApiErrorCode::Validation:
      return "validation";
    case ApiErrorCode::NotFound:
      return "not_found";
    case ApiErrorCode::Conflict:
      return "conflict";
    case ApiErrorCode::Provider:
      return "provider";
    case ApiErrorCode::Internal:
      return "internal";
  }
  return "internal";
}

ApiResponse error_response(const ApiError& error) {
  return {error.http_status,
          json{{"schema", kApiSchema}, {"code", to_string(error.code)}, {"message", error.message}}};
}

namespace {

struct Failure {
  ApiError error;
};

[[noreturn]] void fail(ApiErrorCode code, int status, std::string message) {
  throw Failure{{code, std::move(message), status}};
}

ApiResponse ok(json body) {
  body["schema"] = kApiSchema;
  return {200, std::move(body)};
}

std::size_t query_size(const ApiRequest& r, const std::string& key, std::size_t fallback) {
  const auto it = r.query.find(key);
  if (it == r.query.end()) return fallback;
  try {
    if (it->second.empty() || !std::isdigit(static_cast<unsigned char>(it->second.front()))) {
      throw std::invalid_argument(key);
    }
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    fail(ApiErrorCode::Validation, 400, "query parameter '" + key + "' must be a nonnegative integer");
  }
}

}  // namespace

Api::Api(pipeline::Run& run, ApiOptions options) : run_(run), options_(std::move(options)) {
  for (const auto& [reviewer, token] : options_.reviewer_tokens) {
    if (token.empty()) throw ValidationError("reviewer '" + reviewer + "' has an empty token");
    if (!token_owner_.emplace(token, reviewer).second) {
      throw ValidationError("two reviewers share one token");
    }
    run_.review().register_reviewer({reviewer, reviewer, true});
  }
}

std::string Api::authorize(const ApiRequest& request, const std::string& claimed) {
  if (claimed.empty()) fail(ApiErrorCode::Validation, 400, "reviewer id is required");
  if (token_owner_.empty()) {
    if (!run_.review().is_registered(claimed)) run_.review().register_reviewer({claimed, claimed, true});
    return claimed;
  }
  const auto header = request.headers.find("authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (header == request.headers.end() || !header->second.starts_with(prefix)) {
    fail(ApiErrorCode::Validation, 401, "missing bearer token");
  }
  const auto owner = token_owner_.find(header->second.substr(prefix.size()));
  if (owner == token_owner_.end() || owner->second != claimed) {
    fail(ApiErrorCode::Validation, 403, "token does not belong to reviewer '" + claimed + "'");
  }
  return claimed;
}

json Api::task_json(const review::ReviewTask& task) const {
  return review::task_to_json(task, options_.show_llm_verdicts);
}

ApiResponse Api::handle(const ApiRequest& request) {
  try {
    const auto& p = request.path;
    if (request.method == "GET" && p == "/health") return health();
    if (request.method == "GET" && p == "/queue/next") return next_task(request);
    if (request.method == "POST" && p == "/votes") return submit_vote(request);
    if (request.method == "GET" && p.starts_with("/samples/") && p.size() > 9) {
      return sample(p.substr(9));
    }
    if (request.method == "GET" && p == "/decisions") return decisions(request);
    if (request.method == "GET" && p == "/metrics") return metrics();
    fail(ApiErrorCode::NotFound, 404, "no route for " + request.method + " " + p);
  } catch (const Failure& f) {
    return error_response(f.error);
  } catch (const review::UnknownTask& e) {
    return error_response({ApiErrorCode::NotFound, e.what(), 404});
  } catch (const review::UnknownReviewer& e) {
    return error_response({ApiErrorCode::NotFound, e.what(), 404});
  } catch (const review::DuplicateVote& e) {
    return error_response({ApiErrorCode::Conflict, e.what(), 409});
  } catch (const review::TaskFinalized& e) {
    return error_response({ApiErrorCode::Conflict, e.what(), 409});
  } catch (const ValidationError& e) {
    return error_response({ApiErrorCode::Validation, e.what(), 400});
  } catch (const ParseError& e) {
    return error_response({ApiErrorCode::Validation, e.what(), 400});
  } catch (const providers::ProviderError& e) {
    return error_response({ApiErrorCode::Provider, e.what(), 502});
  } catch (const json::exception& e) {
    return error_response({ApiErrorCode::Validation, e.what(), 400});
  } catch (const std::exception& e) {
    spdlog::error("api: {} {}: {}", request.method, request.path, e.what());
    return error_response({ApiErrorCode::Internal, "internal error", 500});
  }
}

ApiResponse Api::health() const {
  return ok({{"status", "ok"}, {"run_id", run_.id()}});
}

ApiResponse Api::next_task(const ApiRequest& request) {
  const auto it = request.query.find("reviewer");
  const auto reviewer = authorize(request, it == request.query.end() ? "" : it->second);
  auto task = run_.review().next_task(reviewer);
  if (!task) return {204, nullptr};
  json body{{"task", task_json(*task)}, {"queue_depth", run_.review().open_count()}};
  return ok(std::move(body));
}

ApiResponse Api::submit_vote(const ApiRequest& request) {
  json body;
  try {
    body = json::parse(request.body);
  } catch (const json::exception&) {
    fail(ApiErrorCode::Validation, 400, "request body is not JSON");
  }
  if (!body.is_object()) fail(ApiErrorCode::Validation, 400, "request body must be an object");
  review::VoteSubmission s;
  s.sample_id = body.value("sample_id", std::string{});
  if (s.sample_id.empty()) fail(ApiErrorCode::Validation, 400, "sample_id is required");
  s.reviewer_id = authorize(request, body.value("reviewer_id", std::string{}));
  if (!body.contains("vote") || !body.at("vote").is_string()) {
    fail(ApiErrorCode::Validation, 400, "vote must be \"OFF\", \"NOT\" or \"UNSURE\"");
  }
  try {
    s.vote = vote_from_string(body.at("vote").get<std::string>());
  } catch (const ParseError&) {
    fail(ApiErrorCode::Validation, 400, "vote must be \"OFF\", \"NOT\" or \"UNSURE\"");
  }
  if (body.contains("spans")) {
    if (!body.at("spans").is_array()) fail(ApiErrorCode::Validation, 400, "spans must be a list");
    for (const auto& span : body.at("spans")) {
      if (!span.is_string()) fail(ApiErrorCode::Validation, 400, "spans must be strings");
      s.spans.push_back(span.get<std::string>());
    }
  }
  if (body.contains("note") && body.at("note").is_string()) s.note = body.at("note").get<std::string>();
  if (const auto key = request.headers.find("idempotency-key"); key != request.headers.end()) {
    s.idempotency_key = key->second;
  }
  const auto task = run_.review().submit_vote(s);
  return ok({{"task", task_json(task)}});
}

ApiResponse Api::sample(const std::string& id) const {
  const auto record = run_.record(id);
  if (!record) {
    const auto& corpus = run_.corpus();
    const auto it = std::find_if(corpus.begin(), corpus.end(), [&](const Sample& s) { return s.id == id; });
    if (it == corpus.end()) fail(ApiErrorCode::NotFound, 404, "unknown sample '" + id + "'");
    return ok({{"sample", *it}, {"annotation", nullptr}, {"task", nullptr}});
  }
  json body{{"sample", record->sample}, {"annotation", record->annotation}};
  const auto task = run_.review().get(id);
  body["task"] = task ? task_json(*task) : json(nullptr);
  if (options_.show_llm_verdicts || !task || review::is_closed(task->state)) {
    body["llm_outcome"] = record->outcome;
  }
  return ok(std::move(body));
}

ApiResponse Api::decisions(const ApiRequest& request) const {
  const auto all = run_.decisions();
  const auto offset = query_size(request, "offset", 0);
  const auto limit = query_size(request, "limit", all.size());
  json list = json::array();
  for (std::size_t i = offset; i < all.size() && list.size() < limit; ++i) list.push_back(all[i]);
  return ok({{"decisions", list}, {"total", all.size()}, {"offset", offset}});
}

ApiResponse Api::metrics() const {
  const auto summary = run_.summary();
  json body{{"summary", pipeline::to_json_value(summary)}};
  if (summary.total > 0) {
    body["workload_reduction"] = eval::format4(eval::workload_ratio(summary.total, summary.escalated));
  }
  try {
    const auto report = eval::accuracy(run_.decisions(), eval::gold_labels(run_.corpus()),
                                       eval::categories(run_.corpus()));
    eval::ReportInputs inputs;
    inputs.accuracy = report;
    body["accuracy"] = eval::render_report(inputs).document.at("accuracy");
  } catch (const ValidationError&) {
    body["accuracy"] = nullptr;
  }
  return ok(std::move(body));
}

ApiServer::ApiServer(pipeline::Run& run, ApiOptions options,
                     std::optional<std::filesystem::path> ui_dir)
    : api_(run, std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes(ui_dir);
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::install_routes(const std::optional<std::filesystem::path>& ui_dir) {
  if (ui_dir && !server_->set_mount_point("/ui", ui_dir->string())) {
    throw ValidationError("console directory " + ui_dir->string() + " does not exist");
  }
  const auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest request;
    request.method = req.method;
    request.path = req.path;
    for (const auto& [k, v] : req.params) request.query.emplace(k, v);
    for (const auto& [k, v] : req.headers) request.headers.emplace(text::to_lower_ascii(k), v);
    request.body = req.body;
    const auto response = api_.handle(request);
    res.status = response.status;
    if (!response.body.is_null()) {
      res.set_content(response.body.dump(-1, ' ', false, json::error_handler_t::replace),
                      "application/json");
    }
  };
  server_->Get("/health", dispatch);
  server_->Get("/queue/next", dispatch);
  server_->Post("/votes", dispatch);
  server_->Get(R"(/samples/(.+))", dispatch);
  server_->Get("/decisions", dispatch);
  server_->Get("/metrics", dispatch);
  server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const auto response = error_response(
        {res.status == 404 ? ApiErrorCode::NotFound : ApiErrorCode::Internal,
         "no route for " + req.method + " " + req.path, res.status});
    res.set_content(response.body.dump(), "application/json");
  });
}

int ApiServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ApiServer::serve(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace c3mod::interface
