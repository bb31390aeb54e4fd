#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "c3mod/pipeline/pipeline.hpp"
#include "c3mod/serialization.hpp"

namespace httplib {
class Server;
}

namespace c3mod::interface {

inline constexpr const char* kApiSchema = "c3mod-api/1";

enum class ApiErrorCode { Validation, NotFound, Conflict, Provider, Internal };
std::string_view to_string(ApiErrorCode code);

struct ApiError {
  ApiErrorCode code = ApiErrorCode::Internal;
  std::string message;
  int http_status = 500;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  /// Header names lower-cased.
  std::map<std::string, std::string> headers;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  /// Null for 204.
  json body;
};

struct ApiOptions {
  /// reviewer id -> bearer token; empty means open access and reviewers are
  /// registered on first contact.
  std::map<std::string, std::string> reviewer_tokens;
  bool show_llm_verdicts = false;
};

/// Request handling over one run, independent of the transport.
class Api {
 public:
  Api(pipeline::Run& run, ApiOptions options);

  ApiResponse handle(const ApiRequest& request);

 private:
  ApiResponse health() const;
  ApiResponse next_task(const ApiRequest& request);
  ApiResponse submit_vote(const ApiRequest& request);
  ApiResponse sample(const std::string& id) const;
  ApiResponse decisions(const ApiRequest& request) const;
  ApiResponse metrics() const;

  /// Resolves the acting reviewer and checks the bearer token.
  std::string authorize(const ApiRequest& request, const std::string& claimed);
  json task_json(const review::ReviewTask& task) const;

  pipeline::Run& run_;
  ApiOptions options_;
  std::map<std::string, std::string> token_owner_;
};

ApiResponse error_response(const ApiError& error);

/// Serves an Api over HTTP, with console assets under /ui when a directory is
/// given.
class ApiServer {
 public:
  ApiServer(pipeline::Run& run, ApiOptions options,
            std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~ApiServer();

  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void serve(const std::string& host, int port);
  void stop();

 private:
  void install_routes(const std::optional<std::filesystem::path>& ui_dir);

  Api api_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace c3mod::interface
