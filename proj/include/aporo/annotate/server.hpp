#pragma once

#include <map>
#include <memory>
#include <string>

#include "aporo/annotate/store.hpp"
#include "aporo/taxonomy/taxonomy.hpp"

namespace aporo::annotate {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ApiOptions {
  /// Served verbatim by GET /guidelines.
  std::string guidelines_path;
  /// Served by GET /taxonomy when set.
  const taxonomy::Catalog* catalog = nullptr;
  /// Include region/topic/month in GET /items/next by default.
  bool show_metadata = false;
};

/// Transport-free request router over an AnnotationStore.
///
///   GET  /items/next?annotator=ID[&meta=1]   200 item | 204 none left
///   POST /items/{id}/label                   {annotator, label, insufficient_context, submission_id}
///   GET  /agreement[?first=A&second=B]
///   GET  /queue
///   POST /items/{id}/adjudicate              {decision: label | "remove", note}
///   GET  /export                             CSV, 409 while items are unresolved
///   GET  /guidelines, GET /taxonomy
class AnnotationApi {
 public:
  AnnotationApi(AnnotationStore& store, ApiOptions options);
  ApiResponse handle(const ApiRequest& request) const;

 private:
  AnnotationStore& store_;
  ApiOptions options_;
  std::string guidelines_;
};

/// HTTP front end (cpp-httplib) for an AnnotationApi.
class HttpServer {
 public:
  /// `static_dir`, when non-empty, is mounted at /ui for the browser client.
  explicit HttpServer(const AnnotationApi& api, const std::string& static_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace aporo::annotate
