#include "aporo/annotate/server.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>
#include <fmt/format.h>

#include "aporo/common/csv.hpp"

namespace aporo::annotate {

namespace {

ApiResponse json_response(int status, const nlohmann::json& body) {
  return {status, "application/json", body.dump()};
}

ApiResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

int status_for(StoreError::Kind kind) {
  switch (kind) {
    case StoreError::Kind::NotFound:
      return 404;
    case StoreError::Kind::Unauthorized:
      return 403;
    case StoreError::Kind::Conflict:
      return 409;
    case StoreError::Kind::Invalid:
      return 422;
  }
  return 500;
}

std::optional<Label> parse_decision_label(const nlohmann::json& v) {
  if (v.is_null()) return std::nullopt;
  const auto l = label_from_string(v.get<std::string>());
  if (!l) throw StoreError(StoreError::Kind::Invalid, "unknown label " + v.dump());
  return l;
}

}  // namespace

AnnotationApi::AnnotationApi(AnnotationStore& store, ApiOptions options) : store_(store), options_(std::move(options)) {
  if (!options_.guidelines_path.empty()) {
    std::ifstream in(options_.guidelines_path, std::ios::binary);
    if (!in) throw MissingInput("cannot open guidelines " + options_.guidelines_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    guidelines_ = ss.str();
  }
}

ApiResponse AnnotationApi::handle(const ApiRequest& req) const {
  static const std::regex item_route(R"(^/items/([^/]+)/(label|adjudicate)$)");
  try {
    std::smatch m;
    if (req.method == "GET" && req.path == "/items/next") {
      const auto a = req.query.find("annotator");
      if (a == req.query.end() || a->second.empty()) return error_response(400, "annotator is required");
      const auto meta = req.query.find("meta");
      const bool with_meta = meta != req.query.end() ? meta->second == "1" : options_.show_metadata;
      const auto item = store_.next_item(a->second);
      if (!item) return {204, "application/json", ""};
      return json_response(200, to_json(*item, with_meta));
    }
    if (req.method == "POST" && std::regex_match(req.path, m, item_route)) {
      const std::string item_id = m[1];
      const nlohmann::json body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
      if (m[2] == "label") {
        const auto annotator = body.value("annotator", std::string());
        if (annotator.empty()) return error_response(400, "annotator is required");
        const auto label = parse_decision_label(body.value("label", nlohmann::json(nullptr)));
        const auto rec = store_.record_label(item_id, annotator, label, body.value("insufficient_context", false),
                                             body.value("submission_id", std::string()), body.value("round", 0));
        return json_response(200, to_json(rec));
      }
      const auto decision = body.value("decision", std::string());
      if (decision.empty()) return error_response(400, "decision is required");
      std::optional<Label> final_label;
      if (decision != "remove") final_label = parse_decision_label(decision);
      const auto adj = store_.adjudicate(item_id, final_label, body.value("note", std::string()));
      return json_response(200, to_json(adj));
    }
    if (req.method == "GET" && req.path == "/agreement") {
      const auto f = req.query.find("first");
      const auto s = req.query.find("second");
      const AgreementStats stats = (f != req.query.end() && s != req.query.end())
                                       ? store_.agreement(f->second, s->second)
                                       : store_.agreement();
      return json_response(200, stats.to_json());
    }
    if (req.method == "GET" && req.path == "/queue") {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& e : store_.queue()) {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : e.records) recs.push_back(to_json(r));
        out.push_back({{"item_id", e.item_id}, {"records", recs}});
      }
      return json_response(200, out);
    }
    if (req.method == "GET" && req.path == "/export") {
      const auto rows = store_.export_rows();
      std::ostringstream out;
      csv::write_row(out, {"id", "text", "region", "topic_id", "month", "created_at", "label"});
      for (const auto& r : rows) {
        csv::write_row(out, {r.id, r.text, r.region ? std::string(to_string(*r.region)) : "",
                             r.topic_id ? std::to_string(*r.topic_id) : "", r.month ? std::to_string(*r.month) : "",
                             r.created_at ? format_timestamp(*r.created_at) : "", std::string(to_string(r.label))});
      }
      return {200, "text/csv", out.str()};
    }
    if (req.method == "GET" && req.path == "/guidelines") {
      if (options_.guidelines_path.empty()) return error_response(404, "no guidelines configured");
      return {200, "text/markdown; charset=utf-8", guidelines_};
    }
    if (req.method == "GET" && req.path == "/taxonomy") {
      if (!options_.catalog) return error_response(404, "no catalog configured");
      nlohmann::json out = nlohmann::json::array();
      for (const auto& c : options_.catalog->categories()) {
        out.push_back({{"id", c.id}, {"degree", std::string(taxonomy::to_string(c.degree))}, {"description", c.description}});
      }
      return json_response(200, out);
    }
    return error_response(404, "no route for " + req.method + " " + req.path);
  } catch (const StoreError& e) {
    return error_response(status_for(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, std::string("bad request body: ") + e.what());
  } catch (const ContractViolation& e) {
    return error_response(422, e.what());
  }
}

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(const AnnotationApi& api, const std::string& static_dir) : impl_(std::make_unique<Impl>()) {
  auto forward = [&api](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    const ApiResponse out = api.handle(r);
    res.status = out.status;
    if (!out.body.empty()) res.set_content(out.body, out.content_type.c_str());
  };
  if (!static_dir.empty() && !impl_->server.set_mount_point("/ui", static_dir)) {
    throw MissingInput("static directory not found: " + static_dir);
  }
  impl_->server.Get(R"(/(items|agreement|queue|export|guidelines|taxonomy).*)", forward);
  impl_->server.Post(R"(/items/.*)", forward);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error(fmt::format("cannot bind {}:{}", host, port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace aporo::annotate
