#include "labelsvc_http.hpp"

#include <nlohmann/json.hpp>

#include "canopy/error.hpp"

namespace canopy::labelsvc {

namespace {

using nlohmann::json;
constexpr const char* kJson = "application/json";

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::Validation:
    case ErrorKind::Parse:
    case ErrorKind::Format: return 400;
    case ErrorKind::InsufficientPoints: return 422;
    default: return 500;
  }
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  res.status = status;
  res.set_content(json{{"schema_version", kSchemaVersion}, {"error", {{"kind", kind}, {"message", message}}}}.dump(),
                  kJson);
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, status_for(e.kind()), std::string(to_string(e.kind())), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "Parse", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "Internal", e.what());
  }
}

}  // namespace

void attach_routes(httplib::Server& server, LabelService& service) {
  server.Get("/clouds", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json clouds = json::array();
      for (const auto& info : service.list_clouds()) clouds.push_back(to_json(info));
      res.set_content(json{{"schema_version", kSchemaVersion}, {"clouds", clouds}}.dump(), kJson);
    });
  });
  server.Get(R"(/clouds/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(to_json(service.serve_cloud(req.matches[1])).dump(), kJson); });
  });
  server.Post("/labels", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto submission = submission_from_json(json::parse(req.body));
      res.set_content(to_json(service.submit(submission)).dump(), kJson);
    });
  });
  server.Get("/dataset/stats", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { res.set_content(to_json(service.stats()).dump(), kJson); });
  });
}

}  // namespace canopy::labelsvc
