#include <httplib.h>

#include "shmkb/api.hpp"

namespace shmkb {

using nlohmann::json;

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Runs a handler, mapping errors onto status codes.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", std::string("malformed body: ") + e.what()}});
    } catch (const RequestError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const PositionedError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const DomainError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const NotFoundError& e) {
      reply(res, 404, {{"error", e.what()}});
    } catch (const ConflictError& e) {
      reply(res, 409, {{"error", e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  };
}

json body_of(const httplib::Request& req) {
  auto body = json::parse(req.body);
  if (!body.is_object()) throw RequestError("request body must be a JSON object");
  return body;
}

}  // namespace

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>()) {
  auto& svr = impl_->server;
  Service& s = service;

  svr.Post("/articles", guarded([&s](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    if (!body.contains("id") || !body["id"].is_string() || !body.contains("text") || !body["text"].is_string()) {
      throw RequestError("articles take {\"id\": string, \"text\": string}");
    }
    reply(res, 200, s.ingest(body["id"].get<std::string>(), body["text"].get<std::string>()));
  }));
  svr.Get("/articles", guarded([&s](const httplib::Request&, httplib::Response& res) { reply(res, 200, s.articles()); }));
  svr.Get(R"(/articles/([^/]+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, s.article(req.matches[1]));
  }));
  svr.Post("/teach", guarded([&s](const httplib::Request& req, httplib::Response& res) {
    const auto out = s.teach(body_of(req));
    reply(res, out["outcome"] == "Rejected" ? 422 : 200, out);
  }));
  svr.Post("/unteach", guarded([&s](const httplib::Request& req, httplib::Response& res) {
    s.unteach(body_of(req));
    reply(res, 200, {{"ok", true}});
  }));
  svr.Get("/answer", guarded([&s](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("q")) throw RequestError("missing query parameter q");
    reply(res, 200, to_json(s.answer(req.get_param_value("q"))));
  }));
  svr.Get("/rules", guarded([&s](const httplib::Request&, httplib::Response& res) { reply(res, 200, s.rules()); }));
  svr.Get("/proposals",
          guarded([&s](const httplib::Request&, httplib::Response& res) { reply(res, 200, s.proposals()); }));
  svr.Post(R"(/proposals/(\d+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    if (!body.contains("accept") || !body["accept"].is_boolean()) throw RequestError("missing boolean field \"accept\"");
    s.confirm(std::stoll(req.matches[1]), body["accept"].get<bool>());
    reply(res, 200, {{"ok", true}});
  }));
  svr.Get("/stats", guarded([&s](const httplib::Request&, httplib::Response& res) { reply(res, 200, s.stats()); }));
  svr.Post("/snapshot", guarded([&s](const httplib::Request&, httplib::Response& res) {
    s.snapshot();
    reply(res, 200, {{"ok", true}});
  }));
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) throw DomainError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace shmkb
