#include "noisygate/http_server.hpp"

#include <functional>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "noisygate/format.hpp"

namespace noisygate::service {

namespace {

using json = nlohmann::ordered_json;

json to_json(const Session& s, const AssessmentModel& model) {
  json history = json::array();
  for (const auto& a : s.history) {
    history.push_back({{"gate_id", a.gate_id},
                       {"answer", a.correct ? "yes" : "no"},
                       {"answered_at", a.answered_at}});
  }
  json posteriors = json::array();
  for (std::size_t i = 0; i < s.posteriors.size(); ++i) {
    const auto& p = s.posteriors[i];
    posteriors.push_back({{"skill_id", p.skill_id},
                          {"name", model.skills[i].name},
                          {"posterior_true", p.posterior_true},
                          {"absorbed_count", p.absorbed_count},
                          {"joint_count", p.joint_count}});
  }
  json out{{"session_id", s.id},
           {"model_id", s.model_id},
           {"status", std::string(to_string(s.status))},
           {"created_at", s.created_at},
           {"history", std::move(history)},
           {"posteriors", std::move(posteriors)}};
  out["suggested_next"] = s.suggested_next ? json(*s.suggested_next) : json(nullptr);
  return out;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                const std::string& message, const std::vector<std::string>* gates = nullptr) {
  json err{{"code", code}, {"message", message}};
  if (gates) err["gates"] = *gates;
  send_json(res, status, json{{"error", std::move(err)}});
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw BadRequestError("request body must be a JSON object");
  }
  return body;
}

std::string string_field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw BadRequestError(std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

// Maps library errors onto HTTP statuses.
Handler guarded(Handler inner) {
  return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
    try {
      inner(req, res);
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, "conflict", e.what());
    } catch (const InconsistentEvidenceError& e) {
      send_error(res, 422, "inconsistent_evidence", e.what(), &e.gates());
    } catch (const BadRequestError& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const CapacityError& e) {
      send_error(res, 422, "capacity", e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  SessionService& service;
  HttpOptions options;
  httplib::Server server;
  bool bound = false;

  Impl(SessionService& s, HttpOptions o) : service(s), options(std::move(o)) {}

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });

    server.Get("/models", guarded([this](const httplib::Request&, httplib::Response& res) {
      json models = json::array();
      for (const auto& m : service.list_models()) {
        models.push_back({{"id", m.id},
                          {"name", m.name},
                          {"version", m.version},
                          {"skills", m.skill_count},
                          {"gates", m.gate_count}});
      }
      send_json(res, 200, json{{"models", std::move(models)}});
    }));

    server.Get(R"(/models/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto model = service.model(req.matches[1].str());
                 res.status = 200;
                 res.set_content(serialize_model(*model), "application/json");
               }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const std::string model_id = string_field(body, "model_id");
      Session s = service.create_session(model_id);
      send_json(res, 201, to_json(s, *service.model(model_id)));
    }));

    server.Get(R"(/sessions/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 Session s = service.get_state(req.matches[1].str());
                 send_json(res, 200, to_json(s, *service.model(s.model_id)));
               }));

    server.Post(R"(/sessions/([^/]+)/answers)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const std::string gate_id = string_field(body, "gate_id");
                  auto cell = parse_answer_cell(string_field(body, "answer"));
                  if (!cell || *cell == AnswerCell::Blank) {
                    throw BadRequestError("field 'answer' must be \"yes\" or \"no\"");
                  }
                  Session s = service.post_answer(req.matches[1].str(), gate_id,
                                                  *cell == AnswerCell::Yes);
                  send_json(res, 200, to_json(s, *service.model(s.model_id)));
                }));

    if (options.static_dir) {
      if (!server.set_mount_point("/", options.static_dir->string())) {
        throw IoError("static directory '" + options.static_dir->string() + "' does not exist");
      }
    }
  }
};

HttpServer::HttpServer(SessionService& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->options.host);
    if (port < 0) throw IoError("cannot bind " + impl_->options.host);
  } else if (!impl_->server.bind_to_port(impl_->options.host, port)) {
    throw IoError("cannot bind " + impl_->options.host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  impl_->options.port = port;
  spdlog::info("listening on http://{}:{}", impl_->options.host, port);
  return port;
}

void HttpServer::listen() {
  if (!impl_->bound) bind();
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace noisygate::service
