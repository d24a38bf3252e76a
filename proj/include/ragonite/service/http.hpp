#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ragonite/service/engine.hpp"

namespace ragonite::service {

/// Receives one JSON line per request. Bodies are never logged.
using LogSink = std::function<void(const std::string&)>;

namespace detail {

inline int status_for(const std::exception& e) {
    if (dynamic_cast<const NotFound*>(&e) || dynamic_cast<const UnknownTurn*>(&e)) return 404;
    if (dynamic_cast<const Conflict*>(&e)) return 409;
    if (dynamic_cast<const ProviderFailure*>(&e) || dynamic_cast<const AttributionFailed*>(&e) ||
        dynamic_cast<const ContextOverflow*>(&e) || dynamic_cast<const UnparseableVerdict*>(&e))
        return 502;
    if (dynamic_cast<const InvalidConfig*>(&e) || dynamic_cast<const PreconditionViolation*>(&e) ||
        dynamic_cast<const nlohmann::json::exception*>(&e))
        return 400;
    return 500;
}

inline std::string error_type(const std::exception& e) {
    if (dynamic_cast<const NotFound*>(&e)) return "NotFound";
    if (dynamic_cast<const UnknownTurn*>(&e)) return "UnknownTurn";
    if (dynamic_cast<const Conflict*>(&e)) return "Conflict";
    if (dynamic_cast<const ProviderFailure*>(&e)) return "ProviderFailure";
    if (dynamic_cast<const AttributionFailed*>(&e)) return "AttributionFailed";
    if (dynamic_cast<const ContextOverflow*>(&e)) return "ContextOverflow";
    if (dynamic_cast<const UnparseableVerdict*>(&e)) return "UnparseableVerdict";
    if (dynamic_cast<const InvalidConfig*>(&e)) return "InvalidConfig";
    if (dynamic_cast<const PreconditionViolation*>(&e)) return "PreconditionViolation";
    if (dynamic_cast<const nlohmann::json::exception*>(&e)) return "BadRequest";
    return "InternalError";
}

inline void reply(httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline nlohmann::json body_of(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    return nlohmann::json::parse(req.body);
}

inline std::string required(const nlohmann::json& body, const char* field) {
    if (!body.contains(field) || !body.at(field).is_string() || text::is_blank(body.at(field).get<std::string>()))
        throw PreconditionViolation(std::string("request body needs a nonempty '") + field + "'");
    return body.at(field).get<std::string>();
}

/// Wraps a handler: maps typed errors to status codes with a JSON error body.
template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const std::exception& e) {
            reply(res, {{"error", error_type(e)}, {"message", e.what()}}, status_for(e));
        }
    };
}

}  // namespace detail

/// Registers every API route on `server`. `static_dir`, when set, is served at `/`.
inline void register_routes(httplib::Server& server, Engine& engine, LogSink log = {},
                            const std::string& static_dir = {}) {
    using detail::guarded;
    using detail::reply;

    server.Post("/api/conversations", guarded([&](const auto& req, auto& res) {
                    const auto body = detail::body_of(req);
                    const auto conv = engine.create_conversation(body.value("domain", std::string{}));
                    reply(res, conv, 201);
                }));
    server.Get("/api/conversations", guarded([&](const auto& req, auto& res) {
                   const bool all = req.has_param("include_deleted") &&
                                    (req.get_param_value("include_deleted") == "true" ||
                                     req.get_param_value("include_deleted") == "1");
                   reply(res, engine.conversations(all));
               }));
    server.Get(R"(/api/conversations/([^/]+))", guarded([&](const auto& req, auto& res) {
                   reply(res, engine.conversation(req.matches[1]));
               }));
    server.Delete(R"(/api/conversations/([^/]+))", guarded([&](const auto& req, auto& res) {
                      engine.delete_conversation(req.matches[1]);
                      reply(res, {{"id", req.matches[1].str()}, {"deleted", true}});
                  }));
    server.Post(R"(/api/conversations/([^/]+)/messages)", guarded([&](const auto& req, auto& res) {
                    const auto body = detail::body_of(req);
                    reply(res, engine.ask(req.matches[1], detail::required(body, "question")));
                }));
    server.Post(R"(/api/turns/([^/]+)/explain)", guarded([&](const auto& req, auto& res) {
                    const auto body = detail::body_of(req);
                    const auto method = attribution::method_from(body.value("method", std::string("cfa")));
                    reply(res, engine.explain(req.matches[1], method));
                }));
    server.Get(R"(/api/turns/([^/]+)/trace)", guarded([&](const auto& req, auto& res) {
                   reply(res, engine.trace(req.matches[1]));
               }));
    server.Post(R"(/api/turns/([^/]+)/feedback)", guarded([&](const auto& req, auto& res) {
                    const auto body = detail::body_of(req);
                    const auto value = conversation::feedback_from(detail::required(body, "value"));
                    reply(res, engine.feedback(req.matches[1], value));
                }));
    server.Get(R"(/api/turns/([^/]+)/suggestions)", guarded([&](const auto& req, auto& res) {
                   int n = 3;
                   if (req.has_param("n")) n = std::stoi(req.get_param_value("n"));
                   if (n < 1 || n > 10) throw PreconditionViolation("n must lie in [1, 10]");
                   reply(res, {{"suggestions", engine.suggestions(req.matches[1], n)}});
               }));
    server.Get("/api/config", guarded([&](const auto&, auto& res) { reply(res, engine.config()); }));
    server.Put("/api/config", guarded([&](const auto& req, auto& res) {
                   reply(res, engine.update_config(detail::body_of(req)));
               }));
    server.Get("/api/domains", guarded([&](const auto&, auto& res) {
                   nlohmann::json out = nlohmann::json::array();
                   for (const auto& d : engine.domains()) out.push_back({{"name", d.name}});
                   reply(res, out);
               }));

    if (!static_dir.empty()) server.set_mount_point("/", static_dir);

    if (log) {
        server.set_logger([log](const httplib::Request& req, const httplib::Response& res) {
            log(nlohmann::json{{"ts", conversation::now_iso8601()},
                               {"method", req.method},
                               {"path", req.path},
                               {"status", res.status},
                               {"request_bytes", req.body.size()},
                               {"response_bytes", res.body.size()}}
                    .dump());
        });
    }
}

}  // namespace ragonite::service
