// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>

#include "httplib.h"
#include "json.hpp"

#include "sppg/service/listening_service.hpp"

namespace sppg::service {

/// Mounts the listening API on `server`:
///   GET  /api/session/{token}   GET /api/next/{token}   GET /audio/{item_id}
///   POST /api/response {token,item_id,option}            GET /api/report
/// If `static_dir` is non-empty it is served at "/".
inline void mount_routes(httplib::Server& server, ListeningService& svc, const std::string& static_dir = {}) {
    auto send_json = [](httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json; charset=utf-8");
    };
    auto guarded = [send_json](auto fn) {
        return [fn, send_json](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const NotFound& e) {
                send_json(res, 404, {{"error", e.what()}});
            } catch (const ValidationError& e) {
                send_json(res, 422, {{"error", e.what()}});
            } catch (const json::exception& e) {
                send_json(res, 400, {{"error", std::string("bad request body: ") + e.what()}});
            } catch (const std::exception& e) {
                send_json(res, 500, {{"error", e.what()}});
            }
        };
    };

    server.Get(R"(/api/session/([^/]+))", guarded([&svc, send_json](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, svc.session(req.matches[1]));
               }));
    server.Get(R"(/api/next/([^/]+))", guarded([&svc, send_json](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, svc.next(req.matches[1]));
               }));
    server.Get(R"(/audio/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                   const auto path = svc.audio_path(req.matches[1]);
                   std::string bytes;
                   try {
                       bytes = read_file_bytes(path);
                   } catch (const DataError&) {
                       throw NotFound("audio file missing for item '" + std::string(req.matches[1]) + "'");
                   }
                   res.set_content(bytes, "audio/wav");
               }));
    server.Post("/api/response", guarded([&svc, send_json](const httplib::Request& req, httplib::Response& res) {
                    const auto body = json::parse(req.body);
                    if (!body.contains("option") || !body["option"].is_number_integer())
                        throw ValidationError("option must be an integer");
                    send_json(res, 200,
                              svc.respond(body.at("token").get<std::string>(), body.at("item_id").get<std::string>(),
                                          body.at("option").get<int>()));
                }));
    server.Get("/api/report", guarded([&svc, send_json](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, svc.report());
               }));
    if (!static_dir.empty()) server.set_mount_point("/", static_dir);
}

}  // namespace sppg::service
