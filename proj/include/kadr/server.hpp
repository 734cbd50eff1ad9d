#pragma once

#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "kadr/backends.hpp"
#include "kadr/config.hpp"
#include "kadr/http_backends.hpp"
#include "kadr/pipeline.hpp"

namespace kadr {

inline constexpr std::string_view version = "0.1.0";

/// HTTP status for a failed query: bad input 400, no backend 503, else 500.
inline int status_for(const StageError& e) {
    switch (e.code) {
        case ErrorCode::invalid_argument: return 400;
        case ErrorCode::backend_unavailable:
        case ErrorCode::transport: return 503;
        default: return 500;
    }
}

/// Mounts the answer service:
///   POST /answer  {"question": string, "question_id"?: string} -> AnswerResult
///   GET  /health  -> {"status", "version", "config_digest"}
inline void mount_answer_service(httplib::Server& server, const PipelineConfig& cfg, Backends backends) {
    auto shared_cfg = std::make_shared<const PipelineConfig>(cfg);
    auto shared_backends = std::make_shared<const Backends>(std::move(backends));
    auto digest = config_digest(cfg);

    server.Post("/answer", [shared_cfg, shared_backends](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error&) {
            detail::reply_json(res, 400, {{"error", "request body is not JSON"}});
            return;
        }
        if (!body.is_object() || !body.contains("question") || !body["question"].is_string() ||
            text::trim(body["question"].get<std::string>()).empty()) {
            detail::reply_json(res, 400, {{"error", "'question' must be a nonempty string"}});
            return;
        }
        Question q;
        q.text = body["question"].get<std::string>();
        q.question_id = body.value("question_id", std::string("q"));
        try {
            auto result = run_query(q, *shared_cfg, *shared_backends);
            const int status = result.ok() ? 200 : status_for(*result.error);
            detail::reply_json(res, status, answer_result_to_json(result, {true, false}));
        } catch (const std::exception& e) {
            detail::reply_json(res, 500, {{"error", e.what()}});
        }
    });

    server.Get("/health", [digest](const httplib::Request&, httplib::Response& res) {
        detail::reply_json(res, 200, {{"status", "ok"}, {"version", std::string(version)}, {"config_digest", digest}});
    });
}

/// Blocks serving on host:port until server.stop().
inline void serve(httplib::Server& server, const PipelineConfig& cfg, Backends backends, const std::string& host, int port) {
    mount_answer_service(server, cfg, std::move(backends));
    if (!server.listen(host, port)) throw Error(ErrorCode::io, "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace kadr
