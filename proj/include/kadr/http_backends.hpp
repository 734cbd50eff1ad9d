#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "kadr/backends.hpp"
#include "kadr/core.hpp"
#include "kadr/log.hpp"
#include "kadr/text.hpp"

namespace kadr {

// ---------------------------------------------------------------------------
// Wire format
//   search   {"query", "k"}                                -> {"hits": [{"chunk_id","doc_id","text","score"}]}
//   rerank   {"query", "documents": [text]}                 -> {"scores": [float]}
//   complete {"system","user","max_tokens","temperature","seed"} -> {"text"}
// ---------------------------------------------------------------------------

namespace wire {

inline nlohmann::json search_request(const std::string& query, int k) { return {{"query", query}, {"k", k}}; }

inline nlohmann::json search_response(const RankedList& hits) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : hits) {
        nlohmann::json h{{"chunk_id", e.chunk.chunk_id}, {"doc_id", e.chunk.doc_id}, {"text", e.chunk.text}};
        h["score"] = e.score ? nlohmann::json(*e.score) : nlohmann::json(nullptr);
        arr.push_back(std::move(h));
    }
    return {{"hits", std::move(arr)}};
}

inline std::vector<RankedEntry> parse_search_response(const nlohmann::json& j) {
    try {
        std::vector<RankedEntry> out;
        for (const auto& h : j.at("hits")) {
            RankedEntry e;
            e.chunk.chunk_id = h.at("chunk_id").get<std::string>();
            e.chunk.doc_id = h.value("doc_id", e.chunk.chunk_id);
            e.chunk.text = h.at("text").get<std::string>();
            if (h.contains("score") && !h["score"].is_null()) e.score = h["score"].get<double>();
            if (!e.chunk.valid()) throw Error(ErrorCode::malformed_response, "search hit with empty chunk_id, doc_id or text");
            out.push_back(std::move(e));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::malformed_response, std::string("malformed search response: ") + e.what());
    }
}

inline nlohmann::json rerank_request(const std::string& query, const std::vector<DocumentChunk>& docs) {
    nlohmann::json texts = nlohmann::json::array();
    for (const auto& d : docs) texts.push_back(d.text);
    return {{"query", query}, {"documents", std::move(texts)}};
}

inline std::vector<double> parse_rerank_response(const nlohmann::json& j) {
    try {
        return j.at("scores").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::malformed_response, std::string("malformed rerank response: ") + e.what());
    }
}

inline nlohmann::json completion_request(const CompletionRequest& req) {
    nlohmann::json j{{"system", req.system}, {"user", req.user}, {"max_tokens", req.max_tokens}, {"temperature", req.temperature}};
    j["seed"] = req.seed ? nlohmann::json(*req.seed) : nlohmann::json(nullptr);
    return j;
}

inline CompletionRequest parse_completion_request(const nlohmann::json& j) {
    try {
        CompletionRequest req;
        req.system = j.value("system", std::string());
        req.user = j.at("user").get<std::string>();
        req.max_tokens = j.value("max_tokens", 1024);
        req.temperature = j.value("temperature", 0.0);
        if (j.contains("seed") && !j["seed"].is_null()) req.seed = j["seed"].get<std::int64_t>();
        return req;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("malformed completion request: ") + e.what());
    }
}

inline std::string parse_completion_response(const nlohmann::json& j) {
    try {
        return j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::malformed_response, std::string("malformed completion response: ") + e.what());
    }
}

}  // namespace wire

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline ParsedUrl parse_url(const std::string& url, const std::string& default_path) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::invalid_config, "endpoint URL lacks a scheme: '" + url + "'");
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl p;
    p.origin = url.substr(0, path_start);
    p.path = path_start == std::string::npos ? default_path : url.substr(path_start);
    if (p.path.empty() || p.path == "/") p.path = default_path;
    return p;
}

/// POSTs JSON with retries. Transport errors, 429 and 5xx responses are
/// retried with exponential backoff (50 ms doubling) plus jitter drawn from
/// a seeded generator; other 4xx responses fail immediately.
class JsonPoster {
public:
    JsonPoster(BackendEndpoint endpoint, std::string default_path, std::int64_t seed)
        : endpoint_(std::move(endpoint)), url_(parse_url(endpoint_.base_url, default_path)), jitter_state_(static_cast<std::uint64_t>(seed)) {}

    nlohmann::json post(const nlohmann::json& body) const {
        const auto payload = body.dump();
        std::string last_error;
        for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(backoff(attempt));
            httplib::Client client(url_.origin);
            auto timeout = std::chrono::milliseconds(endpoint_.timeout_ms);
            client.set_connection_timeout(timeout);
            client.set_read_timeout(timeout);
            client.set_write_timeout(timeout);
            if (endpoint_.auth_token) client.set_bearer_token_auth(*endpoint_.auth_token);
            auto res = client.Post(url_.path, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 200) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::parse_error&) {
                    throw Error(ErrorCode::malformed_response, endpoint_.base_url + " returned a non-JSON body");
                }
            }
            last_error = "HTTP " + std::to_string(res->status);
            if (res->status != 429 && res->status < 500) {
                throw Error(ErrorCode::malformed_response, endpoint_.base_url + " rejected the request: " + last_error + ": " + res->body);
            }
        }
        throw Error(ErrorCode::transport, endpoint_.base_url + " failed after " + std::to_string(endpoint_.max_retries + 1) +
                                              " attempts: " + last_error);
    }

    const BackendEndpoint& endpoint() const { return endpoint_; }

private:
    std::chrono::milliseconds backoff(int attempt) const {
        const std::int64_t base = 50LL << std::min(attempt - 1, 10);
        std::uint64_t state = jitter_state_.fetch_add(1) * 0x9e3779b97f4a7c15ULL;
        auto jitter = static_cast<std::int64_t>(text::splitmix64(state) % static_cast<std::uint64_t>(base));
        return std::chrono::milliseconds(base + jitter);
    }

    BackendEndpoint endpoint_;
    ParsedUrl url_;
    mutable std::atomic<std::uint64_t> jitter_state_;
};

class HttpRetriever final : public Retriever {
public:
    HttpRetriever(Origin origin, BackendEndpoint endpoint, std::int64_t seed) : Retriever(origin), poster_(std::move(endpoint), "/search", seed) {}

protected:
    std::vector<RankedEntry> do_search(const std::string& query, int k) const override {
        return wire::parse_search_response(poster_.post(wire::search_request(query, k)));
    }

private:
    JsonPoster poster_;
};

class HttpReranker final : public Reranker {
public:
    HttpReranker(BackendEndpoint endpoint, std::int64_t seed) : poster_(std::move(endpoint), "/rerank", seed) {}

protected:
    std::vector<double> do_score(const std::string& query, const std::vector<DocumentChunk>& docs) const override {
        return wire::parse_rerank_response(poster_.post(wire::rerank_request(query, docs)));
    }

private:
    JsonPoster poster_;
};

class HttpLlm final : public LlmClient {
public:
    HttpLlm(BackendEndpoint endpoint, std::int64_t seed) : poster_(std::move(endpoint), "/complete", seed) {}

protected:
    std::string do_complete(const CompletionRequest& req) const override {
        return wire::parse_completion_response(poster_.post(wire::completion_request(req)));
    }

private:
    JsonPoster poster_;
};

namespace detail {

inline void reply_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline int status_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::invalid_argument:
        case ErrorCode::parse: return 400;
        case ErrorCode::no_script: return 404;
        case ErrorCode::transport:
        case ErrorCode::backend_unavailable: return 503;
        default: return 500;
    }
}

template <typename Fn>
void handle_json(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
        reply_json(res, 400, {{"error", "request body is not JSON"}});
        return;
    }
    try {
        reply_json(res, 200, fn(body));
    } catch (const Error& e) {
        reply_json(res, status_for(e), {{"error", e.what()}, {"code", to_string(e.code())}});
    } catch (const nlohmann::json::exception& e) {
        reply_json(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
        reply_json(res, 500, {{"error", e.what()}});
    }
}

}  // namespace detail

/// Serves local backends over the wire format at
/// POST /sparse/search, /dense/search, /rerank, /complete. Null backends are
/// not mounted.
inline void mount_backend_service(httplib::Server& server, std::shared_ptr<const Retriever> sparse, std::shared_ptr<const Retriever> dense,
                                  std::shared_ptr<const Reranker> reranker, std::shared_ptr<const LlmClient> llm) {
    auto mount_search = [&server](const std::string& path, std::shared_ptr<const Retriever> r) {
        if (!r) return;
        server.Post(path, [r](const httplib::Request& req, httplib::Response& res) {
            detail::handle_json(req, res, [&](const nlohmann::json& body) {
                return wire::search_response(r->search(body.at("query").get<std::string>(), body.at("k").get<int>()));
            });
        });
    };
    mount_search("/sparse/search", std::move(sparse));
    mount_search("/dense/search", std::move(dense));
    if (reranker) {
        server.Post("/rerank", [reranker](const httplib::Request& req, httplib::Response& res) {
            detail::handle_json(req, res, [&](const nlohmann::json& body) {
                std::vector<DocumentChunk> docs;
                for (const auto& t : body.at("documents")) {
                    auto id = std::to_string(docs.size());
                    docs.push_back({id, id, t.get<std::string>(), Origin::sparse});
                }
                return nlohmann::json{{"scores", reranker->rerank_batch(body.at("query").get<std::string>(), docs)}};
            });
        });
    }
    if (llm) {
        server.Post("/complete", [llm](const httplib::Request& req, httplib::Response& res) {
            detail::handle_json(req, res, [&](const nlohmann::json& body) {
                return nlohmann::json{{"text", llm->llm_complete(wire::parse_completion_request(body))}};
            });
        });
    }
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { detail::reply_json(res, 200, {{"status", "ok"}}); });
}

}  // namespace kadr
