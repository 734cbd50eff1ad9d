#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "kadr/core.hpp"
#include "kadr/text.hpp"

namespace kadr {

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::invalid_config, "config field " + where + key + " has the wrong type");
    }
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw Error(ErrorCode::invalid_config, "unknown config field " + where + it.key());
    }
}

inline BackendEndpoint endpoint_from_json(const nlohmann::json& j, const std::string& name) {
    if (!j.is_object()) throw Error(ErrorCode::invalid_config, "config field " + name + " must be an object");
    reject_unknown(j, {"base_url", "timeout_ms", "max_retries", "auth_token"}, name + ".");
    BackendEndpoint ep;
    read_field(j, "base_url", ep.base_url, name + ".");
    read_field(j, "timeout_ms", ep.timeout_ms, name + ".");
    read_field(j, "max_retries", ep.max_retries, name + ".");
    if (j.contains("auth_token") && !j["auth_token"].is_null()) {
        std::string tok;
        read_field(j, "auth_token", tok, name + ".");
        ep.auth_token = tok;
    }
    return ep;
}

inline nlohmann::json endpoint_to_json(const BackendEndpoint& ep) {
    nlohmann::json j{{"base_url", ep.base_url}, {"timeout_ms", ep.timeout_ms}, {"max_retries", ep.max_retries}};
    j["auth_token"] = ep.auth_token ? nlohmann::json(*ep.auth_token) : nlohmann::json(nullptr);
    return j;
}

inline long long parse_env_int(const std::string& name, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_config, "environment variable " + name + " is not an integer: '" + value + "'");
    }
}

inline bool parse_env_bool(const std::string& name, const std::string& value) {
    auto v = text::to_lower(value);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw Error(ErrorCode::invalid_config, "environment variable " + name + " is not a boolean: '" + value + "'");
}

}  // namespace detail

/// Parses a config object. Absent keys keep their defaults; unknown keys are
/// rejected. Does not validate invariants (see validate_config).
inline PipelineConfig config_from_json(const nlohmann::json& j) {
    using detail::read_field;
    if (!j.is_object()) throw Error(ErrorCode::invalid_config, "config must be a JSON object");
    detail::reject_unknown(j,
                           {"n_ret", "n_rank", "n_know", "n_ans", "n_rs", "n_retry", "sparse", "dense", "reranker", "llm",
                            "mock_corpus", "workers", "queue_capacity", "seed", "sparse_first", "query_separator",
                            "answer_max_tokens", "llm_max_tokens", "temperature", "truncate_answer", "answer_word_limit"},
                           "");
    PipelineConfig cfg;
    read_field(j, "n_ret", cfg.n_ret, "");
    read_field(j, "n_rank", cfg.n_rank, "");
    read_field(j, "n_know", cfg.n_know, "");
    read_field(j, "n_ans", cfg.n_ans, "");
    read_field(j, "n_rs", cfg.n_rs, "");
    read_field(j, "n_retry", cfg.n_retry, "");
    if (j.contains("sparse")) cfg.sparse = detail::endpoint_from_json(j["sparse"], "sparse");
    if (j.contains("dense")) cfg.dense = detail::endpoint_from_json(j["dense"], "dense");
    if (j.contains("reranker")) cfg.reranker = detail::endpoint_from_json(j["reranker"], "reranker");
    if (j.contains("llm")) cfg.llm = detail::endpoint_from_json(j["llm"], "llm");
    read_field(j, "mock_corpus", cfg.mock_corpus, "");
    if (j.contains("workers")) {
        const auto& w = j["workers"];
        if (w.is_number_integer()) {
            int n = w.get<int>();
            cfg.workers = StageWorkers{n, n, n, n, n, n, n, n};
        } else if (w.is_object()) {
            detail::reject_unknown(w,
                                   {"retrieve", "initial_rerank", "declare", "summarize", "diverse_rerank", "answer",
                                    "rerank_shards", "declare_shards"},
                                   "workers.");
            read_field(w, "retrieve", cfg.workers.retrieve, "workers.");
            read_field(w, "initial_rerank", cfg.workers.initial_rerank, "workers.");
            read_field(w, "declare", cfg.workers.declare, "workers.");
            read_field(w, "summarize", cfg.workers.summarize, "workers.");
            read_field(w, "diverse_rerank", cfg.workers.diverse_rerank, "workers.");
            read_field(w, "answer", cfg.workers.answer, "workers.");
            read_field(w, "rerank_shards", cfg.workers.rerank_shards, "workers.");
            read_field(w, "declare_shards", cfg.workers.declare_shards, "workers.");
        } else {
            throw Error(ErrorCode::invalid_config, "config field workers must be an integer or an object");
        }
    }
    read_field(j, "queue_capacity", cfg.queue_capacity, "");
    read_field(j, "seed", cfg.seed, "");
    read_field(j, "sparse_first", cfg.sparse_first, "");
    read_field(j, "query_separator", cfg.query_separator, "");
    read_field(j, "answer_max_tokens", cfg.answer_max_tokens, "");
    read_field(j, "llm_max_tokens", cfg.llm_max_tokens, "");
    read_field(j, "temperature", cfg.temperature, "");
    read_field(j, "truncate_answer", cfg.truncate_answer, "");
    read_field(j, "answer_word_limit", cfg.answer_word_limit, "");
    return cfg;
}

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
    const auto& w = cfg.workers;
    return nlohmann::json{
        {"n_ret", cfg.n_ret},
        {"n_rank", cfg.n_rank},
        {"n_know", cfg.n_know},
        {"n_ans", cfg.n_ans},
        {"n_rs", cfg.n_rs},
        {"n_retry", cfg.n_retry},
        {"sparse", detail::endpoint_to_json(cfg.sparse)},
        {"dense", detail::endpoint_to_json(cfg.dense)},
        {"reranker", detail::endpoint_to_json(cfg.reranker)},
        {"llm", detail::endpoint_to_json(cfg.llm)},
        {"mock_corpus", cfg.mock_corpus},
        {"workers",
         {{"retrieve", w.retrieve},
          {"initial_rerank", w.initial_rerank},
          {"declare", w.declare},
          {"summarize", w.summarize},
          {"diverse_rerank", w.diverse_rerank},
          {"answer", w.answer},
          {"rerank_shards", w.rerank_shards},
          {"declare_shards", w.declare_shards}}},
        {"queue_capacity", cfg.queue_capacity},
        {"seed", cfg.seed},
        {"sparse_first", cfg.sparse_first},
        {"query_separator", cfg.query_separator},
        {"answer_max_tokens", cfg.answer_max_tokens},
        {"llm_max_tokens", cfg.llm_max_tokens},
        {"temperature", cfg.temperature},
        {"truncate_answer", cfg.truncate_answer},
        {"answer_word_limit", cfg.answer_word_limit},
    };
}

/// Applies KADR_<FIELD> overrides, e.g. KADR_N_RET=500 or
/// KADR_LLM_BASE_URL=http://host:8000. Endpoint fields use
/// KADR_<SERVICE>_<FIELD>; stage workers use KADR_WORKERS_<STAGE>.
inline PipelineConfig apply_env_overrides(PipelineConfig cfg, const EnvLookup& env = process_env) {
    auto int_var = [&](const std::string& name, auto& field) {
        if (auto v = env(name)) field = static_cast<std::remove_reference_t<decltype(field)>>(detail::parse_env_int(name, *v));
    };
    auto str_var = [&](const std::string& name, std::string& field) {
        if (auto v = env(name)) field = *v;
    };
    int_var("KADR_N_RET", cfg.n_ret);
    int_var("KADR_N_RANK", cfg.n_rank);
    int_var("KADR_N_KNOW", cfg.n_know);
    int_var("KADR_N_ANS", cfg.n_ans);
    int_var("KADR_N_RS", cfg.n_rs);
    int_var("KADR_N_RETRY", cfg.n_retry);
    int_var("KADR_QUEUE_CAPACITY", cfg.queue_capacity);
    int_var("KADR_SEED", cfg.seed);
    int_var("KADR_ANSWER_MAX_TOKENS", cfg.answer_max_tokens);
    int_var("KADR_LLM_MAX_TOKENS", cfg.llm_max_tokens);
    int_var("KADR_ANSWER_WORD_LIMIT", cfg.answer_word_limit);
    str_var("KADR_MOCK_CORPUS", cfg.mock_corpus);
    str_var("KADR_QUERY_SEPARATOR", cfg.query_separator);
    if (auto v = env("KADR_SPARSE_FIRST")) cfg.sparse_first = detail::parse_env_bool("KADR_SPARSE_FIRST", *v);
    if (auto v = env("KADR_TRUNCATE_ANSWER")) cfg.truncate_answer = detail::parse_env_bool("KADR_TRUNCATE_ANSWER", *v);
    if (auto v = env("KADR_TEMPERATURE")) {
        try {
            cfg.temperature = std::stod(*v);
        } catch (const std::exception&) {
            throw Error(ErrorCode::invalid_config, "environment variable KADR_TEMPERATURE is not a number");
        }
    }
    for (auto [prefix, ep] : {std::pair<const char*, BackendEndpoint*>{"KADR_SPARSE_", &cfg.sparse},
                              {"KADR_DENSE_", &cfg.dense},
                              {"KADR_RERANKER_", &cfg.reranker},
                              {"KADR_LLM_", &cfg.llm}}) {
        std::string p(prefix);
        str_var(p + "BASE_URL", ep->base_url);
        int_var(p + "TIMEOUT_MS", ep->timeout_ms);
        int_var(p + "MAX_RETRIES", ep->max_retries);
        if (auto v = env(p + "AUTH_TOKEN")) ep->auth_token = *v;
    }
    int_var("KADR_WORKERS_RETRIEVE", cfg.workers.retrieve);
    int_var("KADR_WORKERS_INITIAL_RERANK", cfg.workers.initial_rerank);
    int_var("KADR_WORKERS_DECLARE", cfg.workers.declare);
    int_var("KADR_WORKERS_SUMMARIZE", cfg.workers.summarize);
    int_var("KADR_WORKERS_DIVERSE_RERANK", cfg.workers.diverse_rerank);
    int_var("KADR_WORKERS_ANSWER", cfg.workers.answer);
    int_var("KADR_WORKERS_RERANK_SHARDS", cfg.workers.rerank_shards);
    int_var("KADR_WORKERS_DECLARE_SHARDS", cfg.workers.declare_shards);
    return cfg;
}

/// Reads a JSON config file, applies environment overrides and validates.
/// A relative mock_corpus path is resolved against the config file's
/// directory.
inline PipelineConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::invalid_config, "config file " + path.string() + " is not valid JSON: " + e.what());
    }
    auto cfg = apply_env_overrides(config_from_json(j), env);
    if (!cfg.mock_corpus.empty()) {
        std::filesystem::path corpus(cfg.mock_corpus);
        if (corpus.is_relative()) cfg.mock_corpus = (path.parent_path() / corpus).lexically_normal().string();
    }
    const std::string script_prefix = "mock:script:";
    if (cfg.llm.base_url.rfind(script_prefix, 0) == 0) {
        std::filesystem::path script(cfg.llm.base_url.substr(script_prefix.size()));
        if (script.is_relative()) cfg.llm.base_url = script_prefix + (path.parent_path() / script).lexically_normal().string();
    }
    return validate_config(std::move(cfg));
}

/// Digest of the canonical config with auth tokens blanked.
inline std::string config_digest(const PipelineConfig& cfg) {
    auto j = config_to_json(cfg);
    for (const char* svc : {"sparse", "dense", "reranker", "llm"}) {
        if (!j[svc]["auth_token"].is_null()) j[svc]["auth_token"] = "***";
    }
    return text::hex64(text::fnv1a64(j.dump()));
}

}  // namespace kadr
