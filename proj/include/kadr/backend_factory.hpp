#pragma once

#include <memory>
#include <string>

#include "kadr/backends.hpp"
#include "kadr/core.hpp"
#include "kadr/heuristic_llm.hpp"
#include "kadr/http_backends.hpp"
#include "kadr/mock_backends.hpp"

namespace kadr {

/// Builds clients from endpoint descriptors. A base_url of
///   http://... or https://...  talks to a remote service,
///   mock                       uses the in-process mock over cfg.mock_corpus
///                              (retrievers) or the overlap scorer (reranker),
///   mock:heuristic             (llm) uses HeuristicLlm,
///   mock:script:<path>         (llm) replays a {"system","user","response"}
///                              JSONL script, falling back to HeuristicLlm.
inline Backends make_backends(const PipelineConfig& cfg) {
    Backends b;
    std::shared_ptr<const Corpus> corpus;
    auto need_corpus = [&]() -> const Corpus& {
        if (!corpus) {
            if (cfg.mock_corpus.empty()) throw Error(ErrorCode::invalid_config, "mock retrievers need mock_corpus");
            corpus = std::make_shared<const Corpus>(load_corpus_jsonl(std::filesystem::path(cfg.mock_corpus)));
        }
        return *corpus;
    };
    auto is_http = [](const std::string& url) { return url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0; };
    auto unsupported = [](const char* svc, const std::string& url) {
        return Error(ErrorCode::invalid_config, std::string(svc) + ".base_url not supported: '" + url + "'");
    };

    if (cfg.sparse.base_url == "mock") {
        b.sparse = std::make_shared<MockSparseRetriever>(need_corpus());
    } else if (is_http(cfg.sparse.base_url)) {
        b.sparse = std::make_shared<HttpRetriever>(Origin::sparse, cfg.sparse, cfg.seed);
    } else {
        throw unsupported("sparse", cfg.sparse.base_url);
    }

    if (cfg.dense.base_url == "mock") {
        b.dense = std::make_shared<MockDenseRetriever>(need_corpus(), cfg.seed);
    } else if (is_http(cfg.dense.base_url)) {
        b.dense = std::make_shared<HttpRetriever>(Origin::dense, cfg.dense, cfg.seed);
    } else {
        throw unsupported("dense", cfg.dense.base_url);
    }

    if (cfg.reranker.base_url == "mock") {
        b.reranker = std::make_shared<MockReranker>();
    } else if (is_http(cfg.reranker.base_url)) {
        b.reranker = std::make_shared<HttpReranker>(cfg.reranker, cfg.seed);
    } else {
        throw unsupported("reranker", cfg.reranker.base_url);
    }

    const auto& llm_url = cfg.llm.base_url;
    const std::string script_prefix = "mock:script:";
    if (llm_url == "mock:heuristic" || llm_url == "mock") {
        b.llm = std::make_shared<HeuristicLlm>();
    } else if (llm_url.rfind(script_prefix, 0) == 0) {
        auto scripted = std::make_shared<ScriptedLlm>(std::make_shared<HeuristicLlm>());
        std::ifstream in(llm_url.substr(script_prefix.size()));
        if (!in) throw Error(ErrorCode::io, "cannot open LLM script " + llm_url.substr(script_prefix.size()));
        scripted->load_jsonl(in);
        b.llm = std::move(scripted);
    } else if (is_http(llm_url)) {
        b.llm = std::make_shared<HttpLlm>(cfg.llm, cfg.seed);
    } else {
        throw unsupported("llm", llm_url);
    }
    return b;
}

}  // namespace kadr
