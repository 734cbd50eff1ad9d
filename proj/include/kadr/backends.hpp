#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "kadr/core.hpp"
#include "kadr/log.hpp"

namespace kadr {

/// Client for a sparse or dense index. The public entry point enforces the
/// contract (nonempty query, k >= 1, at most k deduplicated hits); concrete
/// backends implement do_search.
class Retriever {
public:
    explicit Retriever(Origin origin) : origin_(origin) {}
    virtual ~Retriever() = default;

    RankedList search(const std::string& query, int k) const {
        require(!query.empty(), "search query must be nonempty");
        require(k >= 1, "search k must be >= 1");
        auto raw = do_search(query, k);
        std::vector<RankedEntry> entries;
        entries.reserve(std::min<std::size_t>(raw.size(), static_cast<std::size_t>(k)));
        std::unordered_set<std::string> seen;
        for (auto& e : raw) {
            if (entries.size() >= static_cast<std::size_t>(k)) break;
            if (!seen.insert(identity_key(e.chunk)).second) continue;
            e.chunk.origin = origin_;
            entries.push_back(std::move(e));
        }
        bool monotone = true;
        for (std::size_t i = 1; i < entries.size(); ++i) {
            if (!entries[i].score || !entries[i - 1].score || *entries[i].score > *entries[i - 1].score) monotone = false;
        }
        if (!monotone) {
            for (auto& e : entries) e.score.reset();
        }
        return RankedList(std::move(entries));
    }

    Origin origin() const { return origin_; }

protected:
    /// Hits in backend relevance order. May contain duplicates or more than
    /// k entries; search() trims both.
    virtual std::vector<RankedEntry> do_search(const std::string& query, int k) const = 0;

private:
    Origin origin_;
};

/// Cross-encoder style relevance scorer producing scores in [0, 1].
class Reranker {
public:
    virtual ~Reranker() = default;

    double rerank_score(const std::string& query, const DocumentChunk& doc) const {
        return rerank_batch(query, std::vector<DocumentChunk>{doc}).front();
    }

    std::vector<double> rerank_batch(const std::string& query, const std::vector<DocumentChunk>& docs) const {
        require(!query.empty(), "rerank query must be nonempty");
        require(!docs.empty(), "rerank batch must be nonempty");
        for (const auto& d : docs) require(!d.text.empty(), "rerank document text must be nonempty");
        auto scores = do_score(query, docs);
        if (scores.size() != docs.size()) {
            throw Error(ErrorCode::malformed_response, "reranker returned " + std::to_string(scores.size()) + " scores for " +
                                                           std::to_string(docs.size()) + " documents");
        }
        for (auto& s : scores) {
            if (!(s >= 0.0 && s <= 1.0)) {
                log::warn("reranker", "score " + std::to_string(s) + " outside [0,1], clamped");
                s = (s > 1.0) ? 1.0 : 0.0;  // NaN clamps to 0
            }
        }
        return scores;
    }

protected:
    virtual std::vector<double> do_score(const std::string& query, const std::vector<DocumentChunk>& docs) const = 0;
};

struct CompletionRequest {
    std::string system;
    std::string user;
    int max_tokens = 1024;
    double temperature = 0.0;
    std::optional<std::int64_t> seed;

    friend bool operator==(const CompletionRequest&, const CompletionRequest&) = default;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;

    std::string llm_complete(const CompletionRequest& req) const {
        require(!req.user.empty(), "completion request user text must be nonempty");
        require(req.max_tokens >= 1, "completion request max_tokens must be >= 1");
        require(req.temperature >= 0.0, "completion request temperature must be >= 0");
        auto out = do_complete(req);
        if (out.empty()) throw Error(ErrorCode::empty_completion, "LLM returned an empty completion");
        return out;
    }

protected:
    virtual std::string do_complete(const CompletionRequest& req) const = 0;
};

/// The four services a pipeline talks to. Shared, immutable, and safe for
/// concurrent use.
struct Backends {
    std::shared_ptr<const Retriever> sparse;
    std::shared_ptr<const Retriever> dense;
    std::shared_ptr<const Reranker> reranker;
    std::shared_ptr<const LlmClient> llm;
};

}  // namespace kadr
