#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "kadr/backends.hpp"
#include "kadr/concurrency.hpp"
#include "kadr/core.hpp"
#include "kadr/fusion.hpp"
#include "kadr/knowledge.hpp"

namespace kadr {

struct ScoredChunk {
    DocumentChunk chunk;
    double score = 0.0;
};

/// Reranked candidates: scores in [0,1], non-increasing, identity keys unique.
class ScoredList {
public:
    ScoredList() = default;

    explicit ScoredList(std::vector<ScoredChunk> entries) : entries_(std::move(entries)) {
        std::unordered_set<std::string_view> seen;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& e = entries_[i];
            if (!(e.score >= 0.0 && e.score <= 1.0)) throw Error(ErrorCode::invalid_argument, "scored list score outside [0,1]");
            if (i > 0 && e.score > entries_[i - 1].score) throw Error(ErrorCode::invalid_argument, "scored list is not sorted");
            if (!seen.insert(identity_key(e.chunk)).second) {
                throw Error(ErrorCode::invalid_argument, "duplicate identity key '" + identity_key(e.chunk) + "' in scored list");
            }
        }
    }

    const std::vector<ScoredChunk>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const ScoredChunk& operator[](std::size_t i) const { return entries_[i]; }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    ScoredList top(std::size_t n) const {
        if (n >= entries_.size()) return *this;
        return ScoredList(std::vector<ScoredChunk>(entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(n)));
    }

    std::vector<DocumentChunk> chunks() const {
        std::vector<DocumentChunk> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.chunk);
        return out;
    }

    RankedList to_ranked() const {
        std::vector<RankedEntry> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back({e.chunk, e.score});
        return RankedList(std::move(out));
    }

private:
    std::vector<ScoredChunk> entries_;
};

/// Scores every document against `query` (batch split over `shards`
/// concurrent requests, reassembled in order) and sorts descending; ties
/// keep input order.
inline ScoredList score_and_sort(const std::string& query, const std::vector<DocumentChunk>& docs, const Reranker& reranker,
                                 std::size_t shards = 1) {
    require(!docs.empty(), "rerank needs at least one document");
    auto scores = parallel_map_ordered(docs, shards, [&](const std::vector<DocumentChunk>& part) { return reranker.rerank_batch(query, part); });
    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<ScoredChunk> out;
    out.reserve(docs.size());
    for (auto i : order) out.push_back({docs[i], scores[i]});
    return ScoredList(std::move(out));
}

inline ScoredList initial_rerank(const Question& q, const RankedList& docs, const Reranker& reranker, std::size_t shards = 1) {
    require(!q.text.empty(), "question text must be nonempty");
    return score_and_sort(q.text, docs.chunks(), reranker, shards);
}

inline std::string diverse_query(const Question& q, const std::string& summary, std::string_view separator = " ; ") {
    require(!q.text.empty(), "question text must be nonempty");
    require(!summary.empty(), "knowledge summary must be nonempty");
    std::string out = q.text;
    out += separator;
    out += summary;
    return out;
}

/// Reranks `docs` twice, once per summary (question ; summary as the query),
/// then interleaves the two orders into n_rank unique documents, starting
/// with the first summary's list.
inline RankedList diverse_rerank(const Question& q, const KnowledgeSummaries& summaries, const ScoredList& docs, const Reranker& reranker,
                                 std::size_t n_rank, std::string_view separator = " ; ", std::size_t shards = 1) {
    require(!docs.empty(), "diverse rerank needs at least one document");
    auto chunks = docs.chunks();
    auto list_0 = score_and_sort(diverse_query(q, summaries.sum_0, separator), chunks, reranker, shards);
    auto list_1 = score_and_sort(diverse_query(q, summaries.sum_1, separator), chunks, reranker, shards);
    return interleave_merge(list_0.to_ranked(), list_1.to_ranked(), n_rank);
}

inline std::vector<DocumentChunk> select_context(const RankedList& ranked, std::size_t n_ans) {
    std::vector<DocumentChunk> out;
    for (std::size_t i = 0; i < std::min(n_ans, ranked.size()); ++i) out.push_back(ranked[i].chunk);
    return out;
}

}  // namespace kadr
