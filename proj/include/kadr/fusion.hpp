#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "kadr/backends.hpp"
#include "kadr/core.hpp"
#include "kadr/log.hpp"

namespace kadr {

/// Alternating deduplicated merge. Takes turns first, second, first, ...;
/// on its turn a source skips entries whose identity key was already
/// emitted and contributes the next new one. When one source runs dry the
/// other is drained. Stops at n entries. Scores are dropped because the two
/// sources are not on a common scale.
inline RankedList interleave_merge(const RankedList& first, const RankedList& second, std::size_t n) {
    const RankedList* sources[2] = {&first, &second};
    std::size_t pos[2] = {0, 0};
    std::unordered_set<std::string> emitted;
    std::vector<RankedEntry> out;
    out.reserve(std::min(n, first.size() + second.size()));
    std::size_t turn = 0;
    auto next_new = [&](std::size_t s) -> const RankedEntry* {
        const auto& src = *sources[s];
        while (pos[s] < src.size()) {
            const auto& e = src[pos[s]++];
            if (emitted.insert(identity_key(e.chunk)).second) return &e;
        }
        return nullptr;
    };
    while (out.size() < n) {
        const RankedEntry* e = next_new(turn);
        if (!e) e = next_new(1 - turn);
        if (!e) break;
        out.push_back({e->chunk, std::nullopt});
        turn = 1 - turn;
    }
    return RankedList(std::move(out));
}

struct HybridResult {
    RankedList ranked;
    std::vector<std::string> warnings;
};

/// Queries both retrievers with the question text, then interleaves the two
/// rankings (sparse first unless configured otherwise). Chunks found by both
/// retrievers are tagged Origin::both. If one retriever fails the other's
/// list is used alone and a warning is recorded; if both fail the error is
/// reported as backend_unavailable.
inline HybridResult hybrid_retrieve(const Question& q, const PipelineConfig& cfg, const Retriever& sparse, const Retriever& dense) {
    require(!q.text.empty(), "question text must be nonempty");
    std::optional<RankedList> sparse_hits;
    std::optional<RankedList> dense_hits;
    std::vector<std::string> warnings;
    std::string sparse_error;
    std::string dense_error;
    try {
        sparse_hits = sparse.search(q.text, cfg.n_ret);
    } catch (const Error& e) {
        sparse_error = e.what();
    }
    try {
        dense_hits = dense.search(q.text, cfg.n_ret);
    } catch (const Error& e) {
        dense_error = e.what();
    }
    if (!sparse_hits && !dense_hits) {
        throw Error(ErrorCode::backend_unavailable, "both retrievers failed: sparse: " + sparse_error + "; dense: " + dense_error);
    }
    const auto n = static_cast<std::size_t>(cfg.n_ret);
    if (!sparse_hits || !dense_hits) {
        warnings.push_back(!sparse_hits ? "sparse retrieval failed, using dense only: " + sparse_error
                                        : "dense retrieval failed, using sparse only: " + dense_error);
        log::warn("fusion", warnings.back());
        const auto& survivor = sparse_hits ? *sparse_hits : *dense_hits;
        return {interleave_merge(survivor, RankedList{}, n), std::move(warnings)};
    }

    auto merged = cfg.sparse_first ? interleave_merge(*sparse_hits, *dense_hits, n) : interleave_merge(*dense_hits, *sparse_hits, n);
    std::unordered_set<std::string> in_sparse;
    std::unordered_set<std::string> in_dense;
    for (const auto& e : *sparse_hits) in_sparse.insert(identity_key(e.chunk));
    for (const auto& e : *dense_hits) in_dense.insert(identity_key(e.chunk));
    std::vector<RankedEntry> tagged = merged.entries();
    for (auto& e : tagged) {
        const auto& key = identity_key(e.chunk);
        if (in_sparse.count(key) && in_dense.count(key)) e.chunk.origin = Origin::both;
    }
    return {RankedList(std::move(tagged)), std::move(warnings)};
}

}  // namespace kadr
