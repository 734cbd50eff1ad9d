#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kadr/error.hpp"

namespace kadr {

enum class Origin { sparse, dense, both, synthetic };

inline std::string_view to_string(Origin o) {
    switch (o) {
        case Origin::sparse: return "sparse";
        case Origin::dense: return "dense";
        case Origin::both: return "both";
        case Origin::synthetic: return "synthetic";
    }
    return "unknown";
}

struct DocumentChunk {
    std::string chunk_id;
    std::string doc_id;
    std::string text;
    Origin origin = Origin::sparse;

    bool valid() const { return !chunk_id.empty() && !doc_id.empty() && !text.empty(); }

    friend bool operator==(const DocumentChunk&, const DocumentChunk&) = default;
};

/// Deduplication key: the parent document when known, otherwise the chunk.
inline const std::string& identity_key(const DocumentChunk& chunk) {
    return chunk.doc_id.empty() ? chunk.chunk_id : chunk.doc_id;
}

enum class QuestionKind { single_doc, multi_doc, unknown };

inline std::string_view to_string(QuestionKind k) {
    switch (k) {
        case QuestionKind::single_doc: return "single_doc";
        case QuestionKind::multi_doc: return "multi_doc";
        case QuestionKind::unknown: return "unknown";
    }
    return "unknown";
}

inline QuestionKind question_kind_from_string(std::string_view s) {
    if (s == "single_doc") return QuestionKind::single_doc;
    if (s == "multi_doc") return QuestionKind::multi_doc;
    if (s == "unknown" || s.empty()) return QuestionKind::unknown;
    throw Error(ErrorCode::invalid_argument, "unknown question kind '" + std::string(s) + "'");
}

struct Question {
    std::string question_id;
    std::string text;
    QuestionKind kind = QuestionKind::unknown;
};

struct RankedEntry {
    DocumentChunk chunk;
    std::optional<double> score;
};

/// Ordered candidate list. Identity keys are unique; when every entry carries
/// a score the scores are non-increasing. Both are checked on construction.
class RankedList {
public:
    RankedList() = default;

    explicit RankedList(std::vector<RankedEntry> entries) : entries_(std::move(entries)) { check(); }

    static RankedList from_chunks(std::vector<DocumentChunk> chunks) {
        std::vector<RankedEntry> entries;
        entries.reserve(chunks.size());
        for (auto& c : chunks) entries.push_back({std::move(c), std::nullopt});
        return RankedList(std::move(entries));
    }

    const std::vector<RankedEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const RankedEntry& operator[](std::size_t i) const { return entries_[i]; }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    std::vector<DocumentChunk> chunks() const {
        std::vector<DocumentChunk> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.chunk);
        return out;
    }

    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(identity_key(e.chunk));
        return out;
    }

    RankedList truncated(std::size_t n) const {
        if (n >= entries_.size()) return *this;
        return RankedList(std::vector<RankedEntry>(entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(n)));
    }

private:
    void check() const {
        std::unordered_set<std::string_view> seen;
        seen.reserve(entries_.size());
        bool all_scored = true;
        for (const auto& e : entries_) {
            if (!seen.insert(identity_key(e.chunk)).second) {
                throw Error(ErrorCode::invalid_argument, "duplicate identity key '" + identity_key(e.chunk) + "' in ranked list");
            }
            all_scored = all_scored && e.score.has_value();
        }
        if (all_scored) {
            for (std::size_t i = 1; i < entries_.size(); ++i) {
                if (*entries_[i].score > *entries_[i - 1].score) {
                    throw Error(ErrorCode::invalid_argument, "ranked list scores are not non-increasing");
                }
            }
        }
    }

    std::vector<RankedEntry> entries_;
};

struct BackendEndpoint {
    std::string base_url;
    std::int64_t timeout_ms = 30000;
    int max_retries = 2;
    std::optional<std::string> auth_token;
};

/// Worker counts for the six pipeline stages plus the two fan-out points
/// inside a stage (reranker batch shards and per-document declaration).
struct StageWorkers {
    int retrieve = 1;
    int initial_rerank = 1;
    int declare = 1;
    int summarize = 1;
    int diverse_rerank = 1;
    int answer = 1;
    int rerank_shards = 1;
    int declare_shards = 1;
};

struct PipelineConfig {
    int n_ret = 2000;
    int n_rank = 400;
    int n_know = 5;
    int n_ans = 10;
    int n_rs = 16;
    /// Re-prompts after a parse failure in declaration and summarization.
    int n_retry = 2;

    BackendEndpoint sparse;
    BackendEndpoint dense;
    BackendEndpoint reranker;
    BackendEndpoint llm;
    std::string mock_corpus;

    StageWorkers workers;
    int queue_capacity = 16;

    std::int64_t seed = 0;
    bool sparse_first = true;
    std::string query_separator = " ; ";
    int answer_max_tokens = 512;
    int llm_max_tokens = 1024;
    double temperature = 0.0;
    bool truncate_answer = false;
    int answer_word_limit = 200;
};

namespace detail {
inline void check_positive(std::vector<std::string>& errs, const char* name, long long v) {
    if (v < 1) errs.push_back(std::string(name) + " must be >= 1 (got " + std::to_string(v) + ")");
}
inline void check_endpoint(std::vector<std::string>& errs, const char* name, const BackendEndpoint& ep) {
    if (ep.timeout_ms <= 0) errs.push_back(std::string(name) + ".timeout_ms must be > 0");
    if (ep.max_retries < 0) errs.push_back(std::string(name) + ".max_retries must be >= 0");
}
}  // namespace detail

/// Checks every ordering and positivity constraint; all violations are
/// reported together, each naming the offending fields.
inline PipelineConfig validate_config(PipelineConfig cfg) {
    std::vector<std::string> errs;
    detail::check_positive(errs, "n_ret", cfg.n_ret);
    detail::check_positive(errs, "n_rank", cfg.n_rank);
    detail::check_positive(errs, "n_ans", cfg.n_ans);
    detail::check_positive(errs, "n_rs", cfg.n_rs);
    if (cfg.n_know < 0) errs.push_back("n_know must be >= 0");
    if (cfg.n_retry < 0) errs.push_back("n_retry must be >= 0");
    if (cfg.n_ans > cfg.n_rank) errs.push_back("n_ans (" + std::to_string(cfg.n_ans) + ") must be <= n_rank (" + std::to_string(cfg.n_rank) + ")");
    if (cfg.n_rank > cfg.n_ret) errs.push_back("n_rank (" + std::to_string(cfg.n_rank) + ") must be <= n_ret (" + std::to_string(cfg.n_ret) + ")");
    if (cfg.n_know > cfg.n_rank) errs.push_back("n_know (" + std::to_string(cfg.n_know) + ") must be <= n_rank (" + std::to_string(cfg.n_rank) + ")");
    detail::check_positive(errs, "workers.retrieve", cfg.workers.retrieve);
    detail::check_positive(errs, "workers.initial_rerank", cfg.workers.initial_rerank);
    detail::check_positive(errs, "workers.declare", cfg.workers.declare);
    detail::check_positive(errs, "workers.summarize", cfg.workers.summarize);
    detail::check_positive(errs, "workers.diverse_rerank", cfg.workers.diverse_rerank);
    detail::check_positive(errs, "workers.answer", cfg.workers.answer);
    detail::check_positive(errs, "workers.rerank_shards", cfg.workers.rerank_shards);
    detail::check_positive(errs, "workers.declare_shards", cfg.workers.declare_shards);
    detail::check_positive(errs, "queue_capacity", cfg.queue_capacity);
    detail::check_positive(errs, "answer_max_tokens", cfg.answer_max_tokens);
    detail::check_positive(errs, "llm_max_tokens", cfg.llm_max_tokens);
    detail::check_positive(errs, "answer_word_limit", cfg.answer_word_limit);
    if (cfg.temperature < 0.0) errs.push_back("temperature must be >= 0");
    if (cfg.query_separator.empty()) errs.push_back("query_separator must be nonempty");
    detail::check_endpoint(errs, "sparse", cfg.sparse);
    detail::check_endpoint(errs, "dense", cfg.dense);
    detail::check_endpoint(errs, "reranker", cfg.reranker);
    detail::check_endpoint(errs, "llm", cfg.llm);
    if (!errs.empty()) {
        std::string msg = "invalid config: ";
        for (std::size_t i = 0; i < errs.size(); ++i) msg += (i ? "; " : "") + errs[i];
        throw Error(ErrorCode::invalid_config, msg);
    }
    return cfg;
}

struct QARecord {
    Question question;
    std::string answer;
    std::vector<std::string> gold_doc_ids;
    std::map<std::string, std::string> categories;

    void check() const {
        if (question.text.empty()) throw Error(ErrorCode::invalid_argument, "record " + question.question_id + ": empty question");
        if (gold_doc_ids.empty() || gold_doc_ids.size() > 2) {
            throw Error(ErrorCode::invalid_argument, "record " + question.question_id + ": gold_doc_ids must hold 1 or 2 ids");
        }
        bool multi = gold_doc_ids.size() == 2;
        if (multi != (question.kind == QuestionKind::multi_doc)) {
            throw Error(ErrorCode::invalid_argument, "record " + question.question_id + ": two gold documents iff kind is multi_doc");
        }
    }
};

}  // namespace kadr
