#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kadr/backends.hpp"
#include "kadr/text.hpp"

namespace kadr {

using Corpus = std::vector<DocumentChunk>;

/// One {"chunk_id","doc_id","text"} object per line; blank lines skipped.
inline Corpus load_corpus_jsonl(std::istream& in, const std::string& source = "<stream>") {
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> chunk_ids;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        DocumentChunk c;
        try {
            auto j = nlohmann::json::parse(line);
            c.chunk_id = j.at("chunk_id").get<std::string>();
            c.doc_id = j.value("doc_id", c.chunk_id);
            c.text = j.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::io, source + ":" + std::to_string(lineno) + ": bad corpus line: " + e.what());
        }
        if (!c.valid()) throw Error(ErrorCode::io, source + ":" + std::to_string(lineno) + ": chunk_id, doc_id and text must be nonempty");
        if (!chunk_ids.insert(c.chunk_id).second) {
            throw Error(ErrorCode::io, source + ":" + std::to_string(lineno) + ": duplicate chunk_id " + c.chunk_id);
        }
        corpus.push_back(std::move(c));
    }
    return corpus;
}

inline Corpus load_corpus_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open corpus " + path.string());
    return load_corpus_jsonl(in, path.string());
}

namespace detail {

inline std::vector<std::string> distinct_tokens(std::string_view s) {
    auto toks = text::tokenize(s);
    std::sort(toks.begin(), toks.end());
    toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
    return toks;
}

inline std::size_t sorted_overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::size_t n = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

/// Stable sort by descending score; equal scores keep corpus order.
inline std::vector<RankedEntry> rank_by_score(const Corpus& corpus, const std::vector<double>& scores, bool drop_zero) {
    std::vector<std::size_t> idx(corpus.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<RankedEntry> out;
    for (auto i : idx) {
        if (drop_zero && scores[i] <= 0.0) continue;
        out.push_back({corpus[i], scores[i]});
    }
    return out;
}

}  // namespace detail

/// Lexical mock: number of distinct query terms present in the chunk,
/// divided by sqrt(distinct chunk terms). Chunks with no overlap are not
/// returned.
class MockSparseRetriever final : public Retriever {
public:
    explicit MockSparseRetriever(Corpus corpus) : Retriever(Origin::sparse), corpus_(std::move(corpus)) {
        terms_.reserve(corpus_.size());
        for (const auto& c : corpus_) terms_.push_back(detail::distinct_tokens(c.text));
    }

    static double score(const std::vector<std::string>& query_terms, const std::vector<std::string>& doc_terms) {
        if (doc_terms.empty()) return 0.0;
        return static_cast<double>(detail::sorted_overlap(query_terms, doc_terms)) / std::sqrt(static_cast<double>(doc_terms.size()));
    }

    const Corpus& corpus() const { return corpus_; }

protected:
    std::vector<RankedEntry> do_search(const std::string& query, int) const override {
        auto q = detail::distinct_tokens(query);
        std::vector<double> scores(corpus_.size());
        for (std::size_t i = 0; i < corpus_.size(); ++i) scores[i] = score(q, terms_[i]);
        return detail::rank_by_score(corpus_, scores, true);
    }

private:
    Corpus corpus_;
    std::vector<std::vector<std::string>> terms_;
};

/// Embedding mock: bag-of-words sum of per-token +/-1 vectors drawn from a
/// seeded hash, ranked by cosine. Every chunk is returned.
class MockDenseRetriever final : public Retriever {
public:
    static constexpr std::size_t dim = 64;
    using Vector = std::array<double, dim>;

    MockDenseRetriever(Corpus corpus, std::int64_t seed) : Retriever(Origin::dense), corpus_(std::move(corpus)), seed_(seed) {
        embeddings_.reserve(corpus_.size());
        for (const auto& c : corpus_) embeddings_.push_back(embed(c.text, seed_));
    }

    static Vector token_vector(const std::string& token, std::int64_t seed) {
        std::uint64_t state = text::fnv1a64(token) ^ (static_cast<std::uint64_t>(seed) * 0x9e3779b97f4a7c15ULL);
        Vector v{};
        std::uint64_t bits = 0;
        for (std::size_t d = 0; d < dim; ++d) {
            if (d % 64 == 0) bits = text::splitmix64(state);
            v[d] = ((bits >> (d % 64)) & 1U) ? 1.0 : -1.0;
        }
        return v;
    }

    static Vector embed(std::string_view s, std::int64_t seed) {
        Vector v{};
        for (const auto& tok : text::tokenize(s)) {
            auto t = token_vector(tok, seed);
            for (std::size_t d = 0; d < dim; ++d) v[d] += t[d];
        }
        return v;
    }

    static double cosine(const Vector& a, const Vector& b) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t d = 0; d < dim; ++d) {
            dot += a[d] * b[d];
            na += a[d] * a[d];
            nb += b[d] * b[d];
        }
        if (na == 0.0 || nb == 0.0) return 0.0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
    }

    const Corpus& corpus() const { return corpus_; }

protected:
    std::vector<RankedEntry> do_search(const std::string& query, int) const override {
        auto q = embed(query, seed_);
        std::vector<double> scores(corpus_.size());
        for (std::size_t i = 0; i < corpus_.size(); ++i) scores[i] = cosine(q, embeddings_[i]);
        return detail::rank_by_score(corpus_, scores, false);
    }

private:
    Corpus corpus_;
    std::int64_t seed_;
    std::vector<Vector> embeddings_;
};

/// Returns a fixed ranking per query (or a default ranking), ignoring k
/// beyond truncation. Used to build adversarial retrieval fixtures.
class FixedRetriever final : public Retriever {
public:
    FixedRetriever(Origin origin, std::vector<DocumentChunk> default_ranking)
        : Retriever(origin), default_(std::move(default_ranking)) {}

    void set_ranking(const std::string& query, std::vector<DocumentChunk> ranking) { by_query_[query] = std::move(ranking); }

protected:
    std::vector<RankedEntry> do_search(const std::string& query, int) const override {
        auto it = by_query_.find(query);
        const auto& src = it == by_query_.end() ? default_ : it->second;
        std::vector<RankedEntry> out;
        for (const auto& c : src) out.push_back({c, std::nullopt});
        return out;
    }

private:
    std::vector<DocumentChunk> default_;
    std::map<std::string, std::vector<DocumentChunk>> by_query_;
};

/// Binary cosine between distinct token sets of query and document:
/// |Q ∩ D| / sqrt(|Q| |D|). A document identical to the query scores 1.
class MockReranker final : public Reranker {
public:
    static double overlap_score(std::string_view query, std::string_view doc) {
        auto q = detail::distinct_tokens(query);
        auto d = detail::distinct_tokens(doc);
        if (q.empty() || d.empty()) return 0.0;
        return static_cast<double>(detail::sorted_overlap(q, d)) / std::sqrt(static_cast<double>(q.size() * d.size()));
    }

protected:
    std::vector<double> do_score(const std::string& query, const std::vector<DocumentChunk>& docs) const override {
        auto q = detail::distinct_tokens(query);
        std::vector<double> out;
        out.reserve(docs.size());
        for (const auto& doc : docs) {
            auto d = detail::distinct_tokens(doc.text);
            out.push_back(q.empty() || d.empty()
                              ? 0.0
                              : static_cast<double>(detail::sorted_overlap(q, d)) / std::sqrt(static_cast<double>(q.size() * d.size())));
        }
        return out;
    }
};

inline std::string request_digest(std::string_view system, std::string_view user) {
    std::string key;
    key.reserve(system.size() + user.size() + 1);
    key.append(system).push_back('\x1f');
    key.append(user);
    return text::hex64(text::fnv1a64(key));
}

/// Replays registered responses keyed by a digest of (system, user).
/// Several responses for one key are served in order; the last one repeats.
class ScriptedLlm final : public LlmClient {
public:
    ScriptedLlm() = default;
    explicit ScriptedLlm(std::shared_ptr<const LlmClient> fallback) : fallback_(std::move(fallback)) {}

    void add(const std::string& system, const std::string& user, std::string response) {
        std::lock_guard lock(mu_);
        scripts_[request_digest(system, user)].push_back(std::move(response));
    }

    void add(const CompletionRequest& req, std::string response) { add(req.system, req.user, std::move(response)); }

    /// Reads {"system","user","response"} JSONL.
    void load_jsonl(std::istream& in) {
        std::string line;
        while (std::getline(in, line)) {
            if (text::trim(line).empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                add(j.at("system").get<std::string>(), j.at("user").get<std::string>(), j.at("response").get<std::string>());
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::io, std::string("bad LLM script line: ") + e.what());
            }
        }
    }

protected:
    std::string do_complete(const CompletionRequest& req) const override {
        {
            std::lock_guard lock(mu_);
            auto it = scripts_.find(request_digest(req.system, req.user));
            if (it != scripts_.end()) {
                auto& queue = it->second;
                std::string out = queue.front();
                if (queue.size() > 1) queue.pop_front();
                return out;
            }
        }
        if (fallback_) return fallback_->llm_complete(req);
        throw Error(ErrorCode::no_script, "no script for request digest " + request_digest(req.system, req.user));
    }

private:
    mutable std::mutex mu_;
    mutable std::unordered_map<std::string, std::deque<std::string>> scripts_;
    std::shared_ptr<const LlmClient> fallback_;
};

/// Adapts any callable to the LLM client interface.
class FunctionLlm final : public LlmClient {
public:
    using Fn = std::function<std::string(const CompletionRequest&)>;
    explicit FunctionLlm(Fn fn) : fn_(std::move(fn)) {}

protected:
    std::string do_complete(const CompletionRequest& req) const override { return fn_(req); }

private:
    Fn fn_;
};

/// Counts completions issued through it (including failed ones).
class CountingLlm final : public LlmClient {
public:
    explicit CountingLlm(std::shared_ptr<const LlmClient> inner) : inner_(std::move(inner)) {}

    std::size_t calls() const { return calls_.load(); }
    void reset() { calls_.store(0); }

protected:
    std::string do_complete(const CompletionRequest& req) const override {
        calls_.fetch_add(1);
        return inner_->llm_complete(req);
    }

private:
    std::shared_ptr<const LlmClient> inner_;
    mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace kadr
