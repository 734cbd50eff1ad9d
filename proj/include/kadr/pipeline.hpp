#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kadr/backends.hpp"
#include "kadr/core.hpp"
#include "kadr/fusion.hpp"
#include "kadr/knowledge.hpp"
#include "kadr/prompts.hpp"
#include "kadr/rerank.hpp"
#include "kadr/staged_executor.hpp"
#include "kadr/text.hpp"

namespace kadr {

enum class Stage { retrieved, initial_ranked, declared, summarized, diverse_ranked, answered };

inline constexpr std::array<Stage, 6> all_stages = {Stage::retrieved,  Stage::initial_ranked, Stage::declared,
                                                    Stage::summarized, Stage::diverse_ranked, Stage::answered};

inline std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::retrieved: return "retrieved";
        case Stage::initial_ranked: return "initial_ranked";
        case Stage::declared: return "declared";
        case Stage::summarized: return "summarized";
        case Stage::diverse_ranked: return "diverse_ranked";
        case Stage::answered: return "answered";
    }
    return "unknown";
}

struct StageError {
    Stage stage = Stage::retrieved;
    ErrorCode code = ErrorCode::stage_failure;
    std::string message;
};

struct FallbackFlags {
    bool retrieval_degraded = false;
    bool knowledge_disabled = false;
    bool declaration_failed = false;
    bool summarization_failed = false;
    bool answer_truncated = false;
};

struct AnswerResult {
    std::string question_id;
    std::string answer;
    std::vector<std::string> context_chunk_ids;
    std::vector<std::string> ranking;  // final order, identity keys
    std::optional<KnowledgeSummaries> summaries;
    std::map<std::string, double> timings_ms;
    FallbackFlags flags;
    std::vector<std::string> warnings;
    std::optional<StageError> error;

    bool ok() const { return !error.has_value(); }
};

/// Output switches for the results JSONL. Timings vary run to run, so they
/// are off by default to keep result files byte-comparable.
struct ResultFormat {
    bool timings = false;
    bool ranking = false;
};

inline nlohmann::json answer_result_to_json(const AnswerResult& r, const ResultFormat& fmt = {}) {
    nlohmann::json j;
    j["question_id"] = r.question_id;
    j["status"] = r.ok() ? "ok" : "error";
    j["flags"] = {{"retrieval_degraded", r.flags.retrieval_degraded},
                  {"knowledge_disabled", r.flags.knowledge_disabled},
                  {"declaration_failed", r.flags.declaration_failed},
                  {"summarization_failed", r.flags.summarization_failed},
                  {"answer_truncated", r.flags.answer_truncated}};
    j["warnings"] = r.warnings;
    if (r.ok()) {
        j["answer"] = r.answer;
        j["context_chunk_ids"] = r.context_chunk_ids;
        j["summaries"] = r.summaries ? nlohmann::json::array({r.summaries->sum_0, r.summaries->sum_1}) : nlohmann::json(nullptr);
    } else {
        j["error"] = {{"stage", to_string(r.error->stage)}, {"code", to_string(r.error->code)}, {"message", r.error->message}};
    }
    if (fmt.ranking) j["ranking"] = r.ranking;
    if (fmt.timings) j["timings_ms"] = r.timings_ms;
    return j;
}

inline void write_results_jsonl(std::ostream& out, const std::vector<AnswerResult>& results, const ResultFormat& fmt = {}) {
    for (const auto& r : results) out << answer_result_to_json(r, fmt).dump() << '\n';
}

/// Numbered plain-text blocks in rank order: "[1] text\n\n[2] text".
inline std::string render_context(const std::vector<DocumentChunk>& context) {
    std::string out;
    for (std::size_t i = 0; i < context.size(); ++i) {
        if (i) out += "\n\n";
        out += "[" + std::to_string(i + 1) + "] " + context[i].text;
    }
    return out;
}

inline CompletionRequest build_answer_prompt(const Question& q, const std::vector<DocumentChunk>& context, int max_tokens = 512,
                                             double temperature = 0.0, std::optional<std::int64_t> seed = std::nullopt) {
    require(!q.text.empty(), "question text must be nonempty");
    CompletionRequest req;
    req.system = std::string(prompts::answer_system);
    req.user = text::render(prompts::answer_user,
                            std::map<std::string, std::string>{{"question", q.text}, {"documents", render_context(context)}});
    req.max_tokens = max_tokens;
    req.temperature = temperature;
    req.seed = seed;
    return req;
}

/// First `limit` whitespace-separated words of s, or s unchanged.
inline std::string truncate_words(const std::string& s, std::size_t limit, bool* truncated = nullptr) {
    std::size_t words = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && text::is_space(s[i])) ++i;
        if (i == s.size()) break;
        if (words == limit) {
            if (truncated) *truncated = true;
            return std::string(text::trim(std::string_view(s).substr(0, i)));
        }
        while (i < s.size() && !text::is_space(s[i])) ++i;
        ++words;
    }
    if (truncated) *truncated = false;
    return s;
}

// ---------------------------------------------------------------------------
// Stages. A QueryState travels through the six stages; each stage appends a
// StageResult to its trace. Once an error is recorded the remaining stages
// pass the state through untouched.
// ---------------------------------------------------------------------------

struct StageResult {
    std::string question_id;
    Stage stage = Stage::retrieved;
    std::chrono::nanoseconds timing{0};
    std::vector<std::string> warnings;
};

struct QueryState {
    Question question;
    RankedList retrieved;
    ScoredList initial;
    std::vector<KnowledgeDeclaration> declarations;
    RankedList final_ranking;
    std::vector<StageResult> trace;
    AnswerResult result;
};

namespace detail {

inline LlmCallOptions llm_options(const PipelineConfig& cfg, std::size_t workers) {
    LlmCallOptions o;
    o.max_tokens = cfg.llm_max_tokens;
    o.temperature = cfg.temperature;
    o.seed = cfg.seed;
    o.workers = workers;
    return o;
}

template <typename Fn>
void run_stage(QueryState& s, Stage stage, Fn&& fn) {
    if (s.result.error) return;
    StageResult sr;
    sr.question_id = s.question.question_id;
    sr.stage = stage;
    const auto start = std::chrono::steady_clock::now();
    try {
        fn(sr.warnings);
    } catch (const Error& e) {
        s.result.error = StageError{stage, e.code(), e.what()};
    } catch (const std::exception& e) {
        s.result.error = StageError{stage, ErrorCode::stage_failure, e.what()};
    }
    sr.timing = std::chrono::steady_clock::now() - start;
    s.result.timings_ms[std::string(to_string(stage))] = std::chrono::duration<double, std::milli>(sr.timing).count();
    for (const auto& w : sr.warnings) s.result.warnings.push_back(w);
    s.trace.push_back(std::move(sr));
}

}  // namespace detail

inline void stage_retrieve(QueryState& s, const PipelineConfig& cfg, const Backends& b) {
    detail::run_stage(s, Stage::retrieved, [&](std::vector<std::string>& warnings) {
        require(!s.question.text.empty(), "question text must be nonempty");
        auto hybrid = hybrid_retrieve(s.question, cfg, *b.sparse, *b.dense);
        if (!hybrid.warnings.empty()) s.result.flags.retrieval_degraded = true;
        warnings = std::move(hybrid.warnings);
        s.retrieved = std::move(hybrid.ranked);
        if (s.retrieved.size() == 0) warnings.push_back("retrieval returned no documents");
    });
}

inline void stage_initial_rerank(QueryState& s, const PipelineConfig& cfg, const Backends& b) {
    detail::run_stage(s, Stage::initial_ranked, [&](std::vector<std::string>&) {
        if (s.retrieved.size() == 0) return;
        s.initial = initial_rerank(s.question, s.retrieved, *b.reranker, static_cast<std::size_t>(cfg.workers.rerank_shards));
        s.retrieved = RankedList{};
    });
}

inline void stage_declare(QueryState& s, const PipelineConfig& cfg, const Backends& b) {
    detail::run_stage(s, Stage::declared, [&](std::vector<std::string>& warnings) {
        if (cfg.n_know == 0) {
            s.result.flags.knowledge_disabled = true;
            return;
        }
        auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg.n_know), s.initial.size());
        if (n == 0) {
            s.result.flags.declaration_failed = true;
            warnings.push_back("no documents to declare knowledge for");
            return;
        }
        try {
            auto out = declare(s.question, s.initial.top(n).chunks(), n, static_cast<std::size_t>(cfg.n_retry), *b.llm,
                               detail::llm_options(cfg, static_cast<std::size_t>(cfg.workers.declare_shards)));
            warnings = std::move(out.warnings);
            s.declarations = std::move(out.declarations);
        } catch (const Error& e) {
            s.result.flags.declaration_failed = true;
            warnings.push_back(std::string("declaration failed, keeping initial ranking: ") + e.what());
        }
    });
}

inline void stage_summarize(QueryState& s, const PipelineConfig& cfg, const Backends& b) {
    detail::run_stage(s, Stage::summarized, [&](std::vector<std::string>& warnings) {
        if (s.declarations.empty()) return;
        try {
            s.result.summaries = summarize(s.question, s.declarations, static_cast<std::size_t>(cfg.n_retry), *b.llm, detail::llm_options(cfg, 1)).summaries;
        } catch (const Error& e) {
            s.result.flags.summarization_failed = true;
            warnings.push_back(std::string("summarization failed, keeping initial ranking: ") + e.what());
        }
    });
}

inline void stage_diverse_rerank(QueryState& s, const PipelineConfig& cfg, const Backends& b) {
    detail::run_stage(s, Stage::diverse_ranked, [&](std::vector<std::string>&) {
        const auto n_rank = static_cast<std::size_t>(cfg.n_rank);
        auto candidates = s.initial.top(n_rank);
        if (s.result.summaries && !candidates.empty()) {
            s.final_ranking = diverse_rerank(s.question, *s.result.summaries, candidates, *b.reranker, n_rank, cfg.query_separator,
                                             static_cast<std::size_t>(cfg.workers.rerank_shards));
        } else {
            s.final_ranking = candidates.to_ranked();
        }
        s.result.ranking = s.final_ranking.keys();
    });
}

/// Answer generation retries transport failures and empty completions up
/// to n_retry times, with seed + attempt.
inline void stage_answer(QueryState& s, const PipelineConfig& cfg, const Backends& b) {
    detail::run_stage(s, Stage::answered, [&](std::vector<std::string>& warnings) {
        auto context = select_context(s.final_ranking, static_cast<std::size_t>(cfg.n_ans));
        for (const auto& c : context) s.result.context_chunk_ids.push_back(c.chunk_id);
        std::string last_error;
        for (int attempt = 0; attempt <= cfg.n_retry; ++attempt) {
            try {
                auto req = build_answer_prompt(s.question, context, cfg.answer_max_tokens, cfg.temperature, cfg.seed + attempt);
                auto answer = std::string(text::trim(b.llm->llm_complete(req)));
                if (answer.empty()) throw Error(ErrorCode::empty_completion, "answer is blank");
                if (cfg.truncate_answer) {
                    answer = truncate_words(answer, static_cast<std::size_t>(cfg.answer_word_limit), &s.result.flags.answer_truncated);
                }
                s.result.answer = std::move(answer);
                if (attempt > 0) warnings.push_back("answer generation needed " + std::to_string(attempt + 1) + " attempts");
                return;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::transport && e.code() != ErrorCode::empty_completion) throw;
                last_error = e.what();
            }
        }
        throw Error(ErrorCode::stage_failure, "answer generation failed after " + std::to_string(cfg.n_retry + 1) + " attempts: " + last_error);
    });
}

inline QueryState make_query_state(const Question& q) {
    QueryState s;
    s.question = q;
    s.result.question_id = q.question_id;
    return s;
}

/// Runs the six stages for one question. Per-question failures are returned
/// in AnswerResult::error, never thrown.
inline AnswerResult run_query(const Question& q, const PipelineConfig& cfg, const Backends& b, std::vector<StageResult>* trace = nullptr) {
    auto s = make_query_state(q);
    stage_retrieve(s, cfg, b);
    stage_initial_rerank(s, cfg, b);
    stage_declare(s, cfg, b);
    stage_summarize(s, cfg, b);
    stage_diverse_rerank(s, cfg, b);
    stage_answer(s, cfg, b);
    if (trace) *trace = std::move(s.trace);
    return std::move(s.result);
}

// ---------------------------------------------------------------------------
// Batch execution
// ---------------------------------------------------------------------------

struct BatchStats {
    std::size_t max_in_flight = 0;
    std::size_t in_flight_bound = 0;
    std::vector<std::size_t> queue_high_water;
    std::size_t order_violations = 0;
    std::size_t failed = 0;
};

/// Trace is in stage order and never skips a stage before an error.
inline bool trace_in_order(const std::vector<StageResult>& trace) {
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (trace[i].stage != all_stages[i]) return false;
    }
    return true;
}

/// Runs every question through the staged executor: one thread pool per
/// stage (sizes from cfg.workers) joined by bounded queues of
/// cfg.queue_capacity. Results come back in input order.
inline std::vector<AnswerResult> run_batch(const std::vector<Question>& questions, const PipelineConfig& cfg, const Backends& b,
                                           BatchStats* stats = nullptr) {
    auto w = [](int n) { return static_cast<std::size_t>(n); };
    std::vector<StageSpec<QueryState>> stages = {
        {"retrieve", w(cfg.workers.retrieve), [&](QueryState& s) { stage_retrieve(s, cfg, b); }},
        {"initial_rerank", w(cfg.workers.initial_rerank), [&](QueryState& s) { stage_initial_rerank(s, cfg, b); }},
        {"declare", w(cfg.workers.declare), [&](QueryState& s) { stage_declare(s, cfg, b); }},
        {"summarize", w(cfg.workers.summarize), [&](QueryState& s) { stage_summarize(s, cfg, b); }},
        {"diverse_rerank", w(cfg.workers.diverse_rerank), [&](QueryState& s) { stage_diverse_rerank(s, cfg, b); }},
        {"answer", w(cfg.workers.answer), [&](QueryState& s) { stage_answer(s, cfg, b); }},
    };
    StagedExecutor<QueryState> executor(std::move(stages), w(cfg.queue_capacity));
    std::vector<QueryState> states;
    states.reserve(questions.size());
    for (const auto& q : questions) states.push_back(make_query_state(q));
    auto done = executor.run(std::move(states));

    BatchStats local;
    local.max_in_flight = executor.stats().max_in_flight;
    local.queue_high_water = executor.stats().queue_high_water;
    local.in_flight_bound = executor.in_flight_bound();
    std::vector<AnswerResult> out;
    out.reserve(done.size());
    for (auto& s : done) {
        if (!trace_in_order(s.trace)) ++local.order_violations;
        if (s.result.error) ++local.failed;
        out.push_back(std::move(s.result));
    }
    if (stats) *stats = std::move(local);
    return out;
}

}  // namespace kadr
