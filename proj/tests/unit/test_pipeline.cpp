#include <gtest/gtest.h>

#include <sstream>

#include "kadr/backend_factory.hpp"
#include "kadr/config.hpp"
#include "kadr/mock_backends.hpp"
#include "kadr/pipeline.hpp"
#include "kadr/records.hpp"
#include "support.hpp"

using namespace kadr;

namespace {

using Keys = std::vector<std::string>;

std::size_t word_count(const std::string& s) {
    std::istringstream in(s);
    std::size_t n = 0;
    for (std::string w; in >> w;) ++n;
    return n;
}

std::optional<std::string> no_env(const std::string&) { return std::nullopt; }

std::string decl_reply(const std::string& given) { return "Thoughts:\nt\n\nKnowledge Elements:\n1. alpha facts\n2. beta facts\n\nGiven Knowledge:\n" + given; }

std::string summaries_reply() { return "Thoughts: t\n```json\n[\"alpha facts\", \"beta facts\"]\n```"; }

/// Replies by prompt family; each family can be switched to garbage.
struct FakeLlm {
    bool bad_declarations = false;
    bool bad_summaries = false;
    int answer_failures = 0;  // transport failures before a good answer
    std::string answer = "the answer";

    std::shared_ptr<CountingLlm> make() {
        auto self = this;
        auto failures = std::make_shared<std::atomic<int>>(0);
        auto fn = std::make_shared<FunctionLlm>([self, failures](const CompletionRequest& r) -> std::string {
            if (r.system == declaration_system_prompt()) return self->bad_declarations ? "garbage" : decl_reply("1");
            if (r.system == summarization_system_prompt()) return self->bad_summaries ? "garbage" : summaries_reply();
            if (r.system == prompts::answer_system) {
                if (failures->fetch_add(1) < self->answer_failures) throw Error(ErrorCode::transport, "connection reset");
                return self->answer;
            }
            throw Error(ErrorCode::no_script, "unexpected prompt");
        });
        return std::make_shared<CountingLlm>(fn);
    }
};

std::vector<DocumentChunk> world() {
    return {
        test::chunk("a", "alpha town history and alpha facts"),
        test::chunk("b", "beta town trade and beta facts"),
        test::chunk("c", "gamma river fish"),
        test::chunk("d", "alpha beta question words"),
        test::chunk("e", "epsilon unrelated text"),
        test::chunk("f", "zeta more unrelated text"),
    };
}

PipelineConfig small_cfg() {
    PipelineConfig cfg;
    cfg.n_ret = 6;
    cfg.n_rank = 4;
    cfg.n_know = 2;
    cfg.n_ans = 2;
    cfg.n_retry = 1;
    return validate_config(cfg);
}

Backends small_backends(std::shared_ptr<const LlmClient> llm) {
    auto w = world();
    Backends b;
    b.sparse = std::make_shared<FixedRetriever>(Origin::sparse, std::vector<DocumentChunk>{w[0], w[2], w[4]});
    b.dense = std::make_shared<FixedRetriever>(Origin::dense, std::vector<DocumentChunk>{w[1], w[3], w[5]});
    b.reranker = std::make_shared<MockReranker>();
    b.llm = std::move(llm);
    return b;
}

const Question kQ{"q1", "alpha beta question words"};

Keys initial_top(const PipelineConfig& cfg, const Backends& b) {
    auto hybrid = hybrid_retrieve(kQ, cfg, *b.sparse, *b.dense);
    auto init = initial_rerank(kQ, hybrid.ranked, *b.reranker);
    return init.top(static_cast<std::size_t>(cfg.n_rank)).to_ranked().keys();
}

class DownRetriever final : public Retriever {
public:
    explicit DownRetriever(Origin o) : Retriever(o) {}

protected:
    std::vector<RankedEntry> do_search(const std::string&, int) const override { throw Error(ErrorCode::transport, "refused"); }
};

PipelineConfig fixture_cfg() { return load_config(test::fixtures() / "mock_config.json", no_env); }

std::string results_text(const std::vector<AnswerResult>& results) {
    std::ostringstream out;
    write_results_jsonl(out, results, {false, true});
    return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Answer prompt
// ---------------------------------------------------------------------------

TEST(AnswerPrompt, NumberedContextBlocks) {
    std::vector<DocumentChunk> ctx;
    for (int i = 1; i <= 10; ++i) ctx.push_back(test::chunk("c" + std::to_string(i), "text " + std::to_string(i)));
    auto req = build_answer_prompt({"q", "Why?"}, ctx);
    std::string expected = "Question: Why?\nContext: ";
    for (int i = 1; i <= 10; ++i) expected += (i > 1 ? "\n\n[" : "[") + std::to_string(i) + "] text " + std::to_string(i);
    EXPECT_EQ(req.user, expected);
    EXPECT_EQ(req.system, prompts::answer_system);
    EXPECT_EQ(req.max_tokens, 512);
}

TEST(AnswerPrompt, EmptyContext) { EXPECT_EQ(build_answer_prompt({"q", "Why?"}, {}).user, "Question: Why?\nContext: "); }

TEST(TruncateWords, LimitsLongAnswers) {
    std::string sentence;
    for (int i = 0; i < 250; ++i) sentence += (i ? " w" : "w") + std::to_string(i);
    bool truncated = false;
    auto out = truncate_words(sentence, 200, &truncated);
    EXPECT_TRUE(truncated);
    EXPECT_EQ(word_count(out), 200u);
    EXPECT_EQ(out.substr(out.size() - 5), " w199");
    EXPECT_EQ(truncate_words("  short answer ", 200, &truncated), "  short answer ");
    EXPECT_FALSE(truncated);
}

// ---------------------------------------------------------------------------
// Single query
// ---------------------------------------------------------------------------

TEST(RunQuery, FullPathUsesSummaries) {
    FakeLlm fake;
    auto llm = fake.make();
    auto b = small_backends(llm);
    auto cfg = small_cfg();
    std::vector<StageResult> trace;
    auto r = run_query(kQ, cfg, b, &trace);
    ASSERT_TRUE(r.ok()) << r.error->message;
    ASSERT_TRUE(r.summaries.has_value());
    EXPECT_EQ(r.summaries->sum_0, "alpha facts");
    EXPECT_EQ(r.answer, "the answer");
    EXPECT_EQ(r.context_chunk_ids.size(), 2u);
    EXPECT_EQ(llm->calls(), 2u + 1 + 1);
    EXPECT_EQ(trace.size(), 6u);
    EXPECT_TRUE(trace_in_order(trace));

    // the final order is the diverse merge over the initial top n_rank
    auto top = initial_top(cfg, b);
    std::vector<DocumentChunk> cand;
    for (const auto& k : top) {
        for (const auto& c : world()) {
            if (c.chunk_id == k) cand.push_back(c);
        }
    }
    auto l0 = score_and_sort(diverse_query(kQ, "alpha facts"), cand, *b.reranker);
    auto l1 = score_and_sort(diverse_query(kQ, "beta facts"), cand, *b.reranker);
    EXPECT_EQ(r.ranking, interleave_merge(l0.to_ranked(), l1.to_ranked(), 4).keys());
}

TEST(RunQuery, ZeroKnowSkipsKnowledgeStages) {
    FakeLlm fake;
    auto llm = fake.make();
    auto b = small_backends(llm);
    auto cfg = small_cfg();
    cfg.n_know = 0;
    auto r = run_query(kQ, cfg, b);
    ASSERT_TRUE(r.ok());
    EXPECT_TRUE(r.flags.knowledge_disabled);
    EXPECT_FALSE(r.summaries.has_value());
    EXPECT_EQ(llm->calls(), 1u);
    EXPECT_EQ(r.ranking, initial_top(cfg, b));
}

TEST(RunQuery, DeclarationFailureFallsBack) {
    FakeLlm fake;
    fake.bad_declarations = true;
    auto b = small_backends(fake.make());
    auto cfg = small_cfg();
    auto r = run_query(kQ, cfg, b);
    ASSERT_TRUE(r.ok());
    EXPECT_TRUE(r.flags.declaration_failed);
    EXPECT_FALSE(r.flags.summarization_failed);
    EXPECT_FALSE(r.summaries.has_value());
    EXPECT_EQ(r.ranking, initial_top(cfg, b));
    EXPECT_FALSE(r.warnings.empty());
}

TEST(RunQuery, SummarizationFailureFallsBack) {
    FakeLlm fake;
    fake.bad_summaries = true;
    auto llm = fake.make();
    auto b = small_backends(llm);
    auto cfg = small_cfg();
    auto r = run_query(kQ, cfg, b);
    ASSERT_TRUE(r.ok());
    EXPECT_TRUE(r.flags.summarization_failed);
    EXPECT_FALSE(r.summaries.has_value());
    EXPECT_EQ(r.ranking, initial_top(cfg, b));
    // 2 declarations + (1 + n_retry) summarization attempts + 1 answer
    EXPECT_EQ(llm->calls(), 2u + 2 + 1);
}

TEST(RunQuery, AnswerRetriesTransportErrors) {
    FakeLlm fake;
    fake.answer_failures = 1;
    auto b = small_backends(fake.make());
    auto r = run_query(kQ, small_cfg(), b);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.answer, "the answer");
    EXPECT_NE(r.warnings.back().find("2 attempts"), std::string::npos);
}

TEST(RunQuery, AnswerFailureIsErrorRecord) {
    FakeLlm fake;
    fake.answer_failures = 100;
    auto b = small_backends(fake.make());
    auto r = run_query(kQ, small_cfg(), b);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.error->stage, Stage::answered);
    auto j = answer_result_to_json(r);
    EXPECT_EQ(j["status"], "error");
    EXPECT_EQ(j["error"]["stage"], "answered");
    EXPECT_FALSE(j.contains("answer"));
}

TEST(RunQuery, RetrievalOutageIsErrorRecord) {
    FakeLlm fake;
    auto b = small_backends(fake.make());
    b.sparse = std::make_shared<DownRetriever>(Origin::sparse);
    b.dense = std::make_shared<DownRetriever>(Origin::dense);
    std::vector<StageResult> trace;
    auto r = run_query(kQ, small_cfg(), b, &trace);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.error->stage, Stage::retrieved);
    EXPECT_EQ(r.error->code, ErrorCode::backend_unavailable);
    EXPECT_EQ(answer_result_to_json(r)["error"]["code"], "backend_unavailable");
    EXPECT_EQ(trace.size(), 1u);
}

TEST(RunQuery, OneRetrieverDownDegrades) {
    FakeLlm fake;
    auto b = small_backends(fake.make());
    b.dense = std::make_shared<DownRetriever>(Origin::dense);
    auto r = run_query(kQ, small_cfg(), b);
    ASSERT_TRUE(r.ok());
    EXPECT_TRUE(r.flags.retrieval_degraded);
    EXPECT_NE(r.warnings[0].find("dense retrieval failed"), std::string::npos);
}

TEST(RunQuery, TruncatesLongAnswersWhenEnabled) {
    FakeLlm fake;
    fake.answer = "";
    for (int i = 0; i < 300; ++i) fake.answer += "word ";
    auto b = small_backends(fake.make());
    auto cfg = small_cfg();
    EXPECT_FALSE(run_query(kQ, cfg, b).flags.answer_truncated);
    cfg.truncate_answer = true;
    auto r = run_query(kQ, cfg, b);
    EXPECT_TRUE(r.flags.answer_truncated);
    EXPECT_EQ(word_count(r.answer), 200u);
}

TEST(ResultJson, ShapeAndOptionalFields) {
    FakeLlm fake;
    auto b = small_backends(fake.make());
    auto r = run_query(kQ, small_cfg(), b);
    auto j = answer_result_to_json(r);
    for (const char* key : {"question_id", "status", "flags", "warnings", "answer", "context_chunk_ids", "summaries"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_FALSE(j.contains("timings_ms"));
    EXPECT_FALSE(j.contains("ranking"));
    auto full = answer_result_to_json(r, {true, true});
    EXPECT_EQ(full["timings_ms"].size(), 6u);
    EXPECT_EQ(full["ranking"].size(), 4u);
}

// ---------------------------------------------------------------------------
// Batch
// ---------------------------------------------------------------------------

TEST(RunBatch, DeterministicAcrossWorkerCounts) {
    auto questions = load_questions(test::fixtures() / "questions.jsonl");
    auto cfg = fixture_cfg();
    auto b = make_backends(cfg);
    BatchStats s1;
    auto seq = run_batch(questions, cfg, b, &s1);

    cfg.workers = {4, 4, 4, 4, 4, 4, 3, 2};
    BatchStats s4;
    auto par = run_batch(questions, cfg, b, &s4);
    EXPECT_EQ(results_text(seq), results_text(par));
    EXPECT_EQ(s1.failed, 0u);
    EXPECT_EQ(s4.order_violations, 0u);
    EXPECT_LE(s4.max_in_flight, s4.in_flight_bound);

    cfg.queue_capacity = 1;
    BatchStats s_cap;
    auto cap = run_batch(questions, cfg, b, &s_cap);
    EXPECT_EQ(results_text(seq), results_text(cap));
    EXPECT_LE(s_cap.max_in_flight, s_cap.in_flight_bound);
    for (auto hw : s_cap.queue_high_water) EXPECT_LE(hw, 1u);
}

TEST(RunBatch, MatchesSingleQueries) {
    auto questions = load_questions(test::fixtures() / "questions.jsonl");
    questions.resize(6);
    auto cfg = fixture_cfg();
    auto b = make_backends(cfg);
    auto batch = run_batch(questions, cfg, b);
    std::vector<AnswerResult> single;
    for (const auto& q : questions) single.push_back(run_query(q, cfg, b));
    EXPECT_EQ(results_text(batch), results_text(single));
}

TEST(RunBatch, PoisonedQuestionIsIsolated) {
    auto questions = load_questions(test::fixtures() / "questions.jsonl");
    ASSERT_EQ(questions.size(), 50u);
    questions[17].text = "";
    auto cfg = fixture_cfg();
    cfg.workers = {2, 2, 2, 2, 2, 2, 1, 1};
    BatchStats stats;
    auto results = run_batch(questions, cfg, make_backends(cfg), &stats);
    ASSERT_EQ(results.size(), 50u);
    EXPECT_EQ(stats.failed, 1u);
    EXPECT_EQ(stats.order_violations, 0u);
    for (std::size_t i = 0; i < results.size(); ++i) {
        EXPECT_EQ(results[i].question_id, questions[i].question_id);
        EXPECT_EQ(results[i].ok(), i != 17);
    }
    EXPECT_EQ(results[17].error->stage, Stage::retrieved);
    EXPECT_EQ(results[17].error->code, ErrorCode::invalid_argument);
}

TEST(RunBatch, EmptyBatch) {
    auto cfg = fixture_cfg();
    EXPECT_TRUE(run_batch({}, cfg, make_backends(cfg)).empty());
}
