// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kadr/backend_factory.hpp"
#include "kadr/concurrency.hpp"
#include "kadr/config.hpp"
#include "kadr/datagen.hpp"
#include "kadr/eval.hpp"
#include "kadr/fusion.hpp"
#include "kadr/heuristic_llm.hpp"
#include "kadr/knowledge.hpp"
#include "kadr/mock_backends.hpp"
#include "kadr/pipeline.hpp"
#include "kadr/prompts.hpp"
#include "kadr/records.hpp"
#include "kadr/rerank.hpp"

using namespace kadr;

namespace {

using Keys = std::vector<std::string>;
using Clock = std::chrono::steady_clock;

const std::filesystem::path kFixtures = KADR_FIXTURES;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int prec = 2) {
    std::ostringstream s;
    s.precision(prec);
    s << std::fixed << v;
    return s.str();
}

RankedList ranked(const Keys& ids) {
    std::vector<DocumentChunk> chunks;
    for (const auto& id : ids) chunks.push_back({id, id, "text of " + id, Origin::sparse});
    return RankedList::from_chunks(std::move(chunks));
}

DocumentChunk chunk(const std::string& id, const std::string& text) { return {id, id, text, Origin::sparse}; }

std::optional<std::string> no_env(const std::string&) { return std::nullopt; }

// 1 -------------------------------------------------------------------------

Keys reference_merge(Keys first, Keys second, std::size_t n) {
    Keys out;
    while (out.size() < n && !(first.empty() && second.empty())) {
        if (first.empty()) std::swap(first, second);
        std::string head = first.front();
        out.push_back(head);
        auto strike = [&](Keys& k) { k.erase(std::remove(k.begin(), k.end(), head), k.end()); };
        strike(first);
        strike(second);
        std::swap(first, second);
    }
    return out;
}

Verdict merge_oracle() {
    auto start = Clock::now();
    std::mt19937 rng(20250);
    std::size_t mismatches = 0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        std::size_t la = rng() % 51;
        std::size_t lb = rng() % 51;
        // duplicate rate sweeps 0..100%: b reuses a's keys with probability dup
        double dup = static_cast<double>(t % 101) / 100.0;
        Keys a;
        for (std::size_t i = 0; i < la; ++i) a.push_back("a" + std::to_string(i));
        std::shuffle(a.begin(), a.end(), rng);
        Keys pool = a;
        std::shuffle(pool.begin(), pool.end(), rng);
        Keys b;
        std::size_t next_shared = 0;
        for (std::size_t i = 0; i < lb; ++i) {
            bool share = next_shared < pool.size() && std::uniform_real_distribution<double>(0, 1)(rng) < dup;
            b.push_back(share ? pool[next_shared++] : "b" + std::to_string(i));
        }
        std::size_t n = 1 + rng() % 110;
        if (interleave_merge(ranked(a), ranked(b), n).keys() != reference_merge(a, b, n)) ++mismatches;
    }
    double secs = seconds_since(start);
    return {mismatches == 0 && secs < 5.0, std::to_string(trials) + " pairs, " + std::to_string(mismatches) + " mismatches, " + fmt(secs) + " s"};
}

// 2 -------------------------------------------------------------------------

Verdict filter_truth_table() {
    std::size_t cases = 0;
    std::size_t mismatches = 0;
    for (auto label : all_labels) {
        for (unsigned mask = 0; mask < 16; ++mask) {
            KnowledgeDeclaration d;
            d.thoughts = "reasoning";
            d.question_elements = {"e1", "e2", "e3", "e4"};
            for (int i = 0; i < 4; ++i) {
                if (mask & (1u << i)) d.doc_element_indices.insert(i + 1);
            }
            std::size_t given = d.doc_element_indices.size();
            // fully supporting: identical to the required knowledge
            // partially relevant: non-empty strict subset
            // irrelevant: strict subset, may be empty
            bool expected = label == RelevanceLabel::fully_supporting     ? given == 4
                            : label == RelevanceLabel::partially_relevant ? given > 0 && given < 4
                                                                          : given < 4;
            auto report = check_rules(d, label);
            bool ok = report.accepted == expected && (expected || report.failed_rule == AcceptanceRule::coverage);
            if (!ok) ++mismatches;
            ++cases;
        }
    }
    return {cases == 48 && mismatches == 0, std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

// 3 -------------------------------------------------------------------------

Verdict recall_metric() {
    std::mt19937 rng(31);
    std::size_t mismatches = 0;
    std::size_t monotone_violations = 0;
    std::size_t half_credit = 0;
    for (int t = 0; t < 1000; ++t) {
        std::size_t len = rng() % 40;
        Keys ranking;
        for (std::size_t i = 0; i < len; ++i) ranking.push_back("d" + std::to_string(i));
        std::shuffle(ranking.begin(), ranking.end(), rng);
        Keys gold = {"d" + std::to_string(rng() % 50)};
        if (rng() % 2) gold.push_back("d" + std::to_string(rng() % 50));
        std::set<std::string> distinct(gold.begin(), gold.end());
        double prev = 0.0;
        for (std::size_t k = 1; k <= 45; ++k) {
            std::size_t found = 0;
            for (const auto& g : distinct) {
                for (std::size_t i = 0; i < k && i < ranking.size(); ++i) found += ranking[i] == g;
            }
            double expected = static_cast<double>(found) / static_cast<double>(distinct.size());
            double got = recall_at_k(std::span<const std::string>(ranking), gold, k);
            if (got != expected) ++mismatches;
            if (got < prev) ++monotone_violations;
            if (distinct.size() == 2 && got == 0.5) ++half_credit;
            prev = got;
        }
    }
    return {mismatches == 0 && monotone_violations == 0 && half_credit > 0,
            "1000 instances, " + std::to_string(mismatches) + " mismatches, " + std::to_string(monotone_violations) + " monotonicity violations, " +
                std::to_string(half_credit) + " half-credit evaluations"};
}

// 4 -------------------------------------------------------------------------

Verdict parser_fixtures() {
    auto d = parse_declaration(prompts::declaration_demo_output);
    bool decl_ok = d.question_elements.size() == 4 && d.doc_element_indices == std::set<int>{1, 2, 3};
    auto s = parse_summaries(prompts::summarization_demo_output);
    bool sum_ok = s.sum_0 == "Barry Schwartz's jam experiment and its findings on decision-making paralysis." &&
                  s.sum_1 == "U-Theory's approach to decision-making, emphasizing the balance between too few and too many options.";
    std::mt19937 rng(8);
    std::size_t false_accepts = 0;
    std::size_t false_rejects = 0;
    for (int t = 0; t < 10000; ++t) {
        int r = static_cast<int>(rng() % 11) - 5;
        int f = static_cast<int>(rng() % 11) - 5;
        bool valid = r >= -1 && r <= 2 && f >= -1 && f <= 1;
        std::string text = "```json\n{\"relevance\": " + std::to_string(r) + ", \"faithfulness\": " + std::to_string(f) + "}\n```";
        bool accepted = true;
        try {
            auto js = parse_judge(text);
            accepted = js.relevance == r && js.faithfulness == f;
        } catch (const Error&) {
            accepted = false;
        }
        if (accepted && !valid) ++false_accepts;
        if (!accepted && valid) ++false_rejects;
    }
    return {decl_ok && sum_ok && false_accepts == 0 && false_rejects == 0,
            std::string("declaration ") + (decl_ok ? "ok" : "WRONG") + ", summaries " + (sum_ok ? "ok" : "WRONG") + ", judge fuzz 10000: " +
                std::to_string(false_accepts) + " false accepts, " + std::to_string(false_rejects) + " false rejects"};
}

// 5 -------------------------------------------------------------------------

Verdict config_fidelity() {
    PipelineConfig cfg;
    bool ok = cfg.n_ret == 2000 && cfg.n_know == 5 && cfg.n_ans == 10;
    return {ok, "n_ret=" + std::to_string(cfg.n_ret) + " n_know=" + std::to_string(cfg.n_know) + " n_ans=" + std::to_string(cfg.n_ans)};
}

// 6 -------------------------------------------------------------------------

Verdict concurrency_determinism() {
    auto start = Clock::now();
    auto cfg = load_config(kFixtures / "mock_config.json", no_env);
    auto questions = load_questions(kFixtures / "questions.jsonl");
    auto backends = make_backends(cfg);
    auto run = [&](int w) {
        cfg.workers = {w, w, w, w, w, w, w, w};
        BatchStats stats;
        std::ostringstream out;
        write_results_jsonl(out, run_batch(questions, cfg, backends, &stats), {false, true});
        return std::make_pair(out.str(), stats);
    };
    auto [one, s1] = run(1);
    auto [four, s4] = run(4);
    bool identical = one == four;

    std::size_t join_failures = 0;
    std::size_t combos = 0;
    std::mt19937 rng(6);
    for (int n = 0; n <= 64; ++n) {
        std::vector<int> items(static_cast<std::size_t>(n));
        for (auto& x : items) x = static_cast<int>(rng());
        for (std::size_t w = 1; w <= 9; ++w) {
            auto shards = split_ordered(items, w);
            std::shuffle(shards.begin(), shards.end(), rng);
            if (join_ordered(shards) != items) ++join_failures;
            ++combos;
        }
    }
    double secs = seconds_since(start);
    return {questions.size() == 50 && identical && join_failures == 0 && s4.max_in_flight <= s4.in_flight_bound && secs < 30.0,
            std::to_string(questions.size()) + " questions, outputs " + (identical ? "identical" : "DIFFER") + " for all=1 vs all=4; " +
                std::to_string(combos) + " split/join cases, " + std::to_string(join_failures) + " failures; max in flight " +
                std::to_string(s4.max_in_flight) + " <= " + std::to_string(s4.in_flight_bound) + "; " + fmt(secs) + " s"};
}

// 7 -------------------------------------------------------------------------

Verdict forced_fusion() {
    std::vector<DocumentChunk> sparse_list = {chunk("A", "a"), chunk("x1", "x1"), chunk("x2", "x2"), chunk("B", "b")};
    std::vector<DocumentChunk> dense_list = {chunk("B", "b"), chunk("y1", "y1"), chunk("A", "a"), chunk("y2", "y2")};
    FixedRetriever sparse(Origin::sparse, sparse_list);
    FixedRetriever dense(Origin::dense, dense_list);
    PipelineConfig cfg;
    cfg.n_ret = 4;
    cfg.n_rank = 4;
    cfg.n_know = 4;
    cfg.n_ans = 4;
    Question q{"adv", "compare A and B"};
    Keys gold = {"A", "B"};
    double r_sparse = recall_at_k(sparse.search(q.text, 4), gold, 2);
    double r_dense = recall_at_k(dense.search(q.text, 4), gold, 2);
    double r_hybrid = recall_at_k(hybrid_retrieve(q, cfg, sparse, dense).ranked, gold, 2);
    return {r_hybrid == 1.0 && r_sparse == 0.5 && r_dense == 0.5,
            "recall@2 hybrid " + fmt(r_hybrid) + ", sparse " + fmt(r_sparse) + ", dense " + fmt(r_dense)};
}

// 8 -------------------------------------------------------------------------

Verdict diverse_rerank_bias() {
    MockReranker reranker;
    Question q{"two", "compare founding of arlen and bexley"};
    std::vector<DocumentChunk> docs = {
        chunk("GA", "arlen founding history arlen founded by ana"),
        chunk("GB", "bexley rivers trade salt ships"),
        chunk("D", "compare founding of arlen"),
    };
    Keys gold = {"GA", "GB"};
    auto initial = initial_rerank(q, RankedList::from_chunks(docs), reranker);
    double r_initial = recall_at_k(initial.to_ranked(), gold, 2);
    KnowledgeSummaries summaries{"arlen founded by ana", "bexley rivers trade salt ships"};
    auto diverse = diverse_rerank(q, summaries, initial, reranker, 2);
    double r_diverse = recall_at_k(diverse, gold, 2);
    auto top = diverse.keys();
    return {r_diverse == 1.0 && r_initial == 0.5,
            "top-2 gold recall: diverse " + fmt(r_diverse) + " [" + text::join(top, ",") + "], initial " + fmt(r_initial) + " [" +
                text::join(initial.top(2).to_ranked().keys(), ",") + "]"};
}

// 9 -------------------------------------------------------------------------

std::string random_declaration(std::mt19937& rng) {
    switch (rng() % 4) {
        case 0: return "not a declaration";
        case 1: return "";
        default: break;
    }
    std::size_t n = 1 + rng() % 5;
    std::string s = "Thoughts:\nsome reasoning\n\nKnowledge Elements:\n";
    for (std::size_t i = 0; i < n; ++i) s += std::to_string(i + 1) + ". element " + std::to_string(rng() % 4) + "\n";
    s += "\nGiven Knowledge:\n";
    std::vector<std::string> given;
    for (std::size_t i = 1; i <= n + 1; ++i) {
        if (rng() % 2) given.push_back(std::to_string(i));
    }
    s += given.empty() ? "None" : text::join(given, ", ");
    return s;
}

Verdict datagen_self_consistency() {
    std::mt19937 rng(99);
    std::size_t over_budget = 0;
    std::size_t counter_mismatch = 0;
    std::size_t reparse_failures = 0;
    std::size_t accepted = 0;
    for (int run = 0; run < 1000; ++run) {
        auto label = all_labels[rng() % 3];
        std::size_t n_rs = 1 + rng() % 8;
        std::vector<std::string> script;
        for (std::size_t i = 0; i < 12; ++i) script.push_back(random_declaration(rng));
        auto calls = std::make_shared<std::atomic<std::size_t>>(0);
        FunctionLlm llm([script, calls](const CompletionRequest&) {
            auto i = calls->fetch_add(1);
            return script[std::min(i, script.size() - 1)];
        });
        LabeledChunk c{chunk("c", "a document"), label, "q"};
        auto r = rejection_sample({"q", "a question?"}, c, n_rs, llm);
        if (calls->load() > n_rs) ++over_budget;
        if (calls->load() != r.attempts) ++counter_mismatch;
        if (r.example) {
            ++accepted;
            if (!check_rules(try_parse_declaration(r.example->target_output), label).accepted) ++reparse_failures;
        } else if (r.attempts != n_rs) {
            ++counter_mismatch;
        }
    }

    // the dataset writer over the fixture corpus
    auto records = load_qa_records(kFixtures / "qa_records.jsonl");
    MockSparseRetriever sparse(load_corpus_jsonl(kFixtures / "corpus.jsonl"));
    HeuristicLlm heuristic;
    DatagenOptions opts;
    opts.quotas = {20, 20, 20};
    opts.n_rs = 4;
    std::ostringstream out;
    build_sft_dataset(records, opts, sparse, heuristic, out);
    std::size_t emitted = 0;
    auto written = out.str();
    for (auto line : text::split_lines(written)) {
        if (text::trim(line).empty()) continue;
        ++emitted;
        auto j = nlohmann::json::parse(line);
        auto name = j.at("label").get<std::string>();
        RelevanceLabel label = RelevanceLabel::irrelevant;
        for (auto l : all_labels) {
            if (to_string(l) == name) label = l;
        }
        if (!check_rules(try_parse_declaration(j.at("output").get<std::string>()), label).accepted) ++reparse_failures;
    }
    return {over_budget == 0 && counter_mismatch == 0 && reparse_failures == 0 && accepted > 0 && emitted > 0,
            "1000 scripted runs (" + std::to_string(accepted) + " accepted), " + std::to_string(over_budget) + " over budget, " +
                std::to_string(counter_mismatch) + " counter mismatches; " + std::to_string(emitted) + " fixture examples; " +
                std::to_string(reparse_failures) + " re-check failures"};
}

// 10 ------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict golden_run() {
    auto out = std::filesystem::temp_directory_path() / ("kadr-acceptance-" + std::to_string(std::random_device{}()) + ".jsonl");
    std::string cmd = std::string("\"") + KADR_CLI + "\" run --questions \"" + (kFixtures / "questions.jsonl").string() + "\" --config \"" +
                      (kFixtures / "mock_config.json").string() + "\" --out \"" + out.string() + "\" 2>/dev/null";
    auto start = Clock::now();
    int rc = std::system(cmd.c_str());
    double secs = seconds_since(start);
    bool same = rc == 0 && slurp(out) == slurp(kFixtures / "golden_results.jsonl");
    std::error_code ec;
    std::filesystem::remove(out, ec);
    return {same && secs < 60.0, std::string("exit ") + std::to_string(rc) + ", output " + (same ? "matches" : "DIFFERS FROM") + " golden file, " +
                                     fmt(secs) + " s"};
}

}  // namespace

int main() {
    log::set_level(log::Level::error);
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"merge oracle equivalence", merge_oracle},
        {"filter truth table", filter_truth_table},
        {"recall metric", recall_metric},
        {"parser fixtures", parser_fixtures},
        {"config fidelity", config_fidelity},
        {"concurrency determinism", concurrency_determinism},
        {"forced-fusion property", forced_fusion},
        {"diverse-rerank bias mitigation", diverse_rerank_bias},
        {"datagen self-consistency", datagen_self_consistency},
        {"end-to-end golden run", golden_run},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (v.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": " << v.detail << std::endl;
        failed += v.pass ? 0 : 1;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
