// kadr: command-line front end for the answer pipeline, the SFT data
// curator, the evaluation harness and the fixture backends.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "kadr/backend_factory.hpp"
#include "kadr/config.hpp"
#include "kadr/datagen.hpp"
#include "kadr/eval.hpp"
#include "kadr/heuristic_llm.hpp"
#include "kadr/http_backends.hpp"
#include "kadr/mock_backends.hpp"
#include "kadr/pipeline.hpp"
#include "kadr/records.hpp"
#include "kadr/server.hpp"

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw kadr::Error(kadr::ErrorCode::io, "cannot write " + path);
    return out;
}

kadr::PipelineConfig config_or_default(const std::string& path) {
    if (path.empty()) return kadr::validate_config(kadr::apply_env_overrides(kadr::PipelineConfig{}));
    return kadr::load_config(path);
}

std::vector<std::size_t> parse_ks(const std::string& s) {
    std::vector<std::size_t> ks;
    for (const auto& part : kadr::text::split(s, ',')) {
        try {
            ks.push_back(static_cast<std::size_t>(std::stoul(std::string(kadr::text::trim(part)))));
        } catch (const std::exception&) {
            throw kadr::Error(kadr::ErrorCode::invalid_argument, "bad --ks value '" + part + "'");
        }
    }
    return ks;
}

kadr::Quotas parse_quotas(const std::string& s) {
    auto parts = kadr::text::split(s, ',');
    if (parts.size() != 3) throw kadr::Error(kadr::ErrorCode::invalid_argument, "--quotas takes fs,pr,ir");
    std::size_t v[3];
    for (int i = 0; i < 3; ++i) {
        try {
            v[i] = static_cast<std::size_t>(std::stoul(parts[static_cast<std::size_t>(i)]));
        } catch (const std::exception&) {
            throw kadr::Error(kadr::ErrorCode::invalid_argument, "bad --quotas value '" + parts[static_cast<std::size_t>(i)] + "'");
        }
    }
    return kadr::Quotas{v[0], v[1], v[2]};
}

struct RunArgs {
    std::string questions, config, out, ranking_out;
    bool timings = false;
};

int cmd_run(const RunArgs& a) {
    auto cfg = kadr::load_config(a.config);
    auto backends = kadr::make_backends(cfg);
    auto questions = kadr::load_questions(a.questions);
    kadr::BatchStats stats;
    auto results = kadr::run_batch(questions, cfg, backends, &stats);
    auto out = open_out(a.out);
    kadr::write_results_jsonl(out, results, {a.timings, false});
    if (!a.ranking_out.empty()) {
        auto rank = open_out(a.ranking_out);
        for (const auto& r : results) rank << nlohmann::json{{"question_id", r.question_id}, {"ranking", r.ranking}}.dump() << '\n';
    }
    std::cerr << "answered " << results.size() - stats.failed << "/" << results.size() << " questions; max in flight "
              << stats.max_in_flight << " (bound " << stats.in_flight_bound << ")\n";
    return 0;
}

int cmd_serve(const std::string& config, const std::string& host, int port) {
    auto cfg = kadr::load_config(config);
    httplib::Server server;
    std::cerr << "serving on " << host << ":" << port << "\n";
    kadr::serve(server, cfg, kadr::make_backends(cfg), host, port);
    return 0;
}

struct DatagenArgs {
    std::string records, quotas = "1000,2500,6500", out, config, docs, summary;
    std::size_t n_rs = 16;
    std::size_t workers = 1;
};

int cmd_datagen(const DatagenArgs& a) {
    kadr::DatagenOptions opts;
    opts.quotas = parse_quotas(a.quotas);
    opts.n_rs = a.n_rs;
    opts.workers = a.workers;
    std::shared_ptr<const kadr::Retriever> sparse;
    std::shared_ptr<const kadr::LlmClient> llm;
    if (!a.config.empty()) {
        auto cfg = kadr::load_config(a.config);
        auto b = kadr::make_backends(cfg);
        sparse = b.sparse;
        llm = b.llm;
        opts.llm.seed = cfg.seed;
        opts.llm.max_tokens = cfg.llm_max_tokens;
    } else if (!a.docs.empty()) {
        sparse = std::make_shared<kadr::MockSparseRetriever>(kadr::load_corpus_jsonl(std::filesystem::path(a.docs)));
        llm = std::make_shared<kadr::HeuristicLlm>();
    } else {
        throw kadr::Error(kadr::ErrorCode::invalid_argument, "datagen needs --config or --docs");
    }
    auto records = kadr::load_qa_records(a.records);
    auto out = open_out(a.out);
    auto summary = kadr::build_sft_dataset(records, opts, *sparse, *llm, out);
    auto j = summary.to_json().dump(2);
    if (!a.summary.empty()) open_out(a.summary) << j << '\n';
    std::cout << j << '\n';
    return summary.shortfall() ? 3 : 0;
}

struct EvalArgs {
    std::string in, records, config, csv, out, name = "run";
    std::string ks = "3,5,10,20";
};

void emit(const EvalArgs& a, const nlohmann::json& report) {
    if (!a.out.empty()) open_out(a.out) << report.dump(2) << '\n';
    std::cout << report.dump(2) << '\n';
}

int cmd_eval_recall(const EvalArgs& a) {
    std::map<std::string, std::vector<std::string>> golds;
    if (!a.records.empty()) {
        for (const auto& rec : kadr::load_qa_records(a.records)) golds[rec.question.question_id] = rec.gold_doc_ids;
    }
    std::vector<kadr::RecallCase> cases;
    for (const auto& j : kadr::read_jsonl(a.in)) {
        kadr::RecallCase c;
        try {
            c.ranked_keys = j.at("ranking").get<std::vector<std::string>>();
            if (j.contains("gold_doc_ids")) {
                c.gold_doc_ids = j["gold_doc_ids"].get<std::vector<std::string>>();
            } else {
                auto it = golds.find(j.at("question_id").get<std::string>());
                if (it == golds.end()) throw kadr::Error(kadr::ErrorCode::invalid_argument, "no gold documents for " + j["question_id"].dump());
                c.gold_doc_ids = it->second;
            }
        } catch (const nlohmann::json::exception& e) {
            throw kadr::Error(kadr::ErrorCode::invalid_argument, a.in + ": bad ranking line: " + e.what());
        }
        cases.push_back(std::move(c));
    }
    auto report = kadr::recall_table(cases, parse_ks(a.ks));
    if (!a.csv.empty()) open_out(a.csv) << kadr::recall_csv({{a.name, report}});
    emit(a, kadr::eval_report_json(&report, nullptr));
    return 0;
}

int cmd_eval_judge(const EvalArgs& a) {
    auto cfg = config_or_default(a.config);
    std::shared_ptr<const kadr::LlmClient> llm;
    if (cfg.llm.base_url.empty()) {
        llm = std::make_shared<kadr::HeuristicLlm>();
    } else {
        llm = kadr::make_backends(cfg).llm;
    }
    std::vector<kadr::JudgeItem> items;
    for (const auto& j : kadr::read_jsonl(a.in)) items.push_back(kadr::judge_item_from_json(j));
    kadr::LlmCallOptions opts;
    opts.seed = cfg.seed;
    opts.workers = static_cast<std::size_t>(cfg.workers.answer);
    auto result = kadr::judge_run(items, *llm, opts);
    for (const auto& e : result.exclusions) std::cerr << "excluded: " << e << "\n";
    emit(a, kadr::eval_report_json(nullptr, &result));
    return 0;
}

int cmd_mock_corpus(const std::string& docs, int port, const std::string& host, std::int64_t seed) {
    auto corpus = kadr::load_corpus_jsonl(std::filesystem::path(docs));
    if (port <= 0) {
        std::set<std::string> doc_ids;
        std::size_t words = 0;
        for (const auto& c : corpus) {
            doc_ids.insert(c.doc_id);
            words += kadr::text::word_count(c.text);
        }
        std::cout << nlohmann::json{{"chunks", corpus.size()}, {"documents", doc_ids.size()}, {"words", words}}.dump() << '\n';
        return 0;
    }
    httplib::Server server;
    kadr::mount_backend_service(server, std::make_shared<kadr::MockSparseRetriever>(corpus), std::make_shared<kadr::MockDenseRetriever>(corpus, seed),
                                std::make_shared<kadr::MockReranker>(), std::make_shared<kadr::HeuristicLlm>());
    std::cerr << "mock backends for " << corpus.size() << " chunks on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) throw kadr::Error(kadr::ErrorCode::io, "cannot listen on " + host + ":" + std::to_string(port));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-aware diverse reranking RAG pipeline"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");
    app.set_version_flag("--version", std::string(kadr::version));

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Answer a questions JSONL file");
    run_cmd->add_option("--questions", run.questions, "Questions JSONL")->required();
    run_cmd->add_option("--config", run.config, "Pipeline config JSON")->required();
    run_cmd->add_option("--out", run.out, "Results JSONL")->required();
    run_cmd->add_option("--ranking-out", run.ranking_out, "Also write final rankings as JSONL");
    run_cmd->add_flag("--timings", run.timings, "Include per-stage timings in results");

    std::string serve_config;
    std::string host = "127.0.0.1";
    int serve_port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "Serve POST /answer and GET /health");
    serve_cmd->add_option("--config", serve_config, "Pipeline config JSON")->required();
    serve_cmd->add_option("--port", serve_port, "Port")->check(CLI::Range(1, 65535));
    serve_cmd->add_option("--host", host, "Bind address");

    DatagenArgs dg;
    auto* dg_cmd = app.add_subcommand("datagen", "Curate SFT examples for knowledge declaration");
    dg_cmd->add_option("--records", dg.records, "QA records JSONL")->required();
    dg_cmd->add_option("--quotas", dg.quotas, "Per-label quotas fs,pr,ir");
    dg_cmd->add_option("--out", dg.out, "SFT examples JSONL")->required();
    dg_cmd->add_option("--config", dg.config, "Config naming the sparse and llm backends");
    dg_cmd->add_option("--docs", dg.docs, "Corpus JSONL for the built-in mocks (when no --config)");
    dg_cmd->add_option("--summary", dg.summary, "Write the summary JSON here too");
    dg_cmd->add_option("--n-rs", dg.n_rs, "Completions per chunk")->check(CLI::PositiveNumber);
    dg_cmd->add_option("--workers", dg.workers, "Records processed concurrently")->check(CLI::PositiveNumber);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Recall and LLM-judge evaluation");
    eval_cmd->require_subcommand(1);
    auto* recall_cmd = eval_cmd->add_subcommand("recall", "Recall@k over rankings");
    recall_cmd->add_option("--in", ev.in, "JSONL with ranking and gold_doc_ids (or question_id with --records)")->required();
    recall_cmd->add_option("--records", ev.records, "QA records supplying gold_doc_ids");
    recall_cmd->add_option("--ks", ev.ks, "Comma-separated cutoffs");
    recall_cmd->add_option("--csv", ev.csv, "Write a CSV table");
    recall_cmd->add_option("--name", ev.name, "Row label in the CSV");
    recall_cmd->add_option("--out", ev.out, "Write the JSON report");
    auto* judge_cmd = eval_cmd->add_subcommand("judge", "Relevance and faithfulness scoring");
    judge_cmd->add_option("--in", ev.in, "Judge items JSONL")->required();
    judge_cmd->add_option("--config", ev.config, "Config naming the judge llm backend");
    judge_cmd->add_option("--out", ev.out, "Write the JSON report");

    std::string docs;
    int mock_port = 0;
    std::int64_t mock_seed = 0;
    auto* mock_cmd = app.add_subcommand("mock-corpus", "Load a fixture corpus; serve mock backends with --port");
    mock_cmd->add_option("--docs", docs, "Corpus JSONL")->required();
    mock_cmd->add_option("--port", mock_port, "Serve /sparse/search, /dense/search, /rerank, /complete");
    mock_cmd->add_option("--host", host, "Bind address");
    mock_cmd->add_option("--seed", mock_seed, "Dense embedding seed");

    CLI11_PARSE(app, argc, argv);
    kadr::log::set_level(verbose ? kadr::log::Level::info : kadr::log::Level::error);

    try {
        if (*run_cmd) return cmd_run(run);
        if (*serve_cmd) return cmd_serve(serve_config, host, serve_port);
        if (*dg_cmd) return cmd_datagen(dg);
        if (*recall_cmd) return cmd_eval_recall(ev);
        if (*judge_cmd) return cmd_eval_judge(ev);
        if (*mock_cmd) return cmd_mock_corpus(docs, mock_port, host, mock_seed);
    } catch (const kadr::Error& e) {
        std::cerr << "error [" << kadr::to_string(e.code()) << "]: " << e.what() << "\n";
        return e.code() == kadr::ErrorCode::invalid_argument || e.code() == kadr::ErrorCode::invalid_config ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
