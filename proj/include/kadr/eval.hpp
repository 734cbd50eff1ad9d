#pragma once

#include <cstdio>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kadr/backends.hpp"
#include "kadr/concurrency.hpp"
#include "kadr/core.hpp"
#include "kadr/knowledge.hpp"
#include "kadr/prompts.hpp"
#include "kadr/text.hpp"

namespace kadr {

// ---------------------------------------------------------------------------
// Recall
// ---------------------------------------------------------------------------

/// Fraction of distinct gold documents found among the first k keys.
inline double recall_at_k(std::span<const std::string> ranked_keys, const std::vector<std::string>& gold_doc_ids, std::size_t k) {
    require(!gold_doc_ids.empty(), "recall needs at least one gold document");
    require(k >= 1, "recall k must be >= 1");
    std::set<std::string> golds(gold_doc_ids.begin(), gold_doc_ids.end());
    std::set<std::string> found;
    for (std::size_t i = 0; i < std::min(k, ranked_keys.size()); ++i) {
        if (golds.count(ranked_keys[i])) found.insert(ranked_keys[i]);
    }
    return static_cast<double>(found.size()) / static_cast<double>(golds.size());
}

inline double recall_at_k(const RankedList& ranked, const std::vector<std::string>& gold_doc_ids, std::size_t k) {
    auto keys = ranked.keys();
    return recall_at_k(std::span<const std::string>(keys), gold_doc_ids, k);
}

struct RecallCase {
    std::vector<std::string> ranked_keys;
    std::vector<std::string> gold_doc_ids;
};

struct RecallReport {
    std::map<std::size_t, double> recall;
    std::size_t questions = 0;
};

inline RecallReport recall_table(const std::vector<RecallCase>& dataset, const std::vector<std::size_t>& ks) {
    require(!ks.empty(), "recall table needs at least one k");
    for (std::size_t i = 1; i < ks.size(); ++i) require(ks[i] > ks[i - 1], "recall ks must be strictly increasing");
    RecallReport report;
    report.questions = dataset.size();
    for (auto k : ks) {
        double sum = 0.0;
        for (const auto& c : dataset) sum += recall_at_k(std::span<const std::string>(c.ranked_keys), c.gold_doc_ids, k);
        report.recall[k] = dataset.empty() ? 0.0 : sum / static_cast<double>(dataset.size());
    }
    return report;
}

/// Column label in the style R@10, R@400, R@2k.
inline std::string recall_column(std::size_t k) {
    if (k >= 1000 && k % 1000 == 0) return "R@" + std::to_string(k / 1000) + "k";
    return "R@" + std::to_string(k);
}

inline std::string recall_csv(const std::map<std::string, RecallReport>& rows) {
    std::set<std::size_t> ks;
    for (const auto& [_, r] : rows) {
        for (const auto& [k, v] : r.recall) ks.insert(k);
    }
    std::string out = "run";
    for (auto k : ks) out += "," + recall_column(k);
    out += "\n";
    for (const auto& [name, r] : rows) {
        out += name;
        for (auto k : ks) {
            auto it = r.recall.find(k);
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4f", it == r.recall.end() ? 0.0 : it->second);
            out += ",";
            out += (it == r.recall.end() ? "" : buf);
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// LLM judge
// ---------------------------------------------------------------------------

struct JudgeScores {
    int relevance = 0;
    int faithfulness = 0;

    friend bool operator==(const JudgeScores&, const JudgeScores&) = default;
};

enum class JudgeErrc { missing_block, malformed, missing_field, non_integer, out_of_range };

inline std::string_view to_string(JudgeErrc c) {
    switch (c) {
        case JudgeErrc::missing_block: return "missing_block";
        case JudgeErrc::malformed: return "malformed";
        case JudgeErrc::missing_field: return "missing_field";
        case JudgeErrc::non_integer: return "non_integer";
        case JudgeErrc::out_of_range: return "out_of_range";
    }
    return "unknown";
}

class JudgeError : public Error {
public:
    JudgeError(JudgeErrc code, const std::string& detail) : Error(ErrorCode::parse, "judge: " + std::string(to_string(code)) + ": " + detail), errc_(code) {}
    JudgeErrc errc() const noexcept { return errc_; }

private:
    JudgeErrc errc_;
};

inline CompletionRequest build_judge_prompt(const std::string& question, const std::string& gold_answer, const std::string& gold_context,
                                            const std::string& model_output, const LlmCallOptions& opts = {}) {
    require(!question.empty() && !gold_answer.empty() && !gold_context.empty() && !model_output.empty(),
            "judge prompt inputs must be nonempty");
    CompletionRequest req;
    req.system = std::string(prompts::judge_system);
    req.user = text::render(prompts::judge_user, std::map<std::string, std::string>{
                                                     {"question", question},
                                                     {"answer", gold_answer},
                                                     {"gold_context", gold_context},
                                                     {"output", model_output},
                                                 });
    req.max_tokens = opts.max_tokens;
    req.temperature = opts.temperature;
    req.seed = opts.seed;
    return req;
}

/// Reads the last fenced JSON object. Relevance must be one of -1..2 and
/// faithfulness one of -1..1, both as JSON integers.
inline JudgeScores parse_judge(std::string_view output) {
    auto block = detail::last_fenced_block(output);
    if (!block) throw JudgeError(JudgeErrc::missing_block, "no fenced JSON block");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(*block);
    } catch (const nlohmann::json::parse_error&) {
        throw JudgeError(JudgeErrc::malformed, "fenced block is not JSON");
    }
    if (!j.is_object()) throw JudgeError(JudgeErrc::malformed, "fenced block is not a JSON object");
    auto field = [&](const char* name, int lo, int hi) {
        if (!j.contains(name)) throw JudgeError(JudgeErrc::missing_field, std::string("no '") + name + "' field");
        const auto& v = j[name];
        if (!v.is_number_integer()) throw JudgeError(JudgeErrc::non_integer, std::string(name) + " is not an integer: " + v.dump());
        auto x = v.get<long long>();
        if (x < lo || x > hi) throw JudgeError(JudgeErrc::out_of_range, std::string(name) + " = " + std::to_string(x));
        return static_cast<int>(x);
    };
    JudgeScores s;
    s.relevance = field("relevance", -1, 2);
    s.faithfulness = field("faithfulness", -1, 1);
    return s;
}

struct JudgeItem {
    std::string question_id;
    std::string question;
    std::string gold_answer;
    std::string gold_context;
    std::string model_output;
};

inline JudgeItem judge_item_from_json(const nlohmann::json& j) {
    try {
        JudgeItem item;
        item.question_id = j.value("question_id", std::string());
        item.question = j.at("question").get<std::string>();
        item.gold_answer = j.at("answer").get<std::string>();
        item.gold_context = j.at("gold_context").get<std::string>();
        item.model_output = j.at("output").get<std::string>();
        return item;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("bad judge item: ") + e.what());
    }
}

struct JudgeRunResult {
    double relevance_mean = 0.0;
    double faithfulness_mean = 0.0;
    std::size_t scored = 0;
    std::size_t excluded = 0;
    std::vector<JudgeScores> scores;
    std::vector<std::string> exclusions;
};

/// Scores each item once; items whose judgement fails (bad prompt input,
/// transport, unparsable reply) are excluded from the means and listed.
inline JudgeRunResult judge_run(const std::vector<JudgeItem>& items, const LlmClient& llm, const LlmCallOptions& opts = {}) {
    require(!items.empty(), "judge run needs at least one item");
    struct Outcome {
        std::optional<JudgeScores> scores;
        std::string error;
    };
    auto outcomes = parallel_map_ordered(items, opts.workers, [&](const std::vector<JudgeItem>& shard) {
        std::vector<Outcome> out;
        for (const auto& item : shard) {
            try {
                out.push_back({parse_judge(llm.llm_complete(build_judge_prompt(item.question, item.gold_answer, item.gold_context,
                                                                               item.model_output, opts))),
                               ""});
            } catch (const Error& e) {
                out.push_back({std::nullopt, item.question_id + ": " + e.what()});
            }
        }
        return out;
    });
    JudgeRunResult r;
    long long rel = 0;
    long long faith = 0;
    for (auto& o : outcomes) {
        if (o.scores) {
            ++r.scored;
            rel += o.scores->relevance;
            faith += o.scores->faithfulness;
            r.scores.push_back(*o.scores);
        } else {
            ++r.excluded;
            r.exclusions.push_back(std::move(o.error));
        }
    }
    if (r.scored == 0) throw Error(ErrorCode::stage_failure, "judge run failed: every item was excluded");
    r.relevance_mean = static_cast<double>(rel) / static_cast<double>(r.scored);
    r.faithfulness_mean = static_cast<double>(faith) / static_cast<double>(r.scored);
    return r;
}

/// {"recall": {k: value}, "relevance_mean", "faithfulness_mean", "excluded"};
/// absent parts are omitted.
inline nlohmann::json eval_report_json(const RecallReport* recall, const JudgeRunResult* judge) {
    nlohmann::json j = nlohmann::json::object();
    if (recall) {
        j["recall"] = nlohmann::json::object();
        for (const auto& [k, v] : recall->recall) j["recall"][std::to_string(k)] = v;
        j["questions"] = recall->questions;
    }
    if (judge) {
        j["relevance_mean"] = judge->relevance_mean;
        j["faithfulness_mean"] = judge->faithfulness_mean;
        j["scored"] = judge->scored;
        j["excluded"] = judge->excluded;
    }
    return j;
}

}  // namespace kadr
