#pragma once

#include <array>
#include <atomic>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kadr/backends.hpp"
#include "kadr/concurrency.hpp"
#include "kadr/core.hpp"
#include "kadr/knowledge.hpp"
#include "kadr/log.hpp"

namespace kadr {

enum class RelevanceLabel { fully_supporting, partially_relevant, irrelevant };

inline constexpr std::array<RelevanceLabel, 3> all_labels = {RelevanceLabel::fully_supporting, RelevanceLabel::partially_relevant,
                                                             RelevanceLabel::irrelevant};

inline std::string_view to_string(RelevanceLabel l) {
    switch (l) {
        case RelevanceLabel::fully_supporting: return "fully_supporting";
        case RelevanceLabel::partially_relevant: return "partially_relevant";
        case RelevanceLabel::irrelevant: return "irrelevant";
    }
    return "unknown";
}

struct LabeledChunk {
    DocumentChunk chunk;
    RelevanceLabel label = RelevanceLabel::irrelevant;
    std::string question_id;
};

struct LabelingResult {
    std::vector<LabeledChunk> chunks;
    bool unlabelable = false;
    std::string warning;
};

/// Labels sparse hits for `question answer` as the query. The first hit from
/// the gold document is fully supporting (single-doc). For two gold
/// documents each first hit is partially relevant and their concatenation in
/// rank order is a synthetic fully supporting chunk. Hits from other
/// documents are irrelevant. Order: fully supporting, partially relevant,
/// then irrelevant by rank.
inline LabelingResult label_chunks(const QARecord& rec, const Retriever& sparse, int k, std::string_view separator = "\n\n") {
    rec.check();
    const auto& qid = rec.question.question_id;
    auto hits = sparse.search(rec.question.text + " " + rec.answer, k);
    std::set<std::string> golds(rec.gold_doc_ids.begin(), rec.gold_doc_ids.end());

    std::vector<const DocumentChunk*> first_gold;
    std::set<std::string> gold_seen;
    std::vector<LabeledChunk> irrelevant;
    for (const auto& e : hits) {
        if (golds.count(e.chunk.doc_id)) {
            if (gold_seen.insert(e.chunk.doc_id).second) first_gold.push_back(&e.chunk);
        } else {
            irrelevant.push_back({e.chunk, RelevanceLabel::irrelevant, qid});
        }
    }

    LabelingResult result;
    if (first_gold.size() != golds.size()) {
        result.unlabelable = true;
        result.warning = "record " + qid + ": gold chunk not within top " + std::to_string(k) + " sparse hits";
        return result;
    }
    if (rec.question.kind == QuestionKind::multi_doc) {
        const auto& a = *first_gold[0];
        const auto& b = *first_gold[1];
        DocumentChunk joined{a.chunk_id + "+" + b.chunk_id, a.doc_id + "+" + b.doc_id, a.text + std::string(separator) + b.text,
                             Origin::synthetic};
        result.chunks.push_back({std::move(joined), RelevanceLabel::fully_supporting, qid});
        result.chunks.push_back({a, RelevanceLabel::partially_relevant, qid});
        result.chunks.push_back({b, RelevanceLabel::partially_relevant, qid});
    } else {
        result.chunks.push_back({*first_gold[0], RelevanceLabel::fully_supporting, qid});
    }
    for (auto& c : irrelevant) result.chunks.push_back(std::move(c));
    return result;
}

enum class AcceptanceRule { format, quantity_uniqueness, attribution, coverage };

inline constexpr std::array<AcceptanceRule, 4> all_rules = {AcceptanceRule::format, AcceptanceRule::quantity_uniqueness,
                                                            AcceptanceRule::attribution, AcceptanceRule::coverage};

inline std::string_view to_string(AcceptanceRule r) {
    switch (r) {
        case AcceptanceRule::format: return "format";
        case AcceptanceRule::quantity_uniqueness: return "quantity_uniqueness";
        case AcceptanceRule::attribution: return "attribution";
        case AcceptanceRule::coverage: return "coverage";
    }
    return "unknown";
}

struct AcceptanceReport {
    bool accepted = false;
    std::optional<AcceptanceRule> failed_rule;
    std::string detail;

    static AcceptanceReport accept() { return {true, std::nullopt, ""}; }
    static AcceptanceReport reject(AcceptanceRule rule, std::string detail) { return {false, rule, std::move(detail)}; }
};

inline AcceptanceRule rule_for(DeclarationErrc errc) {
    switch (errc) {
        case DeclarationErrc::no_elements:
        case DeclarationErrc::too_many_elements:
        case DeclarationErrc::duplicate_element:
        case DeclarationErrc::duplicate_index:
            return AcceptanceRule::quantity_uniqueness;
        case DeclarationErrc::index_out_of_range:
            return AcceptanceRule::attribution;
        default:
            return AcceptanceRule::format;
    }
}

/// Acceptance rules, evaluated in order format, quantity/uniqueness,
/// attribution, coverage; the first failure is reported.
///   fully supporting:   document elements == question elements
///   partially relevant: {} != document elements, strict subset
///   irrelevant:         strict subset, may be empty
inline AcceptanceReport check_rules(const DeclarationOutcome& outcome, RelevanceLabel label) {
    if (const auto* err = std::get_if<DeclarationError>(&outcome)) return AcceptanceReport::reject(rule_for(err->errc()), err->what());
    const auto& decl = std::get<KnowledgeDeclaration>(outcome);

    if (text::trim(decl.thoughts).empty()) return AcceptanceReport::reject(AcceptanceRule::format, "no thought process");

    const auto n = decl.question_elements.size();
    if (n == 0 || n > max_knowledge_elements) {
        return AcceptanceReport::reject(AcceptanceRule::quantity_uniqueness, std::to_string(n) + " knowledge elements");
    }
    std::set<std::string> distinct(decl.question_elements.begin(), decl.question_elements.end());
    if (distinct.size() != n) return AcceptanceReport::reject(AcceptanceRule::quantity_uniqueness, "knowledge elements repeat");

    for (int idx : decl.doc_element_indices) {
        if (idx < 1 || static_cast<std::size_t>(idx) > n) {
            return AcceptanceReport::reject(AcceptanceRule::attribution, "knowledge number " + std::to_string(idx) + " out of range");
        }
        const auto& claimed = decl.question_elements[static_cast<std::size_t>(idx - 1)];
        bool matched = false;
        for (const auto& required : decl.question_elements) matched = matched || claimed == required;
        if (!matched) return AcceptanceReport::reject(AcceptanceRule::attribution, "document element not among required elements");
    }

    const auto given = decl.doc_element_indices.size();
    switch (label) {
        case RelevanceLabel::fully_supporting:
            if (given != n) return AcceptanceReport::reject(AcceptanceRule::coverage, "fully supporting chunk must provide every element");
            break;
        case RelevanceLabel::partially_relevant:
            if (given == 0) return AcceptanceReport::reject(AcceptanceRule::coverage, "partially relevant chunk must provide some element");
            if (given == n) return AcceptanceReport::reject(AcceptanceRule::coverage, "partially relevant chunk must not provide every element");
            break;
        case RelevanceLabel::irrelevant:
            if (given == n) return AcceptanceReport::reject(AcceptanceRule::coverage, "irrelevant chunk must not provide every element");
            break;
    }
    return AcceptanceReport::accept();
}

struct SftExample {
    std::string system;
    std::string user;
    std::string target_output;
    RelevanceLabel label = RelevanceLabel::irrelevant;
};

inline nlohmann::json sft_example_to_json(const SftExample& ex) {
    return nlohmann::json{{"system", ex.system}, {"user", ex.user}, {"output", ex.target_output}, {"label", to_string(ex.label)}};
}

struct SampleResult {
    std::optional<SftExample> example;
    std::size_t attempts = 0;
    std::vector<AcceptanceReport> reports;

    const AcceptanceReport& last_report() const { return reports.back(); }
};

/// Prompts for a declaration up to n_rs times and returns the first output
/// passing check_rules for the chunk's label. An empty completion counts as
/// a format failure. Transport errors propagate.
inline SampleResult rejection_sample(const Question& q, const LabeledChunk& chunk, std::size_t n_rs, const LlmClient& llm,
                                     const LlmCallOptions& opts = {}) {
    require(n_rs >= 1, "n_rs must be >= 1");
    SampleResult result;
    for (std::size_t attempt = 0; attempt < n_rs; ++attempt) {
        auto call_opts = opts;
        call_opts.seed = opts.seed + static_cast<std::int64_t>(attempt);
        auto req = build_declaration_prompt(q, chunk.chunk, call_opts);
        ++result.attempts;
        std::string output;
        try {
            output = llm.llm_complete(req);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::empty_completion) throw;
            result.reports.push_back(AcceptanceReport::reject(AcceptanceRule::format, e.what()));
            continue;
        }
        auto report = check_rules(try_parse_declaration(output), chunk.label);
        result.reports.push_back(report);
        if (report.accepted) {
            result.example = SftExample{req.system, req.user, std::move(output), chunk.label};
            break;
        }
    }
    return result;
}

struct Quotas {
    std::size_t fully_supporting = 1000;
    std::size_t partially_relevant = 2500;
    std::size_t irrelevant = 6500;

    std::size_t& operator[](RelevanceLabel l) {
        switch (l) {
            case RelevanceLabel::fully_supporting: return fully_supporting;
            case RelevanceLabel::partially_relevant: return partially_relevant;
            default: return irrelevant;
        }
    }
    std::size_t operator[](RelevanceLabel l) const {
        switch (l) {
            case RelevanceLabel::fully_supporting: return fully_supporting;
            case RelevanceLabel::partially_relevant: return partially_relevant;
            default: return irrelevant;
        }
    }
};

struct DatagenOptions {
    Quotas quotas;
    int depth_single = 100;
    int depth_multi = 400;
    /// Irrelevant chunks taken per record, highest-ranked first.
    std::size_t irrelevant_per_record = 1;
    std::string fs_separator = "\n\n";
    std::size_t n_rs = 16;
    LlmCallOptions llm{1024, 0.7, 0, 1};
    /// Records processed concurrently. Output does not depend on it.
    std::size_t workers = 1;
};

struct DatasetSummary {
    Quotas counts{0, 0, 0};
    Quotas quotas;
    std::map<AcceptanceRule, std::size_t> rejections;
    std::map<std::size_t, std::size_t> attempts_histogram;
    std::size_t exhausted = 0;
    std::size_t unlabelable = 0;
    std::size_t record_errors = 0;
    std::size_t records_processed = 0;
    std::size_t llm_calls = 0;

    bool shortfall() const {
        for (auto l : all_labels) {
            if (counts[l] < quotas[l]) return true;
        }
        return false;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        for (auto l : all_labels) {
            auto name = std::string(to_string(l));
            j["counts"][name] = counts[l];
            j["quotas"][name] = quotas[l];
            j["shortfall"][name] = quotas[l] > counts[l] ? quotas[l] - counts[l] : 0;
        }
        for (auto r : all_rules) {
            auto it = rejections.find(r);
            j["rejections"][std::string(to_string(r))] = it == rejections.end() ? 0 : it->second;
        }
        j["attempts_histogram"] = nlohmann::json::object();
        for (const auto& [attempts, n] : attempts_histogram) j["attempts_histogram"][std::to_string(attempts)] = n;
        j["exhausted"] = exhausted;
        j["unlabelable"] = unlabelable;
        j["record_errors"] = record_errors;
        j["records_processed"] = records_processed;
        j["llm_calls"] = llm_calls;
        return j;
    }
};

/// Streams records through labeling and rejection sampling, writing
/// accepted examples as JSONL until every quota is met or the records run
/// out. Records are processed in windows of `workers`; within a window they
/// run concurrently, and results are applied in record order, so the
/// emitted file and the summary are identical for any worker count.
inline DatasetSummary build_sft_dataset(const std::vector<QARecord>& records, const DatagenOptions& opts, const Retriever& sparse,
                                        const LlmClient& llm, std::ostream& out) {
    DatasetSummary summary;
    summary.quotas = opts.quotas;
    auto full = [&](RelevanceLabel l) { return summary.counts[l] >= summary.quotas[l]; };
    auto all_full = [&] { return full(RelevanceLabel::fully_supporting) && full(RelevanceLabel::partially_relevant) && full(RelevanceLabel::irrelevant); };

    struct Candidate {
        RelevanceLabel label;
        SampleResult sample;
    };
    struct RecordWork {
        bool unlabelable = false;
        std::string error;
        std::vector<Candidate> candidates;
    };

    const std::size_t window = std::max<std::size_t>(1, opts.workers);
    std::size_t next = 0;
    while (next < records.size() && !all_full()) {
        std::vector<std::size_t> batch;
        for (std::size_t i = next; i < std::min(records.size(), next + window); ++i) batch.push_back(i);
        next += batch.size();
        std::array<bool, 3> skip{};
        for (auto l : all_labels) skip[static_cast<std::size_t>(l)] = full(l);

        auto work = parallel_map_ordered(batch, window, [&](const std::vector<std::size_t>& shard) {
            std::vector<RecordWork> results;
            for (auto idx : shard) {
                RecordWork w;
                const auto& rec = records[idx];
                try {
                    int depth = rec.question.kind == QuestionKind::multi_doc ? opts.depth_multi : opts.depth_single;
                    auto labeled = label_chunks(rec, sparse, depth, opts.fs_separator);
                    if (labeled.unlabelable) {
                        log::warn("datagen", labeled.warning);
                        w.unlabelable = true;
                    }
                    std::size_t irrelevant_taken = 0;
                    for (const auto& chunk : labeled.chunks) {
                        if (skip[static_cast<std::size_t>(chunk.label)]) continue;
                        if (chunk.label == RelevanceLabel::irrelevant && irrelevant_taken++ >= opts.irrelevant_per_record) continue;
                        w.candidates.push_back({chunk.label, rejection_sample(rec.question, chunk, opts.n_rs, llm, opts.llm)});
                    }
                } catch (const Error& e) {
                    w.error = e.what();
                }
                results.push_back(std::move(w));
            }
            return results;
        });

        for (auto& w : work) {
            if (all_full()) break;
            ++summary.records_processed;
            if (w.unlabelable) ++summary.unlabelable;
            if (!w.error.empty()) {
                log::warn("datagen", w.error);
                ++summary.record_errors;
                continue;
            }
            for (auto& c : w.candidates) {
                if (full(c.label)) continue;
                summary.llm_calls += c.sample.attempts;
                for (const auto& r : c.sample.reports) {
                    if (r.failed_rule) ++summary.rejections[*r.failed_rule];
                }
                if (!c.sample.example) {
                    ++summary.exhausted;
                    continue;
                }
                ++summary.attempts_histogram[c.sample.attempts];
                ++summary.counts[c.label];
                out << sft_example_to_json(*c.sample.example).dump() << '\n';
            }
        }
    }
    return summary;
}

}  // namespace kadr
