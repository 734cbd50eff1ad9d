#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kadr/core.hpp"
#include "kadr/text.hpp"

namespace kadr {

/// {"question_id","question","answer","gold_doc_ids",["kind"],["categories"]}.
/// A missing kind is inferred from the number of gold documents.
inline QARecord qa_record_from_json(const nlohmann::json& j) {
    QARecord rec;
    try {
        rec.question.question_id = j.value("question_id", std::string());
        rec.question.text = j.at("question").get<std::string>();
        rec.answer = j.value("answer", std::string());
        rec.gold_doc_ids = j.at("gold_doc_ids").get<std::vector<std::string>>();
        if (j.contains("kind")) {
            rec.question.kind = question_kind_from_string(j["kind"].get<std::string>());
        } else {
            rec.question.kind = rec.gold_doc_ids.size() == 2 ? QuestionKind::multi_doc : QuestionKind::single_doc;
        }
        if (j.contains("categories")) {
            for (const auto& [k, v] : j["categories"].items()) rec.categories[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("bad QA record: ") + e.what());
    }
    rec.check();
    return rec;
}

inline nlohmann::json qa_record_to_json(const QARecord& rec) {
    nlohmann::json j{{"question_id", rec.question.question_id},
                     {"question", rec.question.text},
                     {"answer", rec.answer},
                     {"gold_doc_ids", rec.gold_doc_ids},
                     {"kind", to_string(rec.question.kind)}};
    if (!rec.categories.empty()) j["categories"] = rec.categories;
    return j;
}

/// Calls `fn(json, line_number)` for every nonblank line.
inline void for_each_jsonl(std::istream& in, const std::string& source, const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::io, source + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
        try {
            fn(j, lineno);
        } catch (const Error& e) {
            throw Error(e.code(), source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    std::vector<nlohmann::json> out;
    for_each_jsonl(in, path.string(), [&](const nlohmann::json& j, std::size_t) { out.push_back(j); });
    return out;
}

inline std::vector<QARecord> load_qa_records(const std::filesystem::path& path) {
    std::vector<QARecord> out;
    for (const auto& j : read_jsonl(path)) out.push_back(qa_record_from_json(j));
    return out;
}

/// Questions file: {"question_id","question",["kind"]} per line.
inline std::vector<Question> load_questions(const std::filesystem::path& path) {
    std::vector<Question> out;
    for (const auto& j : read_jsonl(path)) {
        Question q;
        try {
            q.question_id = j.value("question_id", std::to_string(out.size()));
            q.text = j.at("question").get<std::string>();
            q.kind = question_kind_from_string(j.value("kind", std::string("unknown")));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::invalid_argument, path.string() + ": bad question line: " + e.what());
        }
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace kadr
