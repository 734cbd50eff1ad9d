#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kadr/backends.hpp"
#include "kadr/knowledge.hpp"
#include "kadr/prompts.hpp"
#include "kadr/text.hpp"

namespace kadr {

/// Deterministic stand-in for the chat model, used with fixture corpora.
/// It recognises the four prompt families by their system text and answers
/// in the expected output layout using term overlap only:
///   declaration   - question content words grouped into <= 4 elements;
///                   an element is "given" when the document has one of
///                   its words
///   summarization - the two most frequent distinct elements
///   answer        - the context sentences sharing most question words
///   judge         - overlap of the output with the reference answer and
///                   the reference documents
/// Any other prompt is rejected with no_script.
class HeuristicLlm final : public LlmClient {
public:
    static const std::set<std::string>& stopwords() {
        static const std::set<std::string> words = {
            "a",     "about", "an",   "and",   "are",  "as",    "at",   "be",    "between", "by",    "can",  "did",  "do",
            "does",  "for",   "from", "had",   "has",  "have",  "how",  "in",    "is",      "it",    "its",  "of",   "on",
            "or",    "than",  "that", "the",   "their", "there", "these", "this", "to",      "was",   "were", "what", "when",
            "where", "which", "who",  "whom",  "why",  "with",  "would", "both", "each",    "more",  "most", "much", "many"};
        return words;
    }

    static std::vector<std::string> content_terms(std::string_view s) {
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (auto& t : text::tokenize(s)) {
            if (stopwords().count(t) || !seen.insert(t).second) continue;
            out.push_back(std::move(t));
        }
        return out;
    }

protected:
    std::string do_complete(const CompletionRequest& req) const override {
        if (req.system == declaration_system_prompt()) return declaration(req.user);
        if (req.system == summarization_system_prompt()) return summarization(req.user);
        if (req.system == prompts::answer_system) return answer(req.user);
        if (req.system == prompts::judge_system) return judge(req.user);
        throw Error(ErrorCode::no_script, "heuristic LLM does not recognise this prompt");
    }

private:
    static std::string between(std::string_view s, std::string_view open, std::string_view close) {
        auto a = s.find(open);
        if (a == std::string_view::npos) return "";
        a += open.size();
        auto b = close.empty() ? std::string_view::npos : s.find(close, a);
        return std::string(s.substr(a, b == std::string_view::npos ? std::string_view::npos : b - a));
    }

    static std::string declaration(const std::string& user) {
        auto question = between(user, "Question: ", "\nDocument: ");
        auto document = between(user, "\nDocument: ", "");
        auto terms = content_terms(question);
        std::vector<std::vector<std::string>> groups;
        if (terms.empty()) {
            groups.push_back({"answer"});
        } else {
            std::size_t n = std::min<std::size_t>(max_knowledge_elements, terms.size());
            for (std::size_t g = 0; g < n; ++g) {
                std::vector<std::string> group;
                for (std::size_t i = g; i < terms.size(); i += n) group.push_back(terms[i]);
                groups.push_back(std::move(group));
            }
        }
        auto doc_terms = text::tokenize(document);
        std::set<std::string> doc_set(doc_terms.begin(), doc_terms.end());
        KnowledgeDeclaration decl;
        decl.thoughts = "The question needs facts on: " + text::join(terms, ", ") + ".";
        std::vector<std::string> matched;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            decl.question_elements.push_back("Facts about " + text::join(groups[g], " "));
            bool hit = std::any_of(groups[g].begin(), groups[g].end(), [&](const std::string& t) { return doc_set.count(t) > 0; });
            if (hit) {
                decl.doc_element_indices.insert(static_cast<int>(g + 1));
                matched.push_back(std::to_string(g + 1));
            }
        }
        std::string analysis = matched.empty() ? "The document covers none of the elements."
                                               : "The document covers points " + text::join(matched, ", ") + ".";
        return render_declaration(decl, analysis);
    }

    static std::string summarization(const std::string& user) {
        auto question = between(user, "Question: ", "\nKnowledge Elements:");
        auto block = between(user, "```\n", "\n```");
        std::vector<std::string> order;
        std::map<std::string, int> freq;
        for (auto line : text::split_lines(block)) {
            std::string e(text::trim(line));
            if (e.empty()) continue;
            if (freq[e]++ == 0) order.push_back(e);
        }
        std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) { return freq[a] > freq[b]; });
        std::string first = order.empty() ? "Facts about " + question : order[0];
        std::string second = order.size() > 1 ? order[1] : "Background for " + first;
        nlohmann::json list = {first, second};
        return "Thoughts:\nThe most frequent elements cover the question.\n\nSelected Knowledge Elements:\n```json\n" + list.dump(4) + "\n```";
    }

    static std::vector<std::string> sentences(std::string_view s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            cur += c;
            if (c == '.' || c == '?' || c == '!') {
                auto t = text::trim(cur);
                if (!t.empty()) out.emplace_back(t);
                cur.clear();
            }
        }
        auto t = text::trim(cur);
        if (!t.empty()) out.emplace_back(t);
        return out;
    }

    static std::size_t overlap(const std::vector<std::string>& terms, std::string_view s) {
        auto toks = text::tokenize(s);
        std::set<std::string> set(toks.begin(), toks.end());
        std::size_t n = 0;
        for (const auto& t : terms) n += set.count(t);
        return n;
    }

    static std::string answer(const std::string& user) {
        auto question = between(user, "Question: ", "\nContext: ");
        auto context = between(user, "\nContext: ", "");
        auto terms = content_terms(question);
        struct Pick {
            std::size_t score;
            std::size_t order;
            std::string sentence;
        };
        std::vector<Pick> picks;
        for (const auto& s : sentences(context)) {
            std::string clean = s;
            if (clean.size() > 2 && clean[0] == '[') {
                auto close = clean.find("] ");
                if (close != std::string::npos) clean = clean.substr(close + 2);
            }
            picks.push_back({overlap(terms, clean), picks.size(), clean});
        }
        std::stable_sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) { return a.score > b.score; });
        if (picks.empty() || picks[0].score == 0) return "I could not find the answer in the provided documents.";
        std::string out = picks[0].sentence;
        if (picks.size() > 1 && picks[1].score > 0 && picks[1].sentence != picks[0].sentence) out += " " + picks[1].sentence;
        return out;
    }

    static std::string judge(const std::string& user) {
        auto answer_text = between(user, "**Ground Truth Answer:** ", "\n**Reference Documents:** ");
        auto docs = between(user, "\n**Reference Documents:** ", "\n**Model's Output:** ");
        auto output = between(user, "\n**Model's Output:** ", "");
        auto truth = content_terms(answer_text);
        auto said = content_terms(output);
        double covered = truth.empty() ? 0.0 : static_cast<double>(overlap(truth, output)) / static_cast<double>(truth.size());
        double grounded = said.empty() ? 0.0 : static_cast<double>(overlap(said, docs)) / static_cast<double>(said.size());
        int relevance = -1;
        if (output.find("could not find the answer") != std::string::npos) {
            relevance = 0;
        } else if (covered >= 0.5) {
            relevance = text::word_count(output) <= 2 * text::word_count(answer_text) + 20 ? 2 : 1;
        }
        int faithfulness = grounded >= 0.9 ? 1 : (grounded >= 0.5 ? 0 : -1);
        nlohmann::json j{{"relevance", relevance}, {"faithfulness", faithfulness}};
        return "The output was compared with the reference answer and documents.\n```json\n" + j.dump(4) + "\n```";
    }
};

}  // namespace kadr
