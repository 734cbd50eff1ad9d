#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kadr/backends.hpp"
#include "kadr/concurrency.hpp"
#include "kadr/core.hpp"
#include "kadr/log.hpp"
#include "kadr/prompts.hpp"
#include "kadr/text.hpp"

namespace kadr {

inline constexpr std::size_t max_knowledge_elements = 4;

/// Parsed declaration for one (question, document) pair. The document's
/// elements are stored as 1-based indices into question_elements, so they
/// are always a subset of the question's elements.
struct KnowledgeDeclaration {
    std::vector<std::string> question_elements;
    std::set<int> doc_element_indices;
    std::string thoughts;
    std::string source_key;

    std::vector<std::string> doc_elements() const {
        std::vector<std::string> out;
        for (int i : doc_element_indices) out.push_back(question_elements.at(static_cast<std::size_t>(i - 1)));
        return out;
    }

    friend bool operator==(const KnowledgeDeclaration&, const KnowledgeDeclaration&) = default;
};

struct KnowledgeSummaries {
    std::string sum_0;
    std::string sum_1;

    friend bool operator==(const KnowledgeSummaries&, const KnowledgeSummaries&) = default;
};

enum class DeclarationErrc {
    missing_elements_header,
    missing_given_header,
    missing_thoughts,
    malformed_list,
    malformed_indices,
    no_elements,
    too_many_elements,
    duplicate_element,
    duplicate_index,
    index_out_of_range,
};

inline std::string_view to_string(DeclarationErrc c) {
    switch (c) {
        case DeclarationErrc::missing_elements_header: return "missing_elements_header";
        case DeclarationErrc::missing_given_header: return "missing_given_header";
        case DeclarationErrc::missing_thoughts: return "missing_thoughts";
        case DeclarationErrc::malformed_list: return "malformed_list";
        case DeclarationErrc::malformed_indices: return "malformed_indices";
        case DeclarationErrc::no_elements: return "no_elements";
        case DeclarationErrc::too_many_elements: return "too_many_elements";
        case DeclarationErrc::duplicate_element: return "duplicate_element";
        case DeclarationErrc::duplicate_index: return "duplicate_index";
        case DeclarationErrc::index_out_of_range: return "index_out_of_range";
    }
    return "unknown";
}

class DeclarationError : public Error {
public:
    DeclarationError(DeclarationErrc code, const std::string& detail)
        : Error(ErrorCode::parse, "declaration: " + std::string(to_string(code)) + ": " + detail), errc_(code) {}

    DeclarationErrc errc() const noexcept { return errc_; }

private:
    DeclarationErrc errc_;
};

enum class SummariesErrc { missing_fence, malformed_list, wrong_arity, non_string, empty_entry, duplicate_entry };

inline std::string_view to_string(SummariesErrc c) {
    switch (c) {
        case SummariesErrc::missing_fence: return "missing_fence";
        case SummariesErrc::malformed_list: return "malformed_list";
        case SummariesErrc::wrong_arity: return "wrong_arity";
        case SummariesErrc::non_string: return "non_string";
        case SummariesErrc::empty_entry: return "empty_entry";
        case SummariesErrc::duplicate_entry: return "duplicate_entry";
    }
    return "unknown";
}

class SummariesError : public Error {
public:
    SummariesError(SummariesErrc code, const std::string& detail)
        : Error(ErrorCode::parse, "summaries: " + std::string(to_string(code)) + ": " + detail), errc_(code) {}

    SummariesErrc errc() const noexcept { return errc_; }

private:
    SummariesErrc errc_;
};

/// Sampling knobs shared by every LLM stage. Retry attempt i uses seed + i.
struct LlmCallOptions {
    int max_tokens = 1024;
    double temperature = 0.0;
    std::int64_t seed = 0;
    std::size_t workers = 1;
};

// ---------------------------------------------------------------------------
// Declaration
// ---------------------------------------------------------------------------

inline const std::string& declaration_system_prompt() {
    static const std::string system = text::render(prompts::declaration_system,
                                                   std::map<std::string, std::string>{
                                                       {"demo_input", std::string(prompts::declaration_demo_input)},
                                                       {"demo_output", std::string(prompts::declaration_demo_output)},
                                                   });
    return system;
}

inline CompletionRequest build_declaration_prompt(const Question& q, const DocumentChunk& doc, const LlmCallOptions& opts = {}) {
    require(!q.text.empty(), "question text must be nonempty");
    require(!doc.text.empty(), "document text must be nonempty");
    CompletionRequest req;
    req.system = declaration_system_prompt();
    req.user = text::render(prompts::declaration_user, std::map<std::string, std::string>{{"question", q.text}, {"document", doc.text}});
    req.max_tokens = opts.max_tokens;
    req.temperature = opts.temperature;
    req.seed = opts.seed;
    return req;
}

namespace detail {

/// Header match after stripping markdown emphasis and heading marks.
/// Returns the text following the colon when the line is the header.
inline std::optional<std::string> match_header(std::string_view line, std::string_view header) {
    auto s = text::trim(line);
    while (!s.empty() && (s.front() == '*' || s.front() == '#')) s.remove_prefix(1);
    s = text::trim(s);
    if (!text::starts_with_ci(s, header)) return std::nullopt;
    auto rest = s.substr(header.size());
    while (!rest.empty() && rest.front() == '*') rest.remove_prefix(1);
    return std::string(text::trim(rest));
}

inline bool is_thoughts_header(std::string_view line) {
    auto s = text::trim(line);
    while (!s.empty() && (s.front() == '*' || s.front() == '#')) s.remove_prefix(1);
    s = text::trim(s);
    return text::starts_with_ci(s, "thoughts") && s.find(':') != std::string_view::npos;
}

}  // namespace detail

/// Parses the Thoughts / Knowledge Elements / Given Knowledge layout.
/// Structural problems are reported before quantity problems, which are
/// reported before index problems.
inline KnowledgeDeclaration parse_declaration(std::string_view output) {
    using detail::match_header;
    auto lines = text::split_lines(output);

    std::optional<std::size_t> elements_at;
    std::optional<std::size_t> analysis_at;
    std::optional<std::size_t> given_at;
    std::string elements_inline;
    std::string given_inline;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!elements_at) {
            if (auto rest = match_header(lines[i], "knowledge elements:")) {
                elements_at = i;
                elements_inline = *rest;
            }
        } else if (!given_at) {
            if (!analysis_at && match_header(lines[i], "analysis for given document:")) {
                analysis_at = i;
            } else if (auto rest = match_header(lines[i], "given knowledge:")) {
                given_at = i;
                given_inline = *rest;
            }
        }
    }
    if (!elements_at) throw DeclarationError(DeclarationErrc::missing_elements_header, "no 'Knowledge Elements:' header");
    if (!given_at) throw DeclarationError(DeclarationErrc::missing_given_header, "no 'Given Knowledge:' header after the element list");

    KnowledgeDeclaration decl;

    // Thoughts: from an optional "Thoughts ...:" header up to the element header.
    std::size_t thoughts_begin = 0;
    std::string thoughts;
    for (std::size_t i = 0; i < *elements_at; ++i) {
        if (detail::is_thoughts_header(lines[i])) {
            thoughts_begin = i + 1;
            auto rest = text::trim(lines[i].substr(lines[i].find(':') + 1));
            while (!rest.empty() && rest.front() == '*') rest.remove_prefix(1);
            thoughts = std::string(text::trim(rest));
            break;
        }
    }
    for (std::size_t i = thoughts_begin; i < *elements_at; ++i) {
        auto t = text::trim(lines[i]);
        if (t.empty() && thoughts.empty()) continue;
        if (!thoughts.empty()) thoughts += '\n';
        thoughts += t;
    }
    decl.thoughts = std::string(text::trim(thoughts));
    if (decl.thoughts.empty()) throw DeclarationError(DeclarationErrc::missing_thoughts, "no thought process before the element list");

    // Numbered list.
    static const std::regex item_re(R"(^\s*(\d+)\s*[.)]\s*(.*)$)");
    std::vector<std::string_view> body;
    if (!elements_inline.empty()) body.push_back(elements_inline);
    std::size_t list_end = analysis_at.value_or(*given_at);
    for (std::size_t i = *elements_at + 1; i < list_end; ++i) body.push_back(lines[i]);
    bool after_gap = false;
    for (auto raw : body) {
        auto line = text::trim(raw);
        if (line.empty()) {
            after_gap = !decl.question_elements.empty();
            continue;
        }
        std::string s(line);
        std::smatch m;
        if (std::regex_match(s, m, item_re)) {
            if (after_gap) throw DeclarationError(DeclarationErrc::malformed_list, "blank line inside the numbered list");
            auto number = std::stoul(m[1].str());
            if (number != decl.question_elements.size() + 1) {
                throw DeclarationError(DeclarationErrc::malformed_list, "list item numbered " + m[1].str() + " out of sequence");
            }
            auto item = std::string(text::trim(m[2].str()));
            if (item.empty()) throw DeclarationError(DeclarationErrc::malformed_list, "empty list item " + m[1].str());
            decl.question_elements.push_back(std::move(item));
        } else if (!decl.question_elements.empty() && !after_gap) {
            decl.question_elements.back() += ' ';
            decl.question_elements.back() += s;
        } else {
            throw DeclarationError(DeclarationErrc::malformed_list, "unexpected text in element list: '" + s + "'");
        }
    }

    // Given knowledge: the first non-blank content after the header.
    std::string given = given_inline;
    for (std::size_t i = *given_at + 1; i < lines.size() && given.empty(); ++i) given = std::string(text::trim(lines[i]));
    if (given.empty()) throw DeclarationError(DeclarationErrc::malformed_indices, "'Given Knowledge:' has no content");
    while (!given.empty() && (given.back() == '.' || given.back() == '*')) given.pop_back();
    std::vector<int> indices;
    if (text::to_lower(text::trim(given)) != "none") {
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            if (token.size() > 6 || token.find_first_not_of("0123456789") != std::string::npos) {
                throw DeclarationError(DeclarationErrc::malformed_indices, "not a knowledge number: '" + token + "'");
            }
            indices.push_back(std::stoi(token));
            token.clear();
        };
        for (char c : given) {
            if (c == ',' || text::is_space(c)) {
                flush();
            } else {
                token += c;
            }
        }
        flush();
        if (indices.empty()) throw DeclarationError(DeclarationErrc::malformed_indices, "no knowledge numbers given");
    }

    const auto n = decl.question_elements.size();
    if (n == 0) throw DeclarationError(DeclarationErrc::no_elements, "element list is empty");
    if (n > max_knowledge_elements) {
        throw DeclarationError(DeclarationErrc::too_many_elements, std::to_string(n) + " elements (at most 4 allowed)");
    }
    std::set<std::string> distinct(decl.question_elements.begin(), decl.question_elements.end());
    if (distinct.size() != n) throw DeclarationError(DeclarationErrc::duplicate_element, "knowledge elements repeat");
    for (int idx : indices) {
        if (!decl.doc_element_indices.insert(idx).second) {
            throw DeclarationError(DeclarationErrc::duplicate_index, "knowledge number " + std::to_string(idx) + " given twice");
        }
    }
    for (int idx : indices) {
        if (idx < 1 || static_cast<std::size_t>(idx) > n) {
            throw DeclarationError(DeclarationErrc::index_out_of_range,
                                   "knowledge number " + std::to_string(idx) + " outside 1.." + std::to_string(n));
        }
    }
    return decl;
}

using DeclarationOutcome = std::variant<KnowledgeDeclaration, DeclarationError>;

inline DeclarationOutcome try_parse_declaration(std::string_view output) {
    try {
        return parse_declaration(output);
    } catch (const DeclarationError& e) {
        return e;
    }
}

/// Canonical rendering in the declaration output layout; parse_declaration
/// inverts it for single-line elements.
inline std::string render_declaration(const KnowledgeDeclaration& decl, std::string_view analysis = "See the numbered elements above.") {
    std::string out = "Thoughts knowledge requirements:\n" + decl.thoughts + "\n\nKnowledge Elements:\n";
    for (std::size_t i = 0; i < decl.question_elements.size(); ++i) {
        out += std::to_string(i + 1) + ". " + decl.question_elements[i] + "\n";
    }
    out += "\nAnalysis for given document:\n";
    out += analysis;
    out += "\n\nGiven Knowledge:\n";
    if (decl.doc_element_indices.empty()) {
        out += "None";
    } else {
        std::vector<std::string> nums;
        for (int i : decl.doc_element_indices) nums.push_back(std::to_string(i));
        out += text::join(nums, ", ");
    }
    return out;
}

struct DeclareOutcome {
    std::vector<KnowledgeDeclaration> declarations;
    std::vector<std::string> warnings;
    std::size_t llm_calls = 0;
    std::size_t retries = 0;
};

/// Declares knowledge for the first n_know documents, one LLM call per
/// document plus up to n_retry re-prompts on parse failure. Documents that
/// never parse are dropped with a warning. Results keep document order even
/// when documents are processed concurrently (opts.workers).
inline DeclareOutcome declare(const Question& q, const std::vector<DocumentChunk>& top_docs, std::size_t n_know, std::size_t n_retry,
                              const LlmClient& llm, const LlmCallOptions& opts = {}) {
    DeclareOutcome outcome;
    if (n_know == 0) return outcome;
    require(top_docs.size() >= n_know, "declare needs at least n_know documents");

    struct PerDoc {
        std::optional<KnowledgeDeclaration> decl;
        std::string warning;
        std::size_t calls = 0;
    };
    std::vector<DocumentChunk> docs(top_docs.begin(), top_docs.begin() + static_cast<std::ptrdiff_t>(n_know));
    auto per_doc = parallel_map_ordered(docs, opts.workers, [&](const std::vector<DocumentChunk>& shard) {
        std::vector<PerDoc> results;
        for (const auto& doc : shard) {
            PerDoc r;
            std::string last_error;
            for (std::size_t attempt = 0; attempt <= n_retry; ++attempt) {
                auto call_opts = opts;
                call_opts.seed = opts.seed + static_cast<std::int64_t>(attempt);
                ++r.calls;
                try {
                    auto decl = parse_declaration(llm.llm_complete(build_declaration_prompt(q, doc, call_opts)));
                    decl.source_key = identity_key(doc);
                    r.decl = std::move(decl);
                    break;
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::parse && e.code() != ErrorCode::empty_completion) throw;
                    last_error = e.what();
                }
            }
            if (!r.decl) {
                r.warning = "declaration dropped for " + identity_key(doc) + " after " + std::to_string(r.calls) + " attempts: " + last_error;
            }
            results.push_back(std::move(r));
        }
        return results;
    });

    for (auto& r : per_doc) {
        outcome.llm_calls += r.calls;
        outcome.retries += r.calls - 1;
        if (r.decl) {
            outcome.declarations.push_back(std::move(*r.decl));
        } else {
            log::warn("knowledge", r.warning);
            outcome.warnings.push_back(std::move(r.warning));
        }
    }
    if (outcome.declarations.empty()) {
        throw Error(ErrorCode::stage_failure, "declaration stage failed: all " + std::to_string(n_know) + " documents dropped");
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Summarization
// ---------------------------------------------------------------------------

inline const std::string& summarization_system_prompt() {
    static const std::string system = text::render(prompts::summarization_system,
                                                   std::map<std::string, std::string>{
                                                       {"demo_input", std::string(prompts::summarization_demo_input)},
                                                       {"demo_output", std::string(prompts::summarization_demo_output)},
                                                   });
    return system;
}

inline CompletionRequest build_summarization_prompt(const Question& q, const std::vector<std::string>& elements,
                                                    const LlmCallOptions& opts = {}) {
    require(!q.text.empty(), "question text must be nonempty");
    require(!elements.empty(), "summarization needs at least one knowledge element");
    CompletionRequest req;
    req.system = summarization_system_prompt();
    req.user = text::render(prompts::summarization_user,
                            std::map<std::string, std::string>{{"question", q.text}, {"knowledge_elements", text::join(elements, "\n")}});
    req.max_tokens = opts.max_tokens;
    req.temperature = opts.temperature;
    req.seed = opts.seed;
    return req;
}

namespace detail {

/// Body of the last complete ``` fenced block, if any.
inline std::optional<std::string> last_fenced_block(std::string_view output) {
    auto lines = text::split_lines(output);
    std::optional<std::string> last;
    bool in_block = false;
    std::size_t open = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto t = text::trim(lines[i]);
        if (t.substr(0, 3) != "```") continue;
        if (!in_block) {
            open = i;
            in_block = true;
        } else {
            std::string body;
            for (std::size_t k = open + 1; k < i; ++k) {
                body += lines[k];
                body += '\n';
            }
            last = std::move(body);
            in_block = false;
        }
    }
    return last;
}

/// Fallback for Python-style lists of quoted strings: ['a', "b"].
/// Returns nullopt when the text is not such a list.
inline std::optional<nlohmann::json> parse_python_string_list(std::string_view s) {
    s = text::trim(s);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') return std::nullopt;
    nlohmann::json out = nlohmann::json::array();
    std::size_t i = 1;
    auto skip_ws = [&] {
        while (i < s.size() && text::is_space(s[i])) ++i;
    };
    skip_ws();
    if (s[i] == ']') return out;
    while (i < s.size()) {
        skip_ws();
        if (i >= s.size() || (s[i] != '\'' && s[i] != '"')) return std::nullopt;
        char quote = s[i++];
        std::string value;
        bool closed = false;
        while (i < s.size()) {
            char c = s[i++];
            if (c == '\\' && i < s.size()) {
                value += s[i++];
            } else if (c == quote) {
                closed = true;
                break;
            } else {
                value += c;
            }
        }
        if (!closed) return std::nullopt;
        out.push_back(value);
        skip_ws();
        if (i < s.size() && s[i] == ',') {
            ++i;
            skip_ws();
            if (i < s.size() && s[i] == ']') return out;
            continue;
        }
        if (i < s.size() && s[i] == ']' && i + 1 == s.size()) return out;
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace detail

/// Extracts the two summarized elements from the last fenced block, which
/// must hold a list of exactly two distinct nonempty strings.
inline KnowledgeSummaries parse_summaries(std::string_view output) {
    auto block = detail::last_fenced_block(output);
    if (!block) throw SummariesError(SummariesErrc::missing_fence, "no fenced code block");
    nlohmann::json list;
    try {
        list = nlohmann::json::parse(*block);
    } catch (const nlohmann::json::parse_error&) {
        auto py = detail::parse_python_string_list(*block);
        if (!py) throw SummariesError(SummariesErrc::malformed_list, "fenced block is not a list");
        list = std::move(*py);
    }
    if (!list.is_array()) throw SummariesError(SummariesErrc::malformed_list, "fenced block is not a list");
    for (const auto& v : list) {
        if (!v.is_string()) throw SummariesError(SummariesErrc::non_string, "list entry is not a string: " + v.dump());
    }
    if (list.size() != 2) throw SummariesError(SummariesErrc::wrong_arity, "expected 2 entries, got " + std::to_string(list.size()));
    KnowledgeSummaries s{list[0].get<std::string>(), list[1].get<std::string>()};
    if (text::trim(s.sum_0).empty() || text::trim(s.sum_1).empty()) throw SummariesError(SummariesErrc::empty_entry, "empty summary");
    if (s.sum_0 == s.sum_1) throw SummariesError(SummariesErrc::duplicate_entry, "both summaries are identical");
    return s;
}

struct SummarizeOutcome {
    KnowledgeSummaries summaries;
    std::size_t llm_calls = 0;
    std::size_t retries = 0;
};

/// Aggregates every declaration's question elements (in declaration order,
/// duplicates kept) and asks for two complementary summaries. Throws
/// stage_failure once 1 + n_retry attempts have failed to parse.
inline SummarizeOutcome summarize(const Question& q, const std::vector<KnowledgeDeclaration>& declarations, std::size_t n_retry,
                                  const LlmClient& llm, const LlmCallOptions& opts = {}) {
    require(!declarations.empty(), "summarize needs at least one declaration");
    std::vector<std::string> elements;
    for (const auto& d : declarations) elements.insert(elements.end(), d.question_elements.begin(), d.question_elements.end());
    SummarizeOutcome outcome;
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= n_retry; ++attempt) {
        auto call_opts = opts;
        call_opts.seed = opts.seed + static_cast<std::int64_t>(attempt);
        ++outcome.llm_calls;
        try {
            outcome.summaries = parse_summaries(llm.llm_complete(build_summarization_prompt(q, elements, call_opts)));
            outcome.retries = attempt;
            return outcome;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::parse && e.code() != ErrorCode::empty_completion) throw;
            last_error = e.what();
        }
    }
    throw Error(ErrorCode::stage_failure, "summarization failed after " + std::to_string(outcome.llm_calls) + " attempts: " + last_error);
}

}  // namespace kadr
