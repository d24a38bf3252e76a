#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "ragonite/error.hpp"
#include "ragonite/text.hpp"

namespace ragonite::llm {

/// Exact answer the model must give when the evidences cannot answer the question.
inline constexpr std::string_view kOutOfScopeAnswer =
    "The desired information cannot be found in the retrieved pool of evidence.";

inline constexpr std::string_view kPromptVersion = "v1";

// Section headings shared by the templates and the offline mock provider.
namespace section {
inline constexpr std::string_view history = "### Conversation history";
inline constexpr std::string_view current_question = "### Current question";
inline constexpr std::string_view rewritten = "### Rewritten question";
inline constexpr std::string_view evidences = "### Evidences";
inline constexpr std::string_view question = "### Question";
inline constexpr std::string_view answer = "### Answer";
inline constexpr std::string_view gold_answer = "### Gold answer";
inline constexpr std::string_view generated_answer = "### Generated answer";
inline constexpr std::string_view verdict = "### Verdict";
inline constexpr std::string_view last_answer = "### Last answer";
inline constexpr std::string_view pages = "### Evidence pages";
inline constexpr std::string_view suggestions = "### Suggestions";
}  // namespace section

struct PromptTemplate {
    std::string id;
    std::string system;
    std::string user;
    std::set<std::string> placeholders;  // names every render must supply
};

struct PromptSet {
    PromptTemplate rephrase;
    PromptTemplate answer;
    PromptTemplate judge;
    PromptTemplate followup;
    std::string version{kPromptVersion};
};

/// Substitutes `{name}` placeholders. `{{` and `}}` produce literal braces.
/// Throws TemplateError on an unknown or unsupplied placeholder.
inline std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        const char c = tmpl[i];
        if (c == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
            out.push_back('{');
            ++i;
        } else if (c == '}' && i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
            out.push_back('}');
            ++i;
        } else if (c == '{') {
            const auto close = tmpl.find('}', i);
            if (close == std::string_view::npos) throw TemplateError("unterminated placeholder");
            const std::string name(tmpl.substr(i + 1, close - i - 1));
            auto it = values.find(name);
            if (it == values.end()) throw TemplateError("missing value for placeholder {" + name + "}");
            out += it->second;
            i = close;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

struct RenderedPrompt {
    std::string system;
    std::string user;
};

inline RenderedPrompt render(const PromptTemplate& t, const std::map<std::string, std::string>& values) {
    for (const auto& name : t.placeholders)
        if (!values.contains(name)) throw TemplateError(t.id + ": missing value for {" + name + "}");
    return {render(t.system, values), render(t.user, values)};
}

inline PromptSet default_prompts() {
    PromptSet p;
    p.rephrase = {
        "rephrase",
        "You rewrite follow-up questions from a conversation about an enterprise wiki into "
        "self-contained, intent-explicit questions. Use the previous questions and answers to "
        "resolve pronouns and to restore entities, dates and topics the user left implicit. If the "
        "current question is already self-contained, return it unchanged. Reply with the rewritten "
        "question only.",
        "### Conversation history\n{history}\n### Current question\n{question}\n### Rewritten question\n",
        {"history", "question"}};
    p.answer = {
        "answer",
        "You answer questions using only the evidences retrieved from an enterprise wiki. Each "
        "evidence carries its page title and surrounding context. Do not use prior knowledge. Answer "
        "concisely. If the evidences do not contain the information needed to answer, reply with "
        "exactly this sentence and nothing else: "
        "The desired information cannot be found in the retrieved pool of evidence.",
        "### Evidences\n{evidences}\n### Question\n{question}\n### Answer\n",
        {"evidences", "question"}};
    p.judge = {
        "judge",
        "You grade a generated answer against a gold answer for the given question. Reply with "
        "\"Score: 1\" if the generated answer is relevant and correct, \"Score: 0.5\" if it is "
        "partially relevant or incomplete, and \"Score: 0\" if it is not relevant, wrong, or says "
        "that the information cannot be found. Reply with the score line only.",
        "### Question\n{question}\n### Gold answer\n{gold_answer}\n### Generated answer\n"
        "{generated_answer}\n### Verdict\n",
        {"question", "gold_answer", "generated_answer"}};
    p.followup = {
        "followup",
        "You suggest follow-up questions that a user exploring an enterprise wiki might ask next. "
        "Reply with exactly {n} questions, one per line, without numbering.",
        "### Last answer\n{answer}\n### Evidence pages\n{titles}\n### Suggestions\n",
        {"n", "answer", "titles"}};
    return p;
}

namespace detail {

inline PromptTemplate parse_template_file(const std::filesystem::path& path, const PromptTemplate& base) {
    std::ifstream in(path);
    if (!in) throw TemplateError("cannot read prompt template " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string s = buf.str();
    const auto sys = s.find("[system]\n");
    const auto usr = s.find("\n[user]\n");
    if (sys != 0 || usr == std::string::npos)
        throw TemplateError(path.string() + ": expected [system] and [user] sections");
    PromptTemplate t = base;
    t.system = s.substr(9, usr - 9);
    t.user = s.substr(usr + 8);
    return t;
}

}  // namespace detail

/// Serializes a template in the on-disk `[system]` / `[user]` format.
inline std::string format_template_file(const PromptTemplate& t) {
    return "[system]\n" + t.system + "\n[user]\n" + t.user;
}

/// Loads `<dir>/{rephrase,answer,judge,followup}.txt`, falling back to the
/// built-in text for files that do not exist.
inline PromptSet load_prompt_set(const std::filesystem::path& dir) {
    PromptSet p = default_prompts();
    p.version = dir.filename().string();
    for (PromptTemplate* t : {&p.rephrase, &p.answer, &p.judge, &p.followup}) {
        const auto file = dir / (t->id + ".txt");
        if (std::filesystem::exists(file)) *t = detail::parse_template_file(file, *t);
    }
    return p;
}

/// Every template must render with its own placeholder set and the answer
/// template must carry the out-of-scope instruction.
inline void validate(const PromptSet& p) {
    for (const PromptTemplate* t : {&p.rephrase, &p.answer, &p.judge, &p.followup}) {
        std::map<std::string, std::string> values;
        for (const auto& name : t->placeholders) values[name] = "x";
        (void)render(*t, values);
    }
    if (p.answer.system.find(kOutOfScopeAnswer) == std::string::npos &&
        p.answer.user.find(kOutOfScopeAnswer) == std::string::npos)
        throw TemplateError("answer template lacks the out-of-scope instruction");
}

}  // namespace ragonite::llm
