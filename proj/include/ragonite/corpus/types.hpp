#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragonite/error.hpp"

namespace ragonite::corpus {

struct RawDocument {
    std::string url;
    std::string title;
    std::string space;
    std::string html;
    std::string fetched_at;  // ISO-8601, may be empty
};

struct Heading {
    int level = 1;
    std::string text;
    bool operator==(const Heading&) const = default;
};

struct Passage {
    std::string text;
    bool operator==(const Passage&) const = default;
};

struct List {
    bool ordered = false;
    std::vector<std::string> items;  // nested items carry one "- " per depth level
    bool operator==(const List&) const = default;
};

struct Table {
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> rows;
    std::optional<std::string> footer;
    bool synthesized_headers = false;
    // Original markup, used by the HTML linearizer.
    std::string source_html;
    std::string header_html;
    std::vector<std::string> row_html;

    std::size_t columns() const noexcept { return headers.size(); }
};

using DocNode = std::variant<Heading, Passage, List, Table>;

struct DocumentTree {
    std::vector<DocNode> nodes;
};

enum class EvidenceKind { passage, list, table, table_row };

inline std::string_view to_string(EvidenceKind k) {
    switch (k) {
        case EvidenceKind::passage: return "passage";
        case EvidenceKind::list: return "list";
        case EvidenceKind::table: return "table";
        case EvidenceKind::table_row: return "table_row";
    }
    return "passage";
}

inline EvidenceKind evidence_kind_from(std::string_view s) {
    if (s == "passage") return EvidenceKind::passage;
    if (s == "list") return EvidenceKind::list;
    if (s == "table") return EvidenceKind::table;
    if (s == "table_row") return EvidenceKind::table_row;
    throw Error("unknown evidence kind: " + std::string(s));
}

struct Evidence {
    std::string id;
    std::string doc_url;
    EvidenceKind kind = EvidenceKind::passage;
    std::string raw_text;
    int doc_order = 0;
    std::optional<int> table_index;
    std::optional<int> row_index;
    std::optional<std::string> parent_table_id;
    std::size_t node_index = 0;  // position of the source node in the DocumentTree

    bool operator==(const Evidence&) const = default;
};

/// Which document context items are concatenated to each evidence.
struct ContextConfig {
    bool title = true;    // TTL
    bool heading = true;  // HDR
    bool before = true;   // BEF
    bool after = true;    // AFT

    static constexpr ContextConfig all() { return {true, true, true, true}; }
    static constexpr ContextConfig none() { return {false, false, false, false}; }
    bool operator==(const ContextConfig&) const = default;
};

/// Parses "ALL", "NONE", or a comma/plus separated subset of TTL,HDR,BEF,AFT.
inline ContextConfig parse_context_config(std::string_view spec) {
    if (spec == "ALL" || spec == "all") return ContextConfig::all();
    if (spec == "NONE" || spec == "none") return ContextConfig::none();
    ContextConfig cfg = ContextConfig::none();
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto end = spec.find_first_of(",+", start);
        if (end == std::string_view::npos) end = spec.size();
        const auto item = spec.substr(start, end - start);
        if (item == "TTL") cfg.title = true;
        else if (item == "HDR") cfg.heading = true;
        else if (item == "BEF") cfg.before = true;
        else if (item == "AFT") cfg.after = true;
        else throw InvalidConfig("unknown context flag: " + std::string(item));
        start = end + 1;
    }
    return cfg;
}

inline std::string to_string(const ContextConfig& cfg) {
    if (cfg == ContextConfig::all()) return "ALL";
    if (cfg == ContextConfig::none()) return "NONE";
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += "+";
        out += name;
    };
    add(cfg.title, "TTL");
    add(cfg.heading, "HDR");
    add(cfg.before, "BEF");
    add(cfg.after, "AFT");
    return out;
}

enum class LinearizerMode { VBL, PIPE, MD, HTML, TXT };

inline std::string_view to_string(LinearizerMode m) {
    switch (m) {
        case LinearizerMode::VBL: return "VBL";
        case LinearizerMode::PIPE: return "PIPE";
        case LinearizerMode::MD: return "MD";
        case LinearizerMode::HTML: return "HTML";
        case LinearizerMode::TXT: return "TXT";
    }
    return "VBL";
}

inline LinearizerMode linearizer_from(std::string_view s) {
    if (s == "VBL") return LinearizerMode::VBL;
    if (s == "PIPE") return LinearizerMode::PIPE;
    if (s == "MD") return LinearizerMode::MD;
    if (s == "HTML") return LinearizerMode::HTML;
    if (s == "TXT") return LinearizerMode::TXT;
    throw InvalidConfig("unknown linearizer: " + std::string(s));
}

enum class IndexingMode { row_only, table_only, both };

inline std::string_view to_string(IndexingMode m) {
    switch (m) {
        case IndexingMode::row_only: return "row_only";
        case IndexingMode::table_only: return "table_only";
        case IndexingMode::both: return "both";
    }
    return "both";
}

inline IndexingMode indexing_from(std::string_view s) {
    if (s == "row_only") return IndexingMode::row_only;
    if (s == "table_only") return IndexingMode::table_only;
    if (s == "both") return IndexingMode::both;
    throw InvalidConfig("unknown indexing mode: " + std::string(s));
}

struct ContextualizedEvidence {
    Evidence evidence;
    std::string page_title;
    std::optional<std::string> prev_heading;
    std::optional<std::string> before_text;
    std::optional<std::string> after_text;
    std::string composed_text;

    const std::string& id() const noexcept { return evidence.id; }
    bool operator==(const ContextualizedEvidence&) const = default;
};

// JSON-lines pool export. Field names are part of the on-disk format.

template <class T>
nlohmann::json nullable(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
}

inline void to_json(nlohmann::json& j, const Evidence& e) {
    j = nlohmann::json{{"id", e.id},
                       {"doc_url", e.doc_url},
                       {"kind", to_string(e.kind)},
                       {"raw_text", e.raw_text},
                       {"doc_order", e.doc_order},
                       {"table_index", nullable(e.table_index)},
                       {"row_index", nullable(e.row_index)},
                       {"parent_table_id", nullable(e.parent_table_id)},
                       {"node_index", e.node_index}};
}

inline void from_json(const nlohmann::json& j, Evidence& e) {
    e.id = j.at("id").get<std::string>();
    e.doc_url = j.at("doc_url").get<std::string>();
    e.kind = evidence_kind_from(j.at("kind").get<std::string>());
    e.raw_text = j.at("raw_text").get<std::string>();
    e.doc_order = j.at("doc_order").get<int>();
    auto opt_int = [&](const char* key) -> std::optional<int> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<int>();
    };
    e.table_index = opt_int("table_index");
    e.row_index = opt_int("row_index");
    if (j.contains("parent_table_id") && !j.at("parent_table_id").is_null())
        e.parent_table_id = j.at("parent_table_id").get<std::string>();
    else
        e.parent_table_id.reset();
    e.node_index = j.value("node_index", std::size_t{0});
}

inline void to_json(nlohmann::json& j, const ContextualizedEvidence& c) {
    j = nlohmann::json{{"evidence", c.evidence},
                       {"page_title", c.page_title},
                       {"prev_heading", nullable(c.prev_heading)},
                       {"before_text", nullable(c.before_text)},
                       {"after_text", nullable(c.after_text)},
                       {"composed_text", c.composed_text}};
}

inline void from_json(const nlohmann::json& j, ContextualizedEvidence& c) {
    c.evidence = j.at("evidence").get<Evidence>();
    c.page_title = j.at("page_title").get<std::string>();
    auto opt = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<std::string>();
    };
    c.prev_heading = opt("prev_heading");
    c.before_text = opt("before_text");
    c.after_text = opt("after_text");
    c.composed_text = j.at("composed_text").get<std::string>();
}

}  // namespace ragonite::corpus
