#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ragonite/corpus/segment.hpp"
#include "ragonite/corpus/types.hpp"

namespace ragonite::corpus {

namespace detail {

inline bool bears_evidence(const DocNode& n) { return !std::holds_alternative<Heading>(n); }

inline int table_index_of(const DocumentTree& tree, std::size_t node) {
    int t = 0;
    for (std::size_t i = 0; i <= node && i < tree.nodes.size(); ++i)
        if (std::holds_alternative<Table>(tree.nodes[i])) ++t;
    return t;
}

}  // namespace detail

/// Attaches page title, previous heading and neighbouring evidence text to `ev`.
///
/// Neighbours are the nearest evidence-bearing nodes (passage, list, table) on
/// either side; headings are skipped. A table footer replaces the following
/// neighbour for the table and all of its rows, and rows share the table's
/// preceding neighbour. Enabled items are joined by single newlines in the
/// order title, heading, before, raw text, after.
inline ContextualizedEvidence contextualize_evidence(const Evidence& ev, const DocumentTree& tree,
                                                     const RawDocument& doc, const ContextConfig& cfg,
                                                     LinearizerMode lin = LinearizerMode::VBL) {
    ContextualizedEvidence out;
    out.evidence = ev;
    out.page_title = doc.title;
    const std::size_t at = ev.node_index;

    for (std::size_t i = at; i-- > 0;) {
        if (const auto* h = std::get_if<Heading>(&tree.nodes[i])) {
            out.prev_heading = h->text;
            break;
        }
    }
    for (std::size_t i = at; i-- > 0;) {
        if (detail::bears_evidence(tree.nodes[i])) {
            out.before_text = node_raw_text(tree.nodes[i], detail::table_index_of(tree, i), lin);
            break;
        }
    }
    const auto* table = at < tree.nodes.size() ? std::get_if<Table>(&tree.nodes[at]) : nullptr;
    if (table && table->footer) {
        out.after_text = *table->footer;
    } else {
        for (std::size_t i = at + 1; i < tree.nodes.size(); ++i) {
            if (detail::bears_evidence(tree.nodes[i])) {
                out.after_text = node_raw_text(tree.nodes[i], detail::table_index_of(tree, i), lin);
                break;
            }
        }
    }

    std::vector<std::string> parts;
    if (cfg.title && !out.page_title.empty()) parts.push_back(out.page_title);
    if (cfg.heading && out.prev_heading) parts.push_back(*out.prev_heading);
    if (cfg.before && out.before_text) parts.push_back(*out.before_text);
    parts.push_back(ev.raw_text);
    if (cfg.after && out.after_text) parts.push_back(*out.after_text);
    out.composed_text = text::join(parts, "\n");
    return out;
}

}  // namespace ragonite::corpus
