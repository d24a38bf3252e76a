#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "ragonite/corpus/linearize.hpp"
#include "ragonite/corpus/types.hpp"
#include "ragonite/text.hpp"

namespace ragonite::corpus {

/// Stable evidence id: the page url plus the evidence's document position.
/// Positions are assigned as if every table and row were emitted, so ids do not
/// depend on the indexing mode.
inline std::string make_evidence_id(const std::string& url, int doc_order) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%05d", doc_order);
    return url + buf;
}

inline std::string node_raw_text(const DocNode& node, int table_index, LinearizerMode lin) {
    if (const auto* p = std::get_if<Passage>(&node)) return p->text;
    if (const auto* l = std::get_if<List>(&node)) return text::join(l->items, "\n");
    if (const auto* t = std::get_if<Table>(&node)) return linearize_table(*t, table_index, std::nullopt, lin);
    return std::get<Heading>(node).text;
}

inline std::vector<Evidence> segment_document(const DocumentTree& tree, const RawDocument& doc,
                                              IndexingMode mode, LinearizerMode lin) {
    std::vector<Evidence> out;
    int order = 0;
    int table_index = 0;
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
        const auto& node = tree.nodes[n];
        if (std::holds_alternative<Heading>(node)) continue;

        Evidence ev;
        ev.doc_url = doc.url;
        ev.node_index = n;
        ev.doc_order = order++;
        ev.id = make_evidence_id(doc.url, ev.doc_order);

        if (const auto* table = std::get_if<Table>(&node)) {
            ++table_index;
            ev.kind = EvidenceKind::table;
            ev.table_index = table_index;
            const std::string table_id = ev.id;
            if (mode != IndexingMode::row_only) {
                ev.raw_text = linearize_table(*table, table_index, std::nullopt, lin);
                out.push_back(ev);
            }
            for (std::size_t r = 0; r < table->rows.size(); ++r) {
                Evidence row;
                row.doc_url = doc.url;
                row.node_index = n;
                row.kind = EvidenceKind::table_row;
                row.doc_order = order++;
                row.id = make_evidence_id(doc.url, row.doc_order);
                row.table_index = table_index;
                row.row_index = static_cast<int>(r + 1);
                row.parent_table_id = table_id;
                if (mode != IndexingMode::table_only) {
                    row.raw_text = linearize_table(*table, table_index, row.row_index, lin);
                    out.push_back(std::move(row));
                }
            }
            continue;
        }
        ev.kind = std::holds_alternative<List>(node) ? EvidenceKind::list : EvidenceKind::passage;
        ev.raw_text = node_raw_text(node, 0, lin);
        out.push_back(std::move(ev));
    }
    return out;
}

}  // namespace ragonite::corpus
