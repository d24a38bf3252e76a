#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "ragonite/corpus/html.hpp"
#include "ragonite/corpus/types.hpp"
#include "ragonite/error.hpp"
#include "ragonite/text.hpp"

namespace ragonite::corpus {

namespace detail {

inline int span_attr(const html::Node& cell, std::string_view name) {
    const auto v = cell.attr(name);
    int n = 0;
    for (char c : v) {
        if (c < '0' || c > '9') break;
        n = n * 10 + (c - '0');
        if (n > 1000) break;
    }
    return std::clamp(n, 1, 1000);
}

struct RawRow {
    std::vector<const html::Node*> cells;
    const html::Node* tr = nullptr;
    enum class Section { head, body, foot } section = Section::body;
};

inline void collect_rows(const html::Node& n, RawRow::Section section, std::vector<RawRow>& rows,
                         std::vector<const html::Node*>& captions) {
    for (const auto& child : n.children) {
        if (child->kind != html::Node::Kind::element) continue;
        if (child->tag == "thead") collect_rows(*child, RawRow::Section::head, rows, captions);
        else if (child->tag == "tbody") collect_rows(*child, RawRow::Section::body, rows, captions);
        else if (child->tag == "tfoot") collect_rows(*child, RawRow::Section::foot, rows, captions);
        else if (child->tag == "caption") captions.push_back(child.get());
        else if (child->tag == "tr") {
            RawRow row;
            row.tr = child.get();
            row.section = section;
            for (const auto& cell : child->children)
                if (cell->is("td") || cell->is("th")) row.cells.push_back(cell.get());
            rows.push_back(std::move(row));
        } else if (child->tag != "table") {
            collect_rows(*child, section, rows, captions);  // stray wrappers such as <form>
        }
    }
}

/// Expands colspan/rowspan by replicating the spanned value into every covered cell.
inline std::vector<std::vector<std::string>> expand_spans(const std::vector<RawRow>& rows) {
    std::vector<std::vector<std::string>> grid(rows.size());
    struct Pending {
        std::string value;
        int remaining = 0;
    };
    std::vector<Pending> carry;  // per column
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto& out = grid[r];
        std::size_t col = 0;
        auto fill_carried = [&] {
            while (col < carry.size() && carry[col].remaining > 0) {
                out.push_back(carry[col].value);
                --carry[col].remaining;
                ++col;
            }
        };
        for (const html::Node* cell : rows[r].cells) {
            fill_carried();
            const std::string value = html::text_content(*cell);
            const int colspan = span_attr(*cell, "colspan");
            const int rowspan = span_attr(*cell, "rowspan");
            for (int c = 0; c < colspan; ++c) {
                out.push_back(value);
                if (carry.size() <= col) carry.resize(col + 1);
                carry[col] = {value, rowspan - 1};
                ++col;
            }
        }
        fill_carried();
        // Spans reaching past the last explicit cell still occupy their columns.
        for (std::size_t c = col; c < carry.size(); ++c) {
            if (carry[c].remaining <= 0) continue;
            while (out.size() < c) out.emplace_back();
            out.push_back(carry[c].value);
            --carry[c].remaining;
        }
    }
    return grid;
}

inline std::optional<Table> build_table(const html::Node& node, std::string_view source) {
    std::vector<RawRow> rows;
    std::vector<const html::Node*> captions;
    collect_rows(node, RawRow::Section::body, rows, captions);

    std::vector<RawRow> body_rows;
    std::vector<const html::Node*> foot_rows;
    for (auto& r : rows) {
        if (r.section == RawRow::Section::foot) foot_rows.push_back(r.tr);
        else body_rows.push_back(r);
    }
    auto grid = expand_spans(body_rows);

    Table table;
    std::size_t first_data = 0;
    const bool thead_first = !body_rows.empty() && body_rows[0].section == RawRow::Section::head;
    const bool all_th_first =
        !body_rows.empty() && !body_rows[0].cells.empty() &&
        std::all_of(body_rows[0].cells.begin(), body_rows[0].cells.end(),
                    [](const html::Node* c) { return c->is("th"); });
    const auto nonempty_row = [](const std::vector<std::string>& row) {
        return std::any_of(row.begin(), row.end(), [](const auto& v) { return !v.empty(); });
    };
    const std::size_t data_rows_after_header = static_cast<std::size_t>(std::count_if(
        grid.begin() + (grid.empty() ? 0 : 1), grid.end(), nonempty_row));
    if ((thead_first || all_th_first) && data_rows_after_header > 0) {
        table.headers = grid[0];
        table.header_html = std::string(source.substr(
            body_rows[0].tr->src_begin, body_rows[0].tr->src_end - body_rows[0].tr->src_begin));
        first_data = 1;
    } else {
        table.synthesized_headers = true;
    }
    std::size_t width = table.headers.size();
    for (std::size_t r = first_data; r < grid.size(); ++r) {
        if (!nonempty_row(grid[r])) continue;
        width = std::max(width, grid[r].size());
        table.rows.push_back(std::move(grid[r]));
        const auto* tr = body_rows[r].tr;
        table.row_html.emplace_back(source.substr(tr->src_begin, tr->src_end - tr->src_begin));
    }
    if (table.rows.empty()) return std::nullopt;
    for (std::size_t c = 0; c < width; ++c) {
        if (c >= table.headers.size()) table.headers.push_back("Column " + std::to_string(c + 1));
        else if (table.headers[c].empty()) table.headers[c] = "Column " + std::to_string(c + 1);
    }
    for (auto& row : table.rows) row.resize(width);

    std::vector<std::string> footer_parts;
    for (const auto* cap : captions)
        if (auto t = html::text_content(*cap); !t.empty()) footer_parts.push_back(std::move(t));
    for (const auto* tr : foot_rows)
        if (auto t = html::text_content(*tr); !t.empty()) footer_parts.push_back(std::move(t));
    if (!footer_parts.empty()) table.footer = text::join(footer_parts, " ");
    table.source_html = std::string(source.substr(node.src_begin, node.src_end - node.src_begin));
    return table;
}

inline void build_list(const html::Node& list, int depth, std::vector<std::string>& items) {
    const std::string prefix = [&] {
        std::string p;
        for (int d = 0; d < depth; ++d) p += "- ";
        return p;
    }();
    auto emit = [&](std::string text) {
        text = text::collapse_whitespace(text);
        if (!text.empty()) items.push_back(prefix + text);
    };
    for (const auto& child : list.children) {
        if (child->kind == html::Node::Kind::text) {
            emit(child->text);
            continue;
        }
        if (child->tag == "ul" || child->tag == "ol") {
            build_list(*child, depth + 1, items);
            continue;
        }
        // An item's own text excludes its nested lists, which follow it depth-first.
        std::string own;
        std::vector<const html::Node*> nested;
        auto walk = [&](auto&& self, const html::Node& n) -> void {
            for (const auto& c : n.children) {
                if (c->kind == html::Node::Kind::text) own += c->text;
                else if (c->tag == "ul" || c->tag == "ol") nested.push_back(c.get());
                else if (html::is_skipped(c->tag)) continue;
                else {
                    const bool block = html::is_block(c->tag);
                    if (block) own += ' ';
                    if (c->tag == "table") own += html::text_content(*c);
                    else self(self, *c);
                    if (block) own += ' ';
                }
            }
        };
        walk(walk, *child);
        emit(own);
        for (const auto* n : nested) build_list(*n, depth + 1, items);
    }
}

class TreeWalker {
public:
    TreeWalker(DocumentTree& tree, std::string_view source) : tree_(tree), source_(source) {}

    void visit(const html::Node& n) {
        if (n.kind == html::Node::Kind::text) {
            line_ += n.text;
            return;
        }
        if (html::is_skipped(n.tag)) return;
        if (html::detail::is_heading(n.tag)) {
            flush_passage();
            if (auto t = html::text_content(n); !t.empty())
                tree_.nodes.emplace_back(Heading{n.tag[1] - '0', std::move(t)});
            return;
        }
        if (n.tag == "ul" || n.tag == "ol") {
            flush_passage();
            List list;
            list.ordered = n.tag == "ol";
            build_list(n, 0, list.items);
            if (!list.items.empty()) tree_.nodes.emplace_back(std::move(list));
            return;
        }
        if (n.tag == "table") {
            flush_passage();
            if (auto table = build_table(n, source_)) tree_.nodes.emplace_back(std::move(*table));
            return;
        }
        const bool block = html::is_block(n.tag);
        if (block) break_line();
        for (const auto& c : n.children) visit(*c);
        if (block) break_line();
    }

    void finish() { flush_passage(); }

private:
    DocumentTree& tree_;
    std::string_view source_;
    std::string line_;
    std::vector<std::string> lines_;

    void break_line() {
        auto collapsed = text::collapse_whitespace(line_);
        if (!collapsed.empty()) lines_.push_back(std::move(collapsed));
        line_.clear();
    }

    void flush_passage() {
        break_line();
        if (!lines_.empty()) tree_.nodes.emplace_back(Passage{text::join(lines_, "\n")});
        lines_.clear();
    }
};

}  // namespace detail

/// Segments an HTML page into headings, passages, lists and tables in document order.
///
/// Text between headings forms one passage, split wherever a list or table
/// interrupts it; block elements inside a passage become line breaks. Text
/// inside list and table markup never reaches a passage.
inline DocumentTree parse_document(const RawDocument& doc) {
    DocumentTree tree;
    const auto root = html::parse(doc.html);
    detail::TreeWalker walker(tree, doc.html);
    walker.visit(*root);
    walker.finish();
    if (tree.nodes.empty()) throw EmptyDocument(doc.url);
    return tree;
}

}  // namespace ragonite::corpus
