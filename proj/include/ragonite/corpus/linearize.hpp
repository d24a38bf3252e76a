#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ragonite/corpus/types.hpp"
#include "ragonite/error.hpp"
#include "ragonite/text.hpp"

namespace ragonite::corpus {

namespace detail {

inline std::vector<std::string> padded_row(const Table& table, std::size_t row) {
    auto cells = table.rows.at(row);
    if (cells.size() > table.headers.size())
        throw HeaderArityMismatch(table.headers.size(), cells.size());
    cells.resize(table.headers.size());
    return cells;
}

inline std::string verbalize_row(const Table& table, int table_index, std::size_t row) {
    const auto cells = padded_row(table, row);
    std::string out = "Row " + std::to_string(row + 1) + " in Table " + std::to_string(table_index) + ": ";
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (c) out += ", and ";
        out += table.headers[c] + " is " + cells[c];
    }
    return out;
}

inline std::string piped_line(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + c + " |";
    return out;
}

inline std::string md_escape(const std::string& cell) {
    std::string out;
    for (char c : cell) {
        if (c == '|') out += '\\';
        out += c;
    }
    return out;
}

inline std::string md_line(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + md_escape(c) + " |";
    return out;
}

inline std::string md_rule(std::size_t columns) {
    std::string out = "|";
    for (std::size_t c = 0; c < columns; ++c) out += " --- |";
    return out;
}

inline std::string html_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string html_row(const std::vector<std::string>& cells, const char* tag) {
    std::string out = "<tr>";
    for (const auto& c : cells) out += std::string("<") + tag + ">" + html_escape(c) + "</" + tag + ">";
    return out + "</tr>";
}

inline void append_words(std::vector<std::string>& out, const std::vector<std::string>& cells) {
    for (const auto& c : cells)
        if (!c.empty()) out.push_back(c);
}

}  // namespace detail

/// Renders a whole table (row_index unset) or one of its rows (1-based) as text.
/// The footer is not part of the linearization (it is attached as after-context)
/// except in HTML mode, where the whole table keeps its original markup.
inline std::string linearize_table(const Table& table, int table_index, std::optional<int> row_index,
                                   LinearizerMode mode) {
    if (table_index < 1) throw PreconditionViolation("table_index must be >= 1");
    if (row_index && (*row_index < 1 || static_cast<std::size_t>(*row_index) > table.rows.size()))
        throw PreconditionViolation("row_index out of range: " + std::to_string(*row_index));

    std::vector<std::size_t> rows;
    if (row_index) rows.push_back(static_cast<std::size_t>(*row_index - 1));
    else
        for (std::size_t r = 0; r < table.rows.size(); ++r) rows.push_back(r);
    const bool whole = !row_index.has_value();

    std::vector<std::string> lines;
    switch (mode) {
        case LinearizerMode::VBL:
            if (whole) lines.push_back("Table " + std::to_string(table_index) + ":");
            for (auto r : rows) lines.push_back(detail::verbalize_row(table, table_index, r));
            return text::join(lines, "\n");
        case LinearizerMode::PIPE:
            lines.push_back(detail::piped_line(table.headers));
            for (auto r : rows) lines.push_back(detail::piped_line(detail::padded_row(table, r)));
            return text::join(lines, "\n");
        case LinearizerMode::MD:
            lines.push_back(detail::md_line(table.headers));
            lines.push_back(detail::md_rule(table.columns()));
            for (auto r : rows) lines.push_back(detail::md_line(detail::padded_row(table, r)));
            return text::join(lines, "\n");
        case LinearizerMode::HTML: {
            for (auto r : rows) (void)detail::padded_row(table, r);
            if (whole && !table.source_html.empty()) return table.source_html;
            std::string out = "<table>";
            if (!table.synthesized_headers)
                out += table.header_html.empty() ? detail::html_row(table.headers, "th") : table.header_html;
            for (auto r : rows)
                out += r < table.row_html.size() ? table.row_html[r] : detail::html_row(table.rows[r], "td");
            return out + "</table>";
        }
        case LinearizerMode::TXT: {
            std::vector<std::string> words;
            if (!table.synthesized_headers) detail::append_words(words, table.headers);
            for (auto r : rows) detail::append_words(words, detail::padded_row(table, r));
            return text::join(words, " ");
        }
    }
    return {};
}

}  // namespace ragonite::corpus
