#pragma once

// Tolerant HTML tokenizer and tree builder. Covers the subset of HTML5 tree
// construction that wiki exports exercise: implied end tags for p/li/dt/dd,
// table sections, rows and cells, void elements, raw-text elements and
// stray end tags. Never throws on malformed markup.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ragonite/text.hpp"

namespace ragonite::html {

struct Node {
    enum class Kind { element, text };

    Kind kind = Kind::element;
    std::string tag;  // lowercase; empty for text nodes
    std::vector<std::pair<std::string, std::string>> attrs;
    std::string text;  // decoded, for text nodes
    std::vector<std::unique_ptr<Node>> children;
    Node* parent = nullptr;
    std::size_t src_begin = 0;  // byte range of the element's markup in the source
    std::size_t src_end = 0;

    bool is(std::string_view name) const noexcept { return kind == Kind::element && tag == name; }

    std::string_view attr(std::string_view name) const noexcept {
        for (const auto& [k, v] : attrs)
            if (k == name) return v;
        return {};
    }
};

namespace detail {

inline void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

struct NamedEntity {
    std::string_view name;
    std::uint32_t cp;
};

inline constexpr std::array<NamedEntity, 40> kEntities{{
    {"amp", '&'},       {"lt", '<'},         {"gt", '>'},        {"quot", '"'},
    {"apos", '\''},     {"nbsp", 0xA0},      {"copy", 0xA9},     {"reg", 0xAE},
    {"trade", 0x2122},  {"hellip", 0x2026},  {"mdash", 0x2014},  {"ndash", 0x2013},
    {"lsquo", 0x2018},  {"rsquo", 0x2019},   {"ldquo", 0x201C},  {"rdquo", 0x201D},
    {"bull", 0x2022},   {"middot", 0xB7},    {"deg", 0xB0},      {"euro", 0x20AC},
    {"auml", 0xE4},     {"ouml", 0xF6},      {"uuml", 0xFC},     {"Auml", 0xC4},
    {"Ouml", 0xD6},     {"Uuml", 0xDC},      {"szlig", 0xDF},    {"eacute", 0xE9},
    {"egrave", 0xE8},   {"agrave", 0xE0},    {"ccedil", 0xE7},   {"times", 0xD7},
    {"rarr", 0x2192},   {"larr", 0x2190},    {"laquo", 0xAB},    {"raquo", 0xBB},
    {"para", 0xB6},     {"sect", 0xA7},      {"shy", 0xAD},      {"zwj", 0x200D},
}};

}  // namespace detail

/// Decodes character references. Unknown named references are kept verbatim.
inline std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            continue;
        }
        const auto semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back('&');
            continue;
        }
        const auto ref = s.substr(i + 1, semi - i - 1);
        bool done = false;
        if (!ref.empty() && ref[0] == '#') {
            std::uint32_t cp = 0;
            bool ok = ref.size() > 1;
            const bool hex = ok && (ref[1] == 'x' || ref[1] == 'X');
            for (std::size_t k = hex ? 2 : 1; ok && k < ref.size(); ++k) {
                const char c = ref[k];
                int digit = -1;
                if (c >= '0' && c <= '9') digit = c - '0';
                else if (hex && c >= 'a' && c <= 'f') digit = c - 'a' + 10;
                else if (hex && c >= 'A' && c <= 'F') digit = c - 'A' + 10;
                if (digit < 0 || cp > 0x10FFFF) ok = false;
                else cp = cp * (hex ? 16u : 10u) + static_cast<std::uint32_t>(digit);
            }
            if (ok && ref.size() > (hex ? 2u : 1u)) {
                detail::append_utf8(out, cp);
                done = true;
            }
        } else {
            for (const auto& e : detail::kEntities) {
                if (e.name == ref) {
                    detail::append_utf8(out, e.cp);
                    done = true;
                    break;
                }
            }
        }
        if (done) i = semi;
        else out.push_back('&');
    }
    return out;
}

namespace detail {

inline bool one_of(std::string_view tag, std::initializer_list<std::string_view> names) {
    return std::find(names.begin(), names.end(), tag) != names.end();
}

inline bool is_void(std::string_view tag) {
    return one_of(tag, {"area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta",
                        "param", "source", "track", "wbr"});
}

inline bool is_raw_text(std::string_view tag) {
    return one_of(tag, {"script", "style", "textarea", "title", "xmp", "noscript"});
}

inline bool closes_p(std::string_view tag) {
    return one_of(tag, {"address", "article", "aside", "blockquote", "div", "dl", "fieldset",
                        "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header",
                        "hr", "main", "nav", "ol", "p", "pre", "section", "table", "ul"});
}

inline bool is_heading(std::string_view tag) {
    return tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6';
}

class TreeBuilder {
public:
    explicit TreeBuilder(std::string_view src) : src_(src) {
        root_ = std::make_unique<Node>();
        root_->tag = "#document";
        root_->src_end = src.size();
        stack_.push_back(root_.get());
    }

    std::unique_ptr<Node> run() {
        std::size_t i = 0;
        while (i < src_.size()) {
            if (src_[i] == '<') {
                const std::size_t next = consume_markup(i);
                if (next != i) {
                    i = next;
                    continue;
                }
            }
            const auto lt = src_.find('<', i + 1);
            const std::size_t end = lt == std::string_view::npos ? src_.size() : lt;
            add_text(src_.substr(i, end - i));
            i = end;
        }
        while (stack_.size() > 1) pop(src_.size());
        return std::move(root_);
    }

private:
    std::string_view src_;
    std::unique_ptr<Node> root_;
    std::vector<Node*> stack_;

    Node* current() const { return stack_.back(); }

    void pop(std::size_t at) {
        Node* n = stack_.back();
        if (n->src_end == 0) n->src_end = at;
        stack_.pop_back();
    }

    void add_text(std::string_view raw) {
        if (raw.empty()) return;
        auto decoded = decode_entities(raw);
        Node* parent = current();
        if (!parent->children.empty() && parent->children.back()->kind == Node::Kind::text) {
            parent->children.back()->text += decoded;
            return;
        }
        auto node = std::make_unique<Node>();
        node->kind = Node::Kind::text;
        node->text = std::move(decoded);
        node->parent = parent;
        parent->children.push_back(std::move(node));
    }

    /// Returns the position after the markup starting at `i`, or `i` if `<` is literal text.
    std::size_t consume_markup(std::size_t i) {
        if (src_.compare(i, 4, "<!--") == 0) {
            const auto end = src_.find("-->", i + 4);
            return end == std::string_view::npos ? src_.size() : end + 3;
        }
        if (i + 1 < src_.size() && (src_[i + 1] == '!' || src_[i + 1] == '?')) {
            const auto end = src_.find('>', i + 2);
            return end == std::string_view::npos ? src_.size() : end + 1;
        }
        const bool closing = i + 1 < src_.size() && src_[i + 1] == '/';
        std::size_t p = i + (closing ? 2 : 1);
        if (p >= src_.size() || !std::isalpha(static_cast<unsigned char>(src_[p]))) {
            if (closing) {  // `</ >` and friends: bogus comment
                const auto end = src_.find('>', p);
                return end == std::string_view::npos ? src_.size() : end + 1;
            }
            return i;
        }
        std::size_t name_end = p;
        while (name_end < src_.size() && !is_space(src_[name_end]) && src_[name_end] != '>' &&
               src_[name_end] != '/')
            ++name_end;
        const std::string name = text::ascii_lower(src_.substr(p, name_end - p));

        std::vector<std::pair<std::string, std::string>> attrs;
        bool self_closing = false;
        std::size_t q = parse_attributes(name_end, attrs, self_closing);

        if (closing) {
            end_tag(name, i, q);
            return q;
        }
        start_tag(name, std::move(attrs), i, q);
        if (is_raw_text(name) && !self_closing) {
            const std::string close = "</" + name;
            std::size_t end = q;
            while (true) {
                end = src_.find("</", end);
                if (end == std::string_view::npos) break;
                if (text::ascii_lower(src_.substr(end, close.size())) == close) break;
                end += 2;
            }
            const std::size_t text_end = end == std::string_view::npos ? src_.size() : end;
            add_text(src_.substr(q, text_end - q));
            if (end == std::string_view::npos) {
                pop(src_.size());
                return src_.size();
            }
            const auto gt = src_.find('>', end);
            const std::size_t after = gt == std::string_view::npos ? src_.size() : gt + 1;
            end_tag(name, end, after);
            return after;
        }
        if (self_closing && !is_void(name)) end_tag(name, q, q);
        return q;
    }

    static bool is_space(char c) { return text::is_space(c); }

    std::size_t parse_attributes(std::size_t p,
                                 std::vector<std::pair<std::string, std::string>>& attrs,
                                 bool& self_closing) {
        while (p < src_.size()) {
            while (p < src_.size() && is_space(src_[p])) ++p;
            if (p >= src_.size()) return p;
            if (src_[p] == '>') return p + 1;
            if (src_[p] == '/') {
                ++p;
                if (p < src_.size() && src_[p] == '>') {
                    self_closing = true;
                    return p + 1;
                }
                continue;
            }
            std::size_t k = p;
            while (k < src_.size() && !is_space(src_[k]) && src_[k] != '=' && src_[k] != '>' &&
                   !(src_[k] == '/' && k + 1 < src_.size() && src_[k + 1] == '>'))
                ++k;
            std::string key = text::ascii_lower(src_.substr(p, k - p));
            if (k == p) ++k;  // stray character; skip it
            p = k;
            while (p < src_.size() && is_space(src_[p])) ++p;
            std::string value;
            if (p < src_.size() && src_[p] == '=') {
                ++p;
                while (p < src_.size() && is_space(src_[p])) ++p;
                if (p < src_.size() && (src_[p] == '"' || src_[p] == '\'')) {
                    const char quote = src_[p];
                    const auto end = src_.find(quote, p + 1);
                    const std::size_t stop = end == std::string_view::npos ? src_.size() : end;
                    value = decode_entities(src_.substr(p + 1, stop - p - 1));
                    p = stop == src_.size() ? stop : stop + 1;
                } else {
                    std::size_t e = p;
                    while (e < src_.size() && !is_space(src_[e]) && src_[e] != '>') ++e;
                    value = decode_entities(src_.substr(p, e - p));
                    p = e;
                }
            }
            if (!key.empty()) attrs.emplace_back(std::move(key), std::move(value));
        }
        return p;
    }

    /// Index of the topmost open element named `tag` that is not hidden behind a boundary.
    long find_open(std::string_view tag, std::initializer_list<std::string_view> boundaries) const {
        for (long k = static_cast<long>(stack_.size()) - 1; k > 0; --k) {
            if (stack_[static_cast<std::size_t>(k)]->tag == tag) return k;
            if (one_of(stack_[static_cast<std::size_t>(k)]->tag, boundaries)) return -1;
        }
        return -1;
    }

    void close_to(long index, std::size_t at) {
        while (static_cast<long>(stack_.size()) > index) pop(at);
    }

    void start_tag(const std::string& name, std::vector<std::pair<std::string, std::string>> attrs,
                   std::size_t begin, std::size_t end) {
        const std::initializer_list<std::string_view> kCellScope = {
            "table", "td", "th", "li", "ul", "ol", "body", "html"};
        if (closes_p(name)) {
            if (long k = find_open("p", kCellScope); k > 0) close_to(k, begin);
        }
        if (is_heading(name) && is_heading(current()->tag)) pop(begin);
        if (name == "li") {
            if (long k = find_open("li", {"ul", "ol", "table", "td", "th"}); k > 0) close_to(k, begin);
        } else if (name == "dt" || name == "dd") {
            for (auto t : {"dt", "dd"})
                if (long k = find_open(t, {"dl", "table"}); k > 0) close_to(k, begin);
        } else if (name == "tr") {
            for (auto t : {"td", "th", "tr"})
                if (long k = find_open(t, {"table", "thead", "tbody", "tfoot"}); k > 0) close_to(k, begin);
        } else if (name == "td" || name == "th") {
            for (auto t : {"td", "th"})
                if (long k = find_open(t, {"tr", "table"}); k > 0) close_to(k, begin);
            if (one_of(current()->tag, {"table", "thead", "tbody", "tfoot"}))
                push(make_element("tr", {}, begin));
        } else if (one_of(name, {"thead", "tbody", "tfoot", "caption"})) {
            for (auto t : {"td", "th", "tr", "thead", "tbody", "tfoot", "caption"})
                if (long k = find_open(t, {"table"}); k > 0) close_to(k, begin);
        }

        auto node = make_element(name, std::move(attrs), begin);
        if (is_void(name)) {
            node->src_end = end;
            node->parent = current();
            current()->children.push_back(std::move(node));
            return;
        }
        push(std::move(node));
    }

    std::unique_ptr<Node> make_element(std::string name,
                                       std::vector<std::pair<std::string, std::string>> attrs,
                                       std::size_t begin) {
        auto node = std::make_unique<Node>();
        node->tag = std::move(name);
        node->attrs = std::move(attrs);
        node->src_begin = begin;
        return node;
    }

    void push(std::unique_ptr<Node> node) {
        Node* raw = node.get();
        node->parent = current();
        current()->children.push_back(std::move(node));
        stack_.push_back(raw);
    }

    void end_tag(const std::string& name, std::size_t begin, std::size_t end) {
        if (is_void(name)) {
            if (name == "br") start_tag("br", {}, begin, end);
            return;
        }
        const bool table_part = one_of(name, {"table", "thead", "tbody", "tfoot", "tr", "td", "th", "caption"});
        for (long k = static_cast<long>(stack_.size()) - 1; k > 0; --k) {
            const auto& tag = stack_[static_cast<std::size_t>(k)]->tag;
            if (tag == name) {
                while (static_cast<long>(stack_.size()) > k + 1) pop(begin);
                stack_.back()->src_end = end;
                stack_.pop_back();
                return;
            }
            // End tags do not reach across table boundaries unless they are table parts.
            if (!table_part && one_of(tag, {"table", "td", "th"})) return;
            if (table_part && name != "table" && tag == "table") return;
        }
    }
};

}  // namespace detail

/// Parses arbitrary (possibly malformed) HTML into an element tree rooted at `#document`.
inline std::unique_ptr<Node> parse(std::string_view source) {
    return detail::TreeBuilder(source).run();
}

inline bool is_block(std::string_view tag) {
    return detail::one_of(tag, {"address", "article", "aside", "blockquote", "br", "dd", "div", "dl",
                                "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1",
                                "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav",
                                "ol", "p", "pre", "section", "table", "tr", "td", "th", "ul",
                                "caption", "thead", "tbody", "tfoot", "body", "html"});
}

inline bool is_skipped(std::string_view tag) {
    return detail::one_of(tag, {"head", "script", "style", "template", "noscript", "title",
                                "textarea", "svg", "math", "iframe", "object", "button", "select"});
}

/// Concatenated text of the subtree; block boundaries become single spaces and
/// whitespace is collapsed.
inline std::string text_content(const Node& node) {
    std::string raw;
    auto walk = [&](auto&& self, const Node& n) -> void {
        if (n.kind == Node::Kind::text) {
            raw += n.text;
            return;
        }
        if (is_skipped(n.tag)) return;
        const bool block = is_block(n.tag);
        if (block) raw.push_back(' ');
        for (const auto& c : n.children) self(self, *c);
        if (block) raw.push_back(' ');
    };
    walk(walk, node);
    return text::collapse_whitespace(raw);
}

}  // namespace ragonite::html
