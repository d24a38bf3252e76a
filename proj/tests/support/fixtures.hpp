#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragonite/corpus/types.hpp"
#include "ragonite/evaluation/benchmark.hpp"

namespace fixtures {

namespace fs = std::filesystem;

inline fs::path source_dir() { return RAGONITE_SOURCE_DIR; }
inline fs::path test_dir() { return RAGONITE_TEST_DIR; }
inline fs::path sample_dir() { return source_dir() / "data" / "sample"; }

/// Directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("ragonite-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Page {
    std::string file;
    std::string url;
    std::string title;
    std::string html;
};

/// Writes the pages plus manifest.json into `dir`.
inline void write_corpus(const fs::path& dir, const std::vector<Page>& pages) {
    nlohmann::json manifest = nlohmann::json::object();
    for (const auto& p : pages) {
        manifest[p.file] = {{"url", p.url}, {"title", p.title}, {"space", "TEST"}};
        write_file(dir / p.file, p.html);
    }
    write_file(dir / "manifest.json", manifest.dump(2));
}

/// Two pages: one passage + one list, and one table with three rows.
/// Under `both` indexing that is six evidences.
inline std::vector<Page> mini_corpus() {
    return {{"a.html", "https://wiki.test/A", "Alpha page",
             "<h1>Intro</h1><p>Alpha has a passage.</p><ul><li>first</li><li>second</li></ul>"},
            {"b.html", "https://wiki.test/B", "Beta page",
             "<h2>Data</h2><table><tr><th>K</th><th>V</th></tr><tr><td>x</td><td>1</td></tr>"
             "<tr><td>y</td><td>2</td></tr><tr><td>z</td><td>3</td></tr></table>"}};
}

inline const std::vector<std::string>& project_names() {
    static const std::vector<std::string> names = {
        "Aster",  "Birch",  "Cedar", "Dahlia", "Elm",    "Fennel", "Ginkgo", "Hazel", "Iris",   "Juniper",
        "Kale",   "Laurel", "Maple", "Nettle", "Oregano", "Poplar", "Quince", "Rowan", "Sorrel", "Tansy"};
    return names;
}

/// Twenty pages whose bodies are identical; only the page title names the
/// project. Without title context no retriever can tell them apart.
inline std::vector<Page> title_discriminative_corpus() {
    std::vector<Page> pages;
    for (const auto& name : project_names()) {
        pages.push_back({name + ".html", "https://wiki.test/projects/" + name, "Project " + name,
                         "<h2>Release checklist</h2>"
                         "<p>The rollout lead signs off the deployment checklist after the staging review.</p>"
                         "<ul><li>Freeze the branch</li><li>Tag the release candidate</li></ul>"});
    }
    return pages;
}

/// One query per page of title_discriminative_corpus().
inline std::vector<ragonite::evaluation::BenchmarkItem> title_discriminative_queries() {
    std::vector<ragonite::evaluation::BenchmarkItem> items;
    for (const auto& name : project_names()) {
        const std::string q = "Who signs off the deployment checklist for Project " + name + "?";
        items.push_back({"proj-" + name, 1, "en", q, q, "The rollout lead",
                         {"https://wiki.test/projects/" + name}, "simple", "passage"});
    }
    return items;
}

/// Evidence with only an id, url and composed text.
inline ragonite::corpus::ContextualizedEvidence evidence(const std::string& id, const std::string& text,
                                                          const std::string& url = "https://wiki.test/page") {
    ragonite::corpus::ContextualizedEvidence ev;
    ev.evidence.id = id;
    ev.evidence.doc_url = url;
    ev.evidence.raw_text = text;
    ev.page_title = "Fixture";
    ev.composed_text = text;
    return ev;
}

inline const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words = {
        "budget",   "calendar", "printer",  "parking", "badge",   "laptop",  "invoice", "roadmap",
        "kitchen",  "meeting",  "archive",  "sprint",  "backlog", "license", "router",  "firewall",
        "training", "offsite",  "survey",   "payroll", "ticket",  "monitor", "server",  "storage",
        "wiki",     "holiday",  "contract", "vendor",  "audit",   "desk",    "locker",  "shuttle"};
    return words;
}

/// A necessity case: ten evidences, exactly one of which carries the answer
/// marker. The question shares no content word with any evidence, so the
/// mock answer depends on that one evidence only.
struct NecessityCase {
    std::string question;
    std::vector<ragonite::corpus::ContextualizedEvidence> evidences;
    std::string needed_id;
};

inline NecessityCase necessity_case(int seed, std::size_t position) {
    std::mt19937 rng(static_cast<unsigned>(seed));
    const auto& words = filler_words();
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    NecessityCase c;
    c.question = "Which code word was chosen in case " + std::to_string(seed) + "?";
    for (std::size_t i = 0; i < 10; ++i) {
        std::string text = "Note " + std::to_string(i) + ":";
        for (int w = 0; w < 8; ++w) text += " " + words[pick(rng)];
        text += ".";
        const std::string id = "https://wiki.test/case" + std::to_string(seed) + "#" + std::to_string(10000 + i);
        if (i == position) {
            text += " ANSWER:=token_" + std::to_string(seed);
            c.needed_id = id;
        }
        c.evidences.push_back(evidence(id, text, "https://wiki.test/case" + std::to_string(seed)));
    }
    return c;
}

}  // namespace fixtures
