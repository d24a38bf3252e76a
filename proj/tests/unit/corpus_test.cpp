#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "ragonite/corpus/pool.hpp"
#include "support/fixtures.hpp"

namespace corpus = ragonite::corpus;
using ragonite::HeaderArityMismatch;
using ragonite::InvalidConfig;
using ragonite::ManifestInvalid;
using ragonite::ManifestMissing;

namespace {

corpus::EvidencePool mini(corpus::IndexingMode indexing, corpus::ContextConfig ctx = corpus::ContextConfig::all(),
                          corpus::LinearizerMode lin = corpus::LinearizerMode::VBL) {
    static fixtures::TempDir dir("mini");
    static const bool written = (fixtures::write_corpus(dir.path(), fixtures::mini_corpus()), true);
    (void)written;
    return corpus::build_evidence_pool(dir.path(), {ctx, indexing, lin});
}

std::map<std::string, corpus::ContextualizedEvidence> by_id(const corpus::EvidencePool& p) {
    std::map<std::string, corpus::ContextualizedEvidence> out;
    for (const auto& e : p.evidences) out.emplace(e.id(), e);
    return out;
}

}  // namespace

TEST(Pool, MiniCorpusKinds) {
    const auto pool = mini(corpus::IndexingMode::both);
    ASSERT_TRUE(pool.warnings.empty());
    ASSERT_EQ(pool.evidences.size(), 6u);
    std::multiset<corpus::EvidenceKind> kinds;
    for (const auto& e : pool.evidences) kinds.insert(e.evidence.kind);
    EXPECT_EQ(kinds.count(corpus::EvidenceKind::passage), 1u);
    EXPECT_EQ(kinds.count(corpus::EvidenceKind::list), 1u);
    EXPECT_EQ(kinds.count(corpus::EvidenceKind::table), 1u);
    EXPECT_EQ(kinds.count(corpus::EvidenceKind::table_row), 3u);
}

TEST(Pool, IndexingModesPartitionTableEvidence) {
    const auto both = by_id(mini(corpus::IndexingMode::both));
    const auto rows = by_id(mini(corpus::IndexingMode::row_only));
    const auto tables = by_id(mini(corpus::IndexingMode::table_only));
    EXPECT_EQ(rows.size(), 5u);
    EXPECT_EQ(tables.size(), 3u);
    // Same node, same id, whatever the mode.
    for (const auto* m : {&rows, &tables})
        for (const auto& [id, ev] : *m) {
            ASSERT_TRUE(both.contains(id)) << id;
            EXPECT_EQ(both.at(id).evidence.kind, ev.evidence.kind);
            EXPECT_EQ(both.at(id).evidence.raw_text, ev.evidence.raw_text);
        }
    for (const auto& [id, ev] : rows) EXPECT_NE(ev.evidence.kind, corpus::EvidenceKind::table);
    for (const auto& [id, ev] : tables) EXPECT_NE(ev.evidence.kind, corpus::EvidenceKind::table_row);
}

TEST(Pool, RowsPointAtTheirTable) {
    const auto pool = mini(corpus::IndexingMode::both);
    std::string table_id;
    for (const auto& e : pool.evidences)
        if (e.evidence.kind == corpus::EvidenceKind::table) table_id = e.id();
    ASSERT_FALSE(table_id.empty());
    int rows = 0;
    for (const auto& e : pool.evidences) {
        if (e.evidence.kind != corpus::EvidenceKind::table_row) continue;
        ++rows;
        EXPECT_EQ(e.evidence.parent_table_id, table_id);
        ASSERT_TRUE(e.evidence.row_index.has_value());
    }
    EXPECT_EQ(rows, 3);
}

TEST(Pool, IdsAreUrlAnchored) {
    for (const auto& e : mini(corpus::IndexingMode::both).evidences)
        EXPECT_TRUE(e.id().rfind(e.evidence.doc_url + "#", 0) == 0) << e.id();
}

TEST(Pool, DeterministicAcrossBuilds) {
    EXPECT_EQ(mini(corpus::IndexingMode::both).evidences, mini(corpus::IndexingMode::both).evidences);
}

TEST(Pool, ContextFlagsControlComposedText) {
    const auto none = by_id(mini(corpus::IndexingMode::both, corpus::ContextConfig::none()));
    const auto all = by_id(mini(corpus::IndexingMode::both));
    const auto title = by_id(mini(corpus::IndexingMode::both, corpus::parse_context_config("TTL")));
    for (const auto& [id, ev] : none) {
        EXPECT_EQ(ev.composed_text.find(ev.page_title), std::string::npos) << id;
        EXPECT_NE(title.at(id).composed_text.find(ev.page_title), std::string::npos) << id;
        EXPECT_NE(all.at(id).composed_text.find(ev.evidence.raw_text), std::string::npos) << id;
        EXPECT_GE(all.at(id).composed_text.size(), title.at(id).composed_text.size());
    }
}

TEST(Pool, HeadingAndNeighbours) {
    const auto all = mini(corpus::IndexingMode::both);
    for (const auto& e : all.evidences) {
        if (e.evidence.kind == corpus::EvidenceKind::passage) {
            EXPECT_EQ(e.prev_heading, "Intro");
            EXPECT_FALSE(e.before_text.has_value());
            ASSERT_TRUE(e.after_text.has_value());
            EXPECT_NE(e.after_text->find("first"), std::string::npos);
        }
        if (e.evidence.kind == corpus::EvidenceKind::table) EXPECT_EQ(e.prev_heading, "Data");
    }
}

TEST(Pool, JsonlRoundTrip) {
    const auto pool = mini(corpus::IndexingMode::both);
    std::stringstream buf;
    corpus::write_pool_jsonl(buf, pool.evidences);
    EXPECT_EQ(corpus::read_pool_jsonl(buf), pool.evidences);
}

TEST(Manifest, MissingFile) {
    fixtures::TempDir dir("nomanifest");
    EXPECT_THROW(corpus::build_evidence_pool(dir.path()), ManifestMissing);
}

TEST(Manifest, InvalidJsonAndShape) {
    fixtures::TempDir dir("badmanifest");
    fixtures::write_file(dir / "manifest.json", "{not json");
    EXPECT_THROW(corpus::read_manifest(dir.path()), ManifestInvalid);
    fixtures::write_file(dir / "manifest.json", "[]");
    EXPECT_THROW(corpus::read_manifest(dir.path()), ManifestInvalid);
    fixtures::write_file(dir / "manifest.json", R"({"a.html": {"title": "no url"}})");
    EXPECT_THROW(corpus::read_manifest(dir.path()), ManifestInvalid);
    fixtures::write_file(dir / "manifest.json",
                         R"({"a.html": {"url": "https://x/1"}, "b.html": {"url": "https://x/1"}})");
    EXPECT_THROW(corpus::read_manifest(dir.path()), ManifestInvalid);
}

TEST(Pool, UnreadableDocumentsBecomeWarnings) {
    fixtures::TempDir dir("unreadable");
    auto pages = fixtures::mini_corpus();
    pages.push_back({"empty.html", "https://wiki.test/E", "Empty", ""});
    pages.push_back({"bad.html", "https://wiki.test/U", "Bad", "<p>\xff\xfe</p>"});
    pages.push_back({"markup.html", "https://wiki.test/M", "Markup only", "<div><br/></div>"});
    fixtures::write_corpus(dir.path(), pages);
    nlohmann::json m = nlohmann::json::parse(fixtures::read_file(dir / "manifest.json"));
    m["gone.html"] = {{"url", "https://wiki.test/G"}};
    fixtures::write_file(dir / "manifest.json", m.dump());

    const auto pool = corpus::build_evidence_pool(dir.path());
    EXPECT_EQ(pool.evidences.size(), 6u);
    ASSERT_EQ(pool.warnings.size(), 4u);
    for (const auto& w : pool.warnings) EXPECT_EQ(w.rfind("DocumentUnreadable(", 0), 0u) << w;
}

TEST(Linearize, RowWiderThanHeader) {
    corpus::Table t;
    t.headers = {"K"};
    t.rows = {{"a", "b"}};
    EXPECT_THROW(corpus::detail::verbalize_row(t, 1, 0), HeaderArityMismatch);
}

TEST(Linearize, ShortRowsArePadded) {
    corpus::Table t;
    t.headers = {"K", "V"};
    t.rows = {{"a"}};
    EXPECT_EQ(corpus::detail::verbalize_row(t, 2, 0), "Row 1 in Table 2: K is a, and V is ");
}

TEST(Linearize, SpannedCellsAreRepeated) {
    corpus::RawDocument doc{"https://wiki.test/S", "Spans", "TEST",
                            "<table><tr><th>A</th><th>B</th></tr><tr><td colspan=\"2\">wide</td></tr></table>", ""};
    const auto tree = corpus::parse_document(doc);
    ASSERT_EQ(tree.nodes.size(), 1u);
    const auto& table = std::get<corpus::Table>(tree.nodes[0]);
    ASSERT_EQ(table.rows.size(), 1u);
    EXPECT_EQ(table.rows[0], (std::vector<std::string>{"wide", "wide"}));
}

TEST(ContextConfig, ParseAndPrint) {
    EXPECT_EQ(corpus::parse_context_config("ALL"), corpus::ContextConfig::all());
    EXPECT_EQ(corpus::parse_context_config("NONE"), corpus::ContextConfig::none());
    const auto c = corpus::parse_context_config("TTL+AFT");
    EXPECT_TRUE(c.title && c.after && !c.heading && !c.before);
    EXPECT_EQ(corpus::to_string(c), "TTL+AFT");
    EXPECT_EQ(corpus::parse_context_config(corpus::to_string(c)), c);
    EXPECT_THROW(corpus::parse_context_config("TTL,XYZ"), InvalidConfig);
}

TEST(Enums, RoundTrip) {
    for (auto m : {corpus::LinearizerMode::VBL, corpus::LinearizerMode::PIPE, corpus::LinearizerMode::MD,
                   corpus::LinearizerMode::HTML, corpus::LinearizerMode::TXT})
        EXPECT_EQ(corpus::linearizer_from(corpus::to_string(m)), m);
    for (auto m : {corpus::IndexingMode::row_only, corpus::IndexingMode::table_only, corpus::IndexingMode::both})
        EXPECT_EQ(corpus::indexing_from(corpus::to_string(m)), m);
}
