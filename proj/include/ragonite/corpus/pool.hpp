#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragonite/corpus/contextualize.hpp"
#include "ragonite/corpus/parse.hpp"
#include "ragonite/corpus/segment.hpp"
#include "ragonite/corpus/types.hpp"
#include "ragonite/error.hpp"
#include "ragonite/text.hpp"

namespace ragonite::corpus {

struct ManifestEntry {
    std::string file;
    std::string url;
    std::string title;
    std::string space;
    std::string fetched_at;
};

/// Reads `manifest.json`: an object mapping each HTML filename to {url, title, space}.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& corpus_dir) {
    const auto path = corpus_dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw ManifestMissing("no manifest.json in " + corpus_dir.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ManifestInvalid("manifest.json is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ManifestInvalid("manifest.json must be an object keyed by filename");

    std::vector<ManifestEntry> entries;
    std::set<std::string> urls;
    for (const auto& [file, meta] : j.items()) {
        if (!meta.is_object() || !meta.contains("url") || !meta.at("url").is_string())
            throw ManifestInvalid("manifest entry " + file + " lacks a url");
        ManifestEntry e{file, meta.at("url").get<std::string>(), meta.value("title", std::string{}),
                        meta.value("space", std::string{}), meta.value("fetched_at", std::string{})};
        if (e.url.empty()) throw ManifestInvalid("manifest entry " + file + " has an empty url");
        if (!urls.insert(e.url).second) throw ManifestInvalid("duplicate url in manifest: " + e.url);
        entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.url < b.url; });
    return entries;
}

struct PoolBuildOptions {
    ContextConfig context = ContextConfig::all();
    IndexingMode indexing = IndexingMode::both;
    LinearizerMode linearizer = LinearizerMode::VBL;
};

struct EvidencePool {
    std::vector<ContextualizedEvidence> evidences;
    std::vector<std::string> warnings;  // one per document that could not be used
};

/// Parses, segments and contextualizes one document.
inline std::vector<ContextualizedEvidence> contextualize_document(const RawDocument& doc,
                                                                  const PoolBuildOptions& opt) {
    const auto tree = parse_document(doc);
    std::vector<ContextualizedEvidence> out;
    for (const auto& ev : segment_document(tree, doc, opt.indexing, opt.linearizer))
        out.push_back(contextualize_evidence(ev, tree, doc, opt.context, opt.linearizer));
    return out;
}

inline EvidencePool build_evidence_pool(const std::filesystem::path& corpus_dir,
                                        const PoolBuildOptions& opt = {}) {
    const auto entries = read_manifest(corpus_dir);

    struct Result {
        std::vector<ContextualizedEvidence> evidences;
        std::string warning;
    };
    auto load = [&](const ManifestEntry& entry) -> Result {
        std::ifstream in(corpus_dir / entry.file, std::ios::binary);
        if (!in) return {{}, "DocumentUnreadable(" + entry.url + "): cannot open " + entry.file};
        std::stringstream buf;
        buf << in.rdbuf();
        RawDocument doc{entry.url, entry.title, entry.space, buf.str(), entry.fetched_at};
        if (doc.html.empty() || !text::valid_utf8(doc.html))
            return {{}, "DocumentUnreadable(" + entry.url + "): empty or not UTF-8"};
        try {
            return {contextualize_document(doc, opt), {}};
        } catch (const EmptyDocument&) {
            return {{}, "DocumentUnreadable(" + entry.url + "): no extractable text"};
        }
    };

    std::vector<std::future<Result>> jobs;
    jobs.reserve(entries.size());
    for (const auto& e : entries) jobs.push_back(std::async(std::launch::async, load, std::cref(e)));

    EvidencePool pool;
    for (auto& job : jobs) {
        auto r = job.get();
        if (!r.warning.empty()) pool.warnings.push_back(std::move(r.warning));
        for (auto& ev : r.evidences) pool.evidences.push_back(std::move(ev));
    }
    std::stable_sort(pool.evidences.begin(), pool.evidences.end(), [](const auto& a, const auto& b) {
        if (a.evidence.doc_url != b.evidence.doc_url) return a.evidence.doc_url < b.evidence.doc_url;
        return a.evidence.doc_order < b.evidence.doc_order;
    });
    return pool;
}

inline void write_pool_jsonl(std::ostream& out, const std::vector<ContextualizedEvidence>& pool) {
    for (const auto& ev : pool) out << nlohmann::json(ev).dump() << '\n';
}

inline std::vector<ContextualizedEvidence> read_pool_jsonl(std::istream& in) {
    std::vector<ContextualizedEvidence> pool;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        try {
            pool.push_back(nlohmann::json::parse(line).get<ContextualizedEvidence>());
        } catch (const nlohmann::json::exception& e) {
            throw Error("pool line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return pool;
}

}  // namespace ragonite::corpus
