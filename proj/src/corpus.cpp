#include "chorus/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "chorus/error.hpp"
#include "chorus/metadata.hpp"
#include "chorus/tokenizer.hpp"

namespace chorus {

std::string_view to_string(Level level)
{
    switch (level) {
    case Level::document: return "document";
    case Level::chapter: return "chapter";
    case Level::section: return "section";
    case Level::subsection: return "subsection";
    }
    return "document";
}

Level level_from_string(std::string_view name)
{
    if (name == "document") return Level::document;
    if (name == "chapter") return Level::chapter;
    if (name == "section") return Level::section;
    if (name == "subsection") return Level::subsection;
    throw ArgumentError("unknown level '" + std::string(name) + "'");
}

std::string_view to_string(ChunkKind kind)
{
    switch (kind) {
    case ChunkKind::conceptual: return "conceptual";
    case ChunkKind::code_example: return "code_example";
    case ChunkKind::fixed: return "fixed";
    }
    return "conceptual";
}

ChunkKind chunk_kind_from_string(std::string_view name)
{
    if (name == "conceptual") return ChunkKind::conceptual;
    if (name == "code_example") return ChunkKind::code_example;
    if (name == "fixed") return ChunkKind::fixed;
    throw ArgumentError("unknown chunk kind '" + std::string(name) + "'");
}

const DocNode& DocTree::at(const std::string& id) const
{
    auto it = nodes.find(id);
    if (it == nodes.end()) throw ArgumentError("unknown node id '" + id + "'");
    return it->second;
}

std::vector<std::string> DocTree::preorder() const
{
    std::vector<std::string> out;
    if (nodes.empty()) return out;
    out.reserve(nodes.size());
    std::vector<const std::string*> stack{&root_id};
    while (!stack.empty()) {
        const auto& id = *stack.back();
        stack.pop_back();
        out.push_back(id);
        const auto& children = at(id).child_ids;
        for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(&*it);
    }
    return out;
}

// ---------------------------------------------------------------------------

CorpusManifest parse_manifest(const nlohmann::json& doc)
{
    if (!doc.is_array()) throw ManifestError(0, "manifest must be a JSON array");
    CorpusManifest out;
    out.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& e = doc[i];
        if (!e.is_object()) throw ManifestError(i, "entry is not an object");
        try {
            ManifestEntry entry;
            entry.level = level_from_string(e.at("level").get<std::string>());
            entry.title = e.at("title").get<std::string>();
            entry.intro = e.value("intro", std::string{});
            entry.body = e.value("body", std::string{});
            out.push_back(std::move(entry));
        } catch (const nlohmann::json::exception& ex) {
            throw ManifestError(i, ex.what());
        } catch (const ArgumentError& ex) {
            throw ManifestError(i, ex.what());
        }
    }
    return out;
}

CorpusManifest load_manifest(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ManifestError(0, "cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& ex) {
        throw ManifestError(0, std::string("undecodable JSON: ") + ex.what());
    }
    return parse_manifest(doc);
}

nlohmann::json manifest_to_json(const CorpusManifest& manifest)
{
    auto out = nlohmann::json::array();
    for (const auto& e : manifest) {
        out.push_back({{"level", to_string(e.level)}, {"title", e.title}, {"intro", e.intro}, {"body", e.body}});
    }
    return out;
}

namespace {

std::string node_id_for(std::size_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "n%05zu", index);
    return buf;
}

} // namespace

DocTree build_tree(const CorpusManifest& manifest)
{
    if (manifest.empty()) throw ManifestError(0, "manifest is empty");
    if (manifest.front().level != Level::document) throw ManifestError(0, "first entry must be the document");

    DocTree tree;
    // open[level] is the most recent node at that depth on the current path.
    std::vector<std::string> open;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& e = manifest[i];
        const auto depth = static_cast<std::size_t>(e.level);
        if (i > 0 && e.level == Level::document) throw ManifestError(i, "second document entry");
        if (depth > open.size()) {
            throw ManifestError(i, "level '" + std::string(to_string(e.level)) + "' skips a heading level");
        }
        open.resize(depth);

        DocNode node;
        node.id = node_id_for(i);
        node.level = e.level;
        node.title = e.title;
        node.intro_text = e.intro;
        node.body_text = e.body;
        if (depth > 0) {
            auto& parent = tree.nodes.at(open.back());
            node.parent_id = parent.id;
            node.order_index = static_cast<int>(parent.child_ids.size());
            parent.child_ids.push_back(node.id);
        } else {
            tree.root_id = node.id;
        }
        open.push_back(node.id);
        tree.nodes.emplace(node.id, std::move(node));
    }
    return tree;
}

CorpusManifest tree_to_manifest(const DocTree& tree)
{
    CorpusManifest out;
    for (const auto& id : tree.preorder()) {
        const auto& n = tree.at(id);
        out.push_back({n.level, n.title, n.intro_text, n.body_text});
    }
    return out;
}

std::string node_text(const DocNode& node)
{
    std::string out = node.title;
    for (const auto* part : {&node.intro_text, &node.body_text}) {
        if (part->empty()) continue;
        if (!out.empty()) out += "\n\n";
        out += *part;
    }
    return out;
}

std::vector<Chunk> node_chunks(const DocTree& tree)
{
    std::vector<Chunk> out;
    out.reserve(tree.nodes.size());
    for (const auto& id : tree.preorder()) {
        Chunk c;
        c.id = id;
        c.text = node_text(tree.at(id));
        c.token_count = count_tokens(c.text);
        c.kind = ChunkKind::conceptual;
        c.source_node_ids = {id};
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Chunk> fixed_chunk(std::string_view text, std::size_t size_tokens, std::size_t overlap_tokens,
                               std::string_view id_prefix)
{
    if (size_tokens <= overlap_tokens) throw ArgumentError("fixed_chunk: size must exceed overlap");
    const auto tokens = tokenize(text);
    std::vector<Chunk> out;
    const std::size_t stride = size_tokens - overlap_tokens;
    for (std::size_t start = 0; start < tokens.size(); start += stride) {
        const std::size_t end = std::min(tokens.size(), start + size_tokens);
        Chunk c;
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "-%05zu", out.size());
        c.id = std::string(id_prefix) + suffix;
        for (std::size_t t = start; t < end; ++t) {
            if (t > start) c.text += ' ';
            c.text += tokens[t];
        }
        c.token_count = end - start;
        c.kind = ChunkKind::fixed;
        out.push_back(std::move(c));
        if (end == tokens.size()) break;
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<HistogramBin> histogram(const std::vector<std::size_t>& values, std::size_t width)
{
    std::map<std::size_t, std::size_t> bins;
    for (auto v : values) ++bins[(v / width) * width];
    std::vector<HistogramBin> out;
    for (const auto& [start, count] : bins) out.push_back({start, count});
    return out;
}

std::vector<TermCount> top_terms(const std::unordered_map<std::string, std::size_t>& counts, std::size_t n)
{
    std::vector<TermCount> all;
    all.reserve(counts.size());
    for (const auto& [term, count] : counts) all.push_back({term, count});
    std::sort(all.begin(), all.end(), [](const TermCount& a, const TermCount& b) {
        return a.count != b.count ? a.count > b.count : a.term < b.term;
    });
    if (all.size() > n) all.resize(n);
    return all;
}

} // namespace

StatsReport corpus_stats(const std::vector<Chunk>& chunks, const std::vector<CodeExample>& examples,
                         const StatsOptions& opts)
{
    if (opts.bin_width == 0) throw ArgumentError("corpus_stats: bin width must be positive");
    std::vector<std::size_t> chunk_lengths;
    for (const auto& c : chunks) chunk_lengths.push_back(c.token_count);

    std::vector<std::size_t> example_lengths;
    std::unordered_map<std::string, std::size_t> code_terms;
    std::unordered_map<std::string, std::size_t> meta_terms;
    for (const auto& ex : examples) {
        example_lengths.push_back(count_tokens(ex.code_text));
        for (auto& term : word_terms(ex.code_text)) ++code_terms[std::move(term)];
        for (const auto& kw : ex.keywords) {
            for (auto& term : word_terms(kw)) ++meta_terms[std::move(term)];
        }
        for (auto& term : word_terms(ex.synopsis)) ++meta_terms[std::move(term)];
    }

    StatsReport report;
    report.conceptual_hist = histogram(chunk_lengths, opts.bin_width);
    report.example_hist = histogram(example_lengths, opts.bin_width);
    report.raw_code_terms = top_terms(code_terms, opts.top_terms);
    report.metadata_terms = top_terms(meta_terms, opts.top_terms);
    return report;
}

nlohmann::json to_json(const StatsReport& report)
{
    auto hist = [](const std::vector<HistogramBin>& bins) {
        auto out = nlohmann::json::array();
        for (const auto& b : bins) out.push_back({b.bin_start, b.count});
        return out;
    };
    auto terms = [](const std::vector<TermCount>& ts) {
        auto out = nlohmann::json::array();
        for (const auto& t : ts) out.push_back({t.term, t.count});
        return out;
    };
    return {{"conceptual_hist", hist(report.conceptual_hist)},
            {"example_hist", hist(report.example_hist)},
            {"raw_code_terms", terms(report.raw_code_terms)},
            {"metadata_terms", terms(report.metadata_terms)}};
}

} // namespace chorus
