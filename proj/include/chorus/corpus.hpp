#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace chorus {

enum class Level { document = 0, chapter = 1, section = 2, subsection = 3 };

std::string_view to_string(Level level);
/// Throws ArgumentError on an unknown name.
Level level_from_string(std::string_view name);

struct DocNode {
    std::string id;
    Level level = Level::document;
    std::string title;
    std::string intro_text;
    std::string body_text;
    std::optional<std::string> parent_id;
    std::vector<std::string> child_ids;
    int order_index = 0;
};

struct DocTree {
    std::map<std::string, DocNode> nodes;
    std::string root_id;

    const DocNode& at(const std::string& id) const;
    bool contains(const std::string& id) const { return nodes.count(id) != 0; }
    /// Node ids in pre-order (document order).
    std::vector<std::string> preorder() const;
};

enum class ChunkKind { conceptual, code_example, fixed };

std::string_view to_string(ChunkKind kind);
ChunkKind chunk_kind_from_string(std::string_view name);

struct Chunk {
    std::string id;
    std::string text;
    std::size_t token_count = 0;
    ChunkKind kind = ChunkKind::conceptual;
    std::vector<std::string> source_node_ids;
    bool oversize = false;
};

struct ManifestEntry {
    Level level = Level::document;
    std::string title;
    std::string intro;
    std::string body;
};

using CorpusManifest = std::vector<ManifestEntry>;

/// JSON array of {level, title, intro, body}. Throws ManifestError.
CorpusManifest parse_manifest(const nlohmann::json& doc);
CorpusManifest load_manifest(const std::string& path);
nlohmann::json manifest_to_json(const CorpusManifest& manifest);

/// Node ids are "n" + zero-padded manifest position, so they sort in document order.
DocTree build_tree(const CorpusManifest& manifest);

/// Inverse of build_tree: pre-order entries.
CorpusManifest tree_to_manifest(const DocTree& tree);

/// title, intro and body joined by blank lines, empty parts skipped.
std::string node_text(const DocNode& node);

/// One conceptual chunk per node, keyed by node id, in document order.
std::vector<Chunk> node_chunks(const DocTree& tree);

/// Windows of size_tokens tokens, consecutive windows sharing overlap_tokens.
/// Window text is the token sequence joined by single spaces.
std::vector<Chunk> fixed_chunk(std::string_view text, std::size_t size_tokens, std::size_t overlap_tokens,
                               std::string_view id_prefix = "fixed");

struct CodeExample;

struct HistogramBin {
    std::size_t bin_start = 0;
    std::size_t count = 0;
};

struct TermCount {
    std::string term;
    std::size_t count = 0;
};

struct StatsReport {
    std::vector<HistogramBin> conceptual_hist;
    std::vector<HistogramBin> example_hist;
    std::vector<TermCount> raw_code_terms;
    std::vector<TermCount> metadata_terms;
};

struct StatsOptions {
    std::size_t bin_width = 50;
    std::size_t top_terms = 30;
};

/// Token-length histograms (only non-empty bins, ascending) and top-N word
/// frequencies ordered by (count desc, term asc).
StatsReport corpus_stats(const std::vector<Chunk>& chunks, const std::vector<CodeExample>& examples,
                         const StatsOptions& opts = {});

nlohmann::json to_json(const StatsReport& report);

} // namespace chorus
