#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chorus/corpus.hpp"
#include "chorus/metadata.hpp"
#include "chorus/providers.hpp"

namespace chorus {

class VectorIndex;

struct KeywordSet {
    std::vector<std::string> keywords;
    std::string source_problem_digest;
};

struct RetrievalCandidate {
    Chunk chunk;
    double score = 0.0;
    std::string matched_keyword;
    ChunkKind kind = ChunkKind::conceptual;
    /// Set for code-example candidates.
    std::optional<CodeExample> example;
};

struct RetrievalConfig {
    std::size_t k_per_keyword = 3;
    std::size_t m_examples = 10;
    std::size_t max_chunk_tokens = 400;
};

inline constexpr std::size_t kMaxKeywords = 10;

/// Splits a model reply into keywords: a JSON {"keywords": [...]} object or
/// array when present, otherwise items separated by ';', ',' or newlines with
/// list bullets and quotes stripped. Lower-cased, case-fold deduplicated,
/// order preserved, capped at kMaxKeywords.
std::vector<std::string> parse_keyword_list(const std::string& raw);

/// Asks for LP-focused keywords; one retry when nothing parseable comes back.
/// `prompt_template` takes {{problem}}.
KeywordSet extract_keywords(const std::string& problem, const ChatProvider& chat,
                            const std::string& prompt_template);

/// Parent intro, then the node's text, then later siblings (order_index
/// order) that fit whole within max_chunk_tokens. When intro plus node text
/// already exceeds the budget the chunk is that text alone with oversize set.
Chunk build_adaptive_chunk(const std::string& node_id, const DocTree& tree, const RetrievalConfig& cfg);

/// Per keyword: embed, take the top k_per_keyword nodes; union by node keeping
/// the maximum score; each hit expanded with build_adaptive_chunk. Ordered by
/// (score desc, id asc).
std::vector<RetrievalCandidate> retrieve_conceptual(const KeywordSet& keys, const DocTree& tree,
                                                    const VectorIndex& index, const RetrievalConfig& cfg,
                                                    const EmbeddingProvider& embed);

/// Keywords joined into one query, matched against metadata embeddings only.
std::vector<RetrievalCandidate> retrieve_examples(const KeywordSet& keys, const VectorIndex& index,
                                                  const std::map<std::string, CodeExample>& examples,
                                                  const RetrievalConfig& cfg, const EmbeddingProvider& embed);

/// Fixed-length baseline: embeds the problem text itself and returns the top
/// `top_n` fixed chunks.
std::vector<RetrievalCandidate> retrieve_fixed(const std::string& problem, const VectorIndex& index,
                                               const std::map<std::string, Chunk>& chunks, std::size_t top_n,
                                               const EmbeddingProvider& embed);

} // namespace chorus
