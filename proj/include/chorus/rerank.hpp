#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "chorus/retrieval.hpp"

namespace chorus {

class RerankProvider;

struct RankedCandidate {
    RetrievalCandidate candidate;
    double score = 0.0;
};

struct RerankConfig {
    std::size_t keep_conceptual = 3;
    std::size_t keep_examples = 2;
    bool fallback_to_retrieval_scores = true;
};

struct ContextBundle {
    std::vector<Chunk> conceptual;
    std::vector<CodeExample> examples;
    std::map<std::string, double> scores;

    bool empty() const { return conceptual.empty() && examples.empty(); }
};

/// "<problem>\n<kw1>, <kw2>, ..."
std::string rerank_query(const std::string& problem, const KeywordSet& keys);

/// Chunk text; code examples also carry their metadata document.
std::string rerank_text(const RetrievalCandidate& candidate);

/// Scores every candidate against the query and sorts (score desc, id asc).
/// On provider failure falls back to retrieval scores when allowed, otherwise
/// throws RerankError.
std::vector<RankedCandidate> rerank_candidates(const std::string& problem, const KeywordSet& keys,
                                               const std::vector<RetrievalCandidate>& candidates,
                                               const RerankProvider& provider, bool fallback_to_retrieval_scores = true);

/// Keeps the first keep_conceptual / keep_examples of each ranked list.
ContextBundle select_context(const std::vector<RankedCandidate>& ranked_conceptual,
                             const std::vector<RankedCandidate>& ranked_examples, const RerankConfig& cfg);

} // namespace chorus
