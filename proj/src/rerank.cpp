#include "chorus/rerank.hpp"

#include <algorithm>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "chorus/error.hpp"
#include "chorus/providers.hpp"

namespace chorus {

std::string rerank_query(const std::string& problem, const KeywordSet& keys)
{
    std::string q = problem + "\n";
    for (std::size_t i = 0; i < keys.keywords.size(); ++i) {
        if (i) q += ", ";
        q += keys.keywords[i];
    }
    return q;
}

std::string rerank_text(const RetrievalCandidate& candidate)
{
    if (candidate.kind == ChunkKind::code_example && candidate.example) {
        return candidate.chunk.text + "\n\n" + metadata_document(*candidate.example);
    }
    return candidate.chunk.text;
}

namespace {

void sort_ranked(std::vector<RankedCandidate>& ranked)
{
    std::stable_sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        return a.score != b.score ? a.score > b.score : a.candidate.chunk.id < b.candidate.chunk.id;
    });
}

} // namespace

std::vector<RankedCandidate> rerank_candidates(const std::string& problem, const KeywordSet& keys,
                                               const std::vector<RetrievalCandidate>& candidates,
                                               const RerankProvider& provider, bool fallback_to_retrieval_scores)
{
    if (candidates.empty()) throw ArgumentError("rerank_candidates: no candidates");

    std::vector<RankedCandidate> ranked;
    ranked.reserve(candidates.size());
    try {
        std::vector<RerankCandidate> request;
        request.reserve(candidates.size());
        for (const auto& c : candidates) request.push_back({c.chunk.id, rerank_text(c)});
        const auto scores = provider.rerank(rerank_query(problem, keys), request);

        std::unordered_map<std::string, double> by_id;
        for (const auto& s : scores) by_id[s.candidate_id] = s.score;
        if (scores.size() != candidates.size() || by_id.size() != candidates.size()) {
            throw ProviderError("reranker returned " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(candidates.size()) + " candidates");
        }
        for (const auto& c : candidates) {
            auto it = by_id.find(c.chunk.id);
            if (it == by_id.end()) throw ProviderError("reranker omitted candidate '" + c.chunk.id + "'");
            ranked.push_back({c, it->second});
        }
    } catch (const ProviderError& e) {
        if (!fallback_to_retrieval_scores) throw RerankError(std::string("reranking failed: ") + e.what());
        spdlog::warn("reranker unavailable, using retrieval scores: {}", e.what());
        ranked.clear();
        for (const auto& c : candidates) ranked.push_back({c, c.score});
    }
    sort_ranked(ranked);
    return ranked;
}

ContextBundle select_context(const std::vector<RankedCandidate>& ranked_conceptual,
                             const std::vector<RankedCandidate>& ranked_examples, const RerankConfig& cfg)
{
    ContextBundle bundle;
    const auto nc = std::min(cfg.keep_conceptual, ranked_conceptual.size());
    for (std::size_t i = 0; i < nc; ++i) {
        const auto& r = ranked_conceptual[i];
        bundle.conceptual.push_back(r.candidate.chunk);
        bundle.scores[r.candidate.chunk.id] = r.score;
    }
    const auto ne = std::min(cfg.keep_examples, ranked_examples.size());
    for (std::size_t i = 0; i < ne; ++i) {
        const auto& r = ranked_examples[i];
        if (r.candidate.example) {
            bundle.examples.push_back(*r.candidate.example);
        } else {
            CodeExample ex;
            ex.id = r.candidate.chunk.id;
            ex.code_text = r.candidate.chunk.text;
            ex.token_count = r.candidate.chunk.token_count;
            bundle.examples.push_back(std::move(ex));
        }
        bundle.scores[r.candidate.chunk.id] = r.score;
    }
    if (bundle.empty()) spdlog::info("empty context bundle; generation proceeds without retrieved context");
    return bundle;
}

} // namespace chorus
