#include "chorus/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>

#include "chorus/error.hpp"
#include "chorus/providers.hpp"
#include "chorus/sandbox.hpp"
#include "chorus/vector_index.hpp"

namespace chorus {

int metric_accuracy(const ExecutionResult& gen, const ExecutionResult& ref, const Tolerance& tol)
{
    if (gen.status != ExecStatus::optimal || ref.status != ExecStatus::optimal) return 0;
    if (!gen.objective || !ref.objective) return 0;
    const double fg = *gen.objective;
    const double fr = *ref.objective;
    if (!std::isfinite(fg) || !std::isfinite(fr)) return 0;
    return std::abs(fg - fr) <= std::max(tol.rel * std::abs(fr), tol.abs) ? 1 : 0;
}

int metric_syntactic_validity(const std::string& code, const SyntaxChecker& checker)
{
    return checker.check(code) ? 1 : 0;
}

double metric_semantic_similarity(const std::string& gen, const std::string& ref, const EmbeddingProvider& embed)
{
    if (gen.empty() || ref.empty()) throw ArgumentError("semantic similarity needs non-empty texts");
    std::vector<EmbeddingVector> v;
    try {
        v = embed.embed({gen, ref});
    } catch (const ProviderError& e) {
        throw HarnessError(std::string("embedding failed: ") + e.what());
    }
    return cosine(v.at(0), v.at(1));
}

// ---------------------------------------------------------------------------
// Gestalt pattern matching, following the block search of difflib.SequenceMatcher.

namespace {

class GestaltMatcher {
public:
    GestaltMatcher(std::string_view a, std::string_view b, bool autojunk)
        : a_(a), b_(b), j2len_(b.size() + 1, 0), newj2len_(b.size() + 1, 0)
    {
        for (std::size_t j = 0; j < b.size(); ++j) b2j_[static_cast<unsigned char>(b[j])].push_back(j);
        const auto n = b.size();
        if (autojunk && n >= 200) {
            const std::size_t ntest = n / 100 + 1;
            for (auto& positions : b2j_) {
                if (positions.size() > ntest) positions.clear();
            }
        }
    }

    std::size_t matched_chars()
    {
        std::size_t total = 0;
        std::vector<std::array<std::size_t, 4>> queue{{0, a_.size(), 0, b_.size()}};
        while (!queue.empty()) {
            const auto [alo, ahi, blo, bhi] = queue.back();
            queue.pop_back();
            const auto [i, j, k] = longest_match(alo, ahi, blo, bhi);
            if (k == 0) continue;
            total += k;
            if (alo < i && blo < j) queue.push_back({alo, i, blo, j});
            if (i + k < ahi && j + k < bhi) queue.push_back({i + k, ahi, j + k, bhi});
        }
        return total;
    }

private:
    // j2len_[j + 1] holds the length of the match ending at (i - 1, j).
    std::tuple<std::size_t, std::size_t, std::size_t> longest_match(std::size_t alo, std::size_t ahi, std::size_t blo,
                                                                    std::size_t bhi)
    {
        std::size_t besti = alo, bestj = blo, bestsize = 0;
        touched_.clear();
        for (std::size_t i = alo; i < ahi; ++i) {
            newtouched_.clear();
            for (const auto j : b2j_[static_cast<unsigned char>(a_[i])]) {
                if (j < blo) continue;
                if (j >= bhi) break;
                const std::size_t k = j2len_[j] + 1;
                newj2len_[j + 1] = k;
                newtouched_.push_back(j + 1);
                if (k > bestsize) {
                    besti = i + 1 - k;
                    bestj = j + 1 - k;
                    bestsize = k;
                }
            }
            for (auto t : touched_) j2len_[t] = 0;
            for (auto t : newtouched_) j2len_[t] = newj2len_[t];
            for (auto t : newtouched_) newj2len_[t] = 0;
            std::swap(touched_, newtouched_);
        }
        for (auto t : touched_) j2len_[t] = 0;

        // Popular characters are absent from b2j_ but may still extend a match.
        while (besti > alo && bestj > blo && a_[besti - 1] == b_[bestj - 1]) {
            --besti;
            --bestj;
            ++bestsize;
        }
        while (besti + bestsize < ahi && bestj + bestsize < bhi && a_[besti + bestsize] == b_[bestj + bestsize]) {
            ++bestsize;
        }
        return {besti, bestj, bestsize};
    }

    std::string_view a_;
    std::string_view b_;
    std::array<std::vector<std::size_t>, 256> b2j_;
    std::vector<std::size_t> j2len_;
    std::vector<std::size_t> newj2len_;
    std::vector<std::size_t> touched_;
    std::vector<std::size_t> newtouched_;
};

} // namespace

double gestalt_ratio(std::string_view a, std::string_view b, const GestaltOptions& opts)
{
    const auto total = a.size() + b.size();
    if (total == 0) return 1.0;
    GestaltMatcher m(a, b, opts.autojunk);
    return 2.0 * static_cast<double>(m.matched_chars()) / static_cast<double>(total);
}

double levenshtein_ratio(std::string_view a, std::string_view b)
{
    const auto total = a.size() + b.size();
    if (total == 0) return 1.0;
    // indel distance = |a| + |b| - 2 * LCS
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const auto lcs = prev[b.size()];
    return 2.0 * static_cast<double>(lcs) / static_cast<double>(total);
}

double metric_edit_distance(std::string_view gen, std::string_view ref, EditMetric metric)
{
    return metric == EditMetric::levenshtein ? levenshtein_ratio(gen, ref) : gestalt_ratio(gen, ref);
}

std::vector<double> gestalt_ratio_batch(std::span<const TextPair> pairs, const GestaltOptions& opts)
{
    std::vector<double> out(pairs.size());
    const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& [a, b] = pairs[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = gestalt_ratio(a, b, opts);
    }
    return out;
}

std::vector<double> gestalt_ratio_batch_reference(std::span<const TextPair> pairs, const GestaltOptions& opts)
{
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) out.push_back(gestalt_ratio(a, b, opts));
    return out;
}

} // namespace chorus
