#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace chorus {

struct ExecutionResult;
class SyntaxChecker;
class EmbeddingProvider;

struct Tolerance {
    double rel = 1e-6;
    double abs = 1e-4;
};

/// 1 iff both executions are optimal and |f_gen - f_ref| <= max(rel*|f_ref|, abs).
int metric_accuracy(const ExecutionResult& gen, const ExecutionResult& ref, const Tolerance& tol = {});

/// 1 iff the checker's compile-only pass accepts the code. Checker transport
/// failures propagate as HarnessError.
int metric_syntactic_validity(const std::string& code, const SyntaxChecker& checker);

/// Cosine between the two embeddings.
double metric_semantic_similarity(const std::string& gen, const std::string& ref, const EmbeddingProvider& embed);

struct GestaltOptions {
    /// Python difflib's popular-element heuristic for sequences of 200+ items.
    bool autojunk = false;
};

/// Ratcliff/Obershelp ratio 2M/T: M counts characters in the recursively found
/// longest matching blocks (leftmost in `a`, then leftmost in `b` on ties),
/// T = |a| + |b|. Two empty strings give 1.
double gestalt_ratio(std::string_view a, std::string_view b, const GestaltOptions& opts = {});

/// Indel-normalized Levenshtein similarity, 1 - indel(a, b) / (|a| + |b|).
double levenshtein_ratio(std::string_view a, std::string_view b);

enum class EditMetric { gestalt, levenshtein };

double metric_edit_distance(std::string_view gen, std::string_view ref, EditMetric metric = EditMetric::gestalt);

using TextPair = std::pair<std::string, std::string>;

/// Ratios for many pairs, evaluated in parallel.
std::vector<double> gestalt_ratio_batch(std::span<const TextPair> pairs, const GestaltOptions& opts = {});
/// Same results, one thread.
std::vector<double> gestalt_ratio_batch_reference(std::span<const TextPair> pairs, const GestaltOptions& opts = {});

} // namespace chorus
