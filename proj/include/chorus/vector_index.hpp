#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chorus/providers.hpp"

namespace chorus {

enum class PayloadKind { conceptual, code_example };

std::string_view to_string(PayloadKind kind);
PayloadKind payload_kind_from_string(std::string_view name);

struct IndexEntry {
    std::string id;
    EmbeddingVector vector;
    PayloadKind payload_kind = PayloadKind::conceptual;
    std::string payload_id;
};

struct SearchHit {
    std::string id;
    double score = 0.0;
    PayloadKind payload_kind = PayloadKind::conceptual;
    std::string payload_id;
};

/// Exact cosine-similarity store. Entries live in one row-major matrix with
/// their norms cached at insertion; zero vectors are rejected.
///
/// Mutation is single-writer. After freeze() the index is read-only and
/// search() may be called concurrently.
class VectorIndex {
public:
    VectorIndex() = default;
    explicit VectorIndex(std::size_t dimension) : dimension_(dimension) {}

    /// Upsert by id; returns the entry count afterwards. An empty index
    /// without a fixed dimension takes it from the first entry.
    std::size_t add_entries(const std::vector<IndexEntry>& entries);

    /// Top-n by cosine, descending, ties by ascending id. Scores are computed
    /// in parallel over entries.
    std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t top_n) const;

    /// Single-threaded scan with the same scoring and ordering.
    std::vector<SearchHit> search_reference(const EmbeddingVector& query, std::size_t top_n) const;

    void freeze() noexcept { frozen_ = true; }
    bool frozen() const noexcept { return frozen_; }

    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    std::size_t dimension() const noexcept { return dimension_; }

    bool contains(const std::string& id) const { return slot_.count(id) != 0; }
    /// Throws IndexError for an unknown id.
    IndexEntry entry(const std::string& id) const;
    /// All entries, ascending id.
    std::vector<IndexEntry> entries() const;

private:
    void check_query(const EmbeddingVector& query, std::size_t top_n) const;
    std::vector<SearchHit> select_top(std::vector<double>& scores, std::size_t top_n) const;

    std::size_t dimension_ = 0;
    bool frozen_ = false;
    std::vector<std::string> ids_;
    std::vector<PayloadKind> kinds_;
    std::vector<std::string> payload_ids_;
    std::vector<double> data_;
    std::vector<double> norms_;
    std::unordered_map<std::string, std::size_t> slot_;
};

/// Cosine similarity, dot(a, b) / (|a| * |b|). Zero-norm inputs give 0.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// JSONL: header {dimension, count}, then {id, kind, payload_id, vector} per line.
std::size_t save_index(const VectorIndex& index, const std::string& path);
VectorIndex load_index(const std::string& path);

} // namespace chorus
