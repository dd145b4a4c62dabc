#include "chorus/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "chorus/error.hpp"

namespace chorus {

std::string_view to_string(PayloadKind kind)
{
    return kind == PayloadKind::code_example ? "code_example" : "conceptual";
}

PayloadKind payload_kind_from_string(std::string_view name)
{
    if (name == "conceptual") return PayloadKind::conceptual;
    if (name == "code_example") return PayloadKind::code_example;
    throw ArgumentError("unknown payload kind '" + std::string(name) + "'");
}

namespace {

constexpr std::size_t kParallelThreshold = 2048;

double dot(const double* a, const double* b, std::size_t n) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double clamp_unit(double x) noexcept { return std::clamp(x, -1.0, 1.0); }

} // namespace

double cosine(const EmbeddingVector& a, const EmbeddingVector& b)
{
    if (a.size() != b.size()) throw ArgumentError("cosine: dimension mismatch");
    const double na = std::sqrt(dot(a.data(), a.data(), a.size()));
    const double nb = std::sqrt(dot(b.data(), b.data(), b.size()));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return clamp_unit(dot(a.data(), b.data(), a.size()) / (na * nb));
}

std::size_t VectorIndex::add_entries(const std::vector<IndexEntry>& entries)
{
    if (frozen_) throw IndexError("index is frozen");
    for (const auto& e : entries) {
        if (e.vector.empty()) throw IndexError("entry '" + e.id + "' has an empty vector");
        if (dimension_ == 0) dimension_ = e.vector.size();
        if (e.vector.size() != dimension_) {
            throw IndexError("entry '" + e.id + "' has dimension " + std::to_string(e.vector.size()) +
                             ", index dimension is " + std::to_string(dimension_));
        }
        double sq = 0.0;
        for (double x : e.vector) {
            if (!std::isfinite(x)) throw IndexError("entry '" + e.id + "' has a non-finite component");
            sq += x * x;
        }
        if (sq == 0.0) throw IndexError("entry '" + e.id + "' is a zero vector");
    }

    for (const auto& e : entries) {
        const double norm = std::sqrt(dot(e.vector.data(), e.vector.data(), dimension_));
        if (auto it = slot_.find(e.id); it != slot_.end()) {
            const auto s = it->second;
            kinds_[s] = e.payload_kind;
            payload_ids_[s] = e.payload_id;
            std::copy(e.vector.begin(), e.vector.end(), data_.begin() + static_cast<std::ptrdiff_t>(s * dimension_));
            norms_[s] = norm;
            continue;
        }
        slot_.emplace(e.id, ids_.size());
        ids_.push_back(e.id);
        kinds_.push_back(e.payload_kind);
        payload_ids_.push_back(e.payload_id);
        data_.insert(data_.end(), e.vector.begin(), e.vector.end());
        norms_.push_back(norm);
    }
    return ids_.size();
}

void VectorIndex::check_query(const EmbeddingVector& query, std::size_t top_n) const
{
    if (top_n == 0) throw ArgumentError("search: top_n must be >= 1");
    if (!empty() && query.size() != dimension_) {
        throw IndexError("query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                         std::to_string(dimension_));
    }
}

std::vector<SearchHit> VectorIndex::select_top(std::vector<double>& scores, std::size_t top_n) const
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto n = std::min(top_n, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return ids_[a] < ids_[b];
                      });
    std::vector<SearchHit> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = order[i];
        out.push_back({ids_[s], scores[s], kinds_[s], payload_ids_[s]});
    }
    return out;
}

std::vector<SearchHit> VectorIndex::search(const EmbeddingVector& query, std::size_t top_n) const
{
    check_query(query, top_n);
    if (empty()) return {};
    const double qn = std::sqrt(dot(query.data(), query.data(), dimension_));
    if (qn == 0.0) throw IndexError("search: zero query vector");

    const auto count = static_cast<std::ptrdiff_t>(ids_.size());
    const std::size_t dim = dimension_;
    const double* rows = data_.data();
    const double* q = query.data();
    std::vector<double> scores(ids_.size());
#pragma omp parallel for schedule(static) if (ids_.size() >= kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        scores[u] = clamp_unit(dot(rows + u * dim, q, dim) / (norms_[u] * qn));
    }
    return select_top(scores, top_n);
}

std::vector<SearchHit> VectorIndex::search_reference(const EmbeddingVector& query, std::size_t top_n) const
{
    check_query(query, top_n);
    if (empty()) return {};
    const double qn = std::sqrt(dot(query.data(), query.data(), dimension_));
    if (qn == 0.0) throw IndexError("search: zero query vector");
    std::vector<double> scores(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        scores[i] = clamp_unit(dot(data_.data() + i * dimension_, query.data(), dimension_) / (norms_[i] * qn));
    }
    return select_top(scores, top_n);
}

IndexEntry VectorIndex::entry(const std::string& id) const
{
    auto it = slot_.find(id);
    if (it == slot_.end()) throw IndexError("no index entry '" + id + "'");
    const auto s = it->second;
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>(s * dimension_);
    return {ids_[s], EmbeddingVector(first, first + static_cast<std::ptrdiff_t>(dimension_)), kinds_[s],
            payload_ids_[s]};
}

std::vector<IndexEntry> VectorIndex::entries() const
{
    std::vector<std::string> ids = ids_;
    std::sort(ids.begin(), ids.end());
    std::vector<IndexEntry> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(entry(id));
    return out;
}

// ---------------------------------------------------------------------------

std::size_t save_index(const VectorIndex& index, const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot open '" + path + "' for writing");
    std::size_t bytes = 0;
    auto write_line = [&](const nlohmann::json& j) {
        const auto line = j.dump() + "\n";
        out << line;
        bytes += line.size();
    };
    write_line({{"dimension", index.dimension()}, {"count", index.size()}});
    for (const auto& e : index.entries()) {
        write_line({{"id", e.id}, {"kind", to_string(e.payload_kind)}, {"payload_id", e.payload_id},
                    {"vector", e.vector}});
    }
    out.flush();
    if (!out) throw PersistenceError("write to '" + path + "' failed");
    return bytes;
}

VectorIndex load_index(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError("cannot open '" + path + "'");

    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw PersistenceError(path + ":" + std::to_string(line_no) + ": " + what);
    };

    if (!std::getline(in, line)) {
        line_no = 1;
        fail("missing header line");
    }
    ++line_no;
    std::size_t dimension = 0;
    std::size_t count = 0;
    try {
        const auto header = nlohmann::json::parse(line);
        dimension = header.at("dimension").get<std::size_t>();
        count = header.at("count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("malformed header: ") + e.what());
    }

    VectorIndex index(dimension);
    std::vector<IndexEntry> entries;
    entries.reserve(count);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            IndexEntry e;
            e.id = j.at("id").get<std::string>();
            e.payload_kind = payload_kind_from_string(j.at("kind").get<std::string>());
            e.payload_id = j.at("payload_id").get<std::string>();
            e.vector = j.at("vector").get<EmbeddingVector>();
            if (e.vector.size() != dimension) fail("vector dimension differs from header");
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            fail(std::string("malformed entry: ") + e.what());
        } catch (const ArgumentError& e) {
            fail(e.what());
        }
    }
    if (entries.size() != count) {
        throw PersistenceError(path + ": header count " + std::to_string(count) + " but body has " +
                               std::to_string(entries.size()) + " entries");
    }
    try {
        index.add_entries(entries);
    } catch (const IndexError& e) {
        throw PersistenceError(path + ": " + e.what());
    }
    return index;
}

} // namespace chorus
