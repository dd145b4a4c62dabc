#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "chorus/metrics.hpp"
#include "chorus/vector_index.hpp"

namespace {

chorus::VectorIndex make_index(std::size_t n, std::size_t dim)
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss;
    std::vector<chorus::IndexEntry> entries(n);
    for (std::size_t i = 0; i < n; ++i) {
        entries[i].id = "e" + std::to_string(i);
        entries[i].payload_id = entries[i].id;
        entries[i].vector.resize(dim);
        for (auto& x : entries[i].vector) x = gauss(rng);
    }
    chorus::VectorIndex index;
    index.add_entries(entries);
    return index;
}

chorus::EmbeddingVector make_query(std::size_t dim)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    chorus::EmbeddingVector q(dim);
    for (auto& x : q) x = gauss(rng);
    return q;
}

std::vector<chorus::TextPair> make_pairs(std::size_t n, std::size_t len)
{
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> ch('a', 'h');
    std::vector<chorus::TextPair> pairs(n);
    for (auto& [a, b] : pairs) {
        a.resize(len);
        b.resize(len);
        for (auto& c : a) c = static_cast<char>(ch(rng));
        for (auto& c : b) c = static_cast<char>(ch(rng));
    }
    return pairs;
}

void BM_search(benchmark::State& state)
{
    const auto index = make_index(static_cast<std::size_t>(state.range(0)), 64);
    const auto q = make_query(64);
    for (auto _ : state) benchmark::DoNotOptimize(index.search(q, 10));
}

void BM_search_reference(benchmark::State& state)
{
    const auto index = make_index(static_cast<std::size_t>(state.range(0)), 64);
    const auto q = make_query(64);
    for (auto _ : state) benchmark::DoNotOptimize(index.search_reference(q, 10));
}

void BM_gestalt_batch(benchmark::State& state)
{
    const auto pairs = make_pairs(static_cast<std::size_t>(state.range(0)), 400);
    for (auto _ : state) benchmark::DoNotOptimize(chorus::gestalt_ratio_batch(pairs));
}

void BM_gestalt_batch_reference(benchmark::State& state)
{
    const auto pairs = make_pairs(static_cast<std::size_t>(state.range(0)), 400);
    for (auto _ : state) benchmark::DoNotOptimize(chorus::gestalt_ratio_batch_reference(pairs));
}

} // namespace

BENCHMARK(BM_search)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_search_reference)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gestalt_batch)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gestalt_batch_reference)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
