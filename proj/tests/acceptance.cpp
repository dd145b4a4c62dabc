// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>

#include <spdlog/spdlog.h>

#include "chorus/engine.hpp"
#include "chorus/error.hpp"
#include "chorus/metrics.hpp"
#include "chorus/rerank.hpp"
#include "chorus/retrieval.hpp"
#include "chorus/tokenizer.hpp"
#include "chorus/vector_index.hpp"
#include "oracles/brute_search.hpp"
#include "oracles/matching_blocks.hpp"
#include "support.hpp"

using namespace chorus;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why)
    {
        if (ok) detail = why;
        ok = false;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len)
{
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<int> ch('a', 'f');
    std::string s(len(rng), 'a');
    for (auto& c : s) c = static_cast<char>(ch(rng));
    return s;
}

std::vector<IndexEntry> random_entries(std::mt19937_64& rng, std::size_t n, std::size_t dim)
{
    std::normal_distribution<double> g;
    std::vector<IndexEntry> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].id = "e" + std::to_string(i);
        out[i].payload_id = out[i].id;
        out[i].vector.resize(dim);
        for (auto& x : out[i].vector) x = g(rng);
    }
    return out;
}

EmbeddingVector random_vector(std::mt19937_64& rng, std::size_t dim)
{
    std::normal_distribution<double> g;
    EmbeddingVector v(dim);
    for (auto& x : v) x = g(rng);
    return v;
}

Outcome metric_oracle()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_text(rng, 40);
        const auto b = random_text(rng, 40);
        if (metric_edit_distance(a, b) != oracle::gestalt(a, b)) o.fail("mismatch on pair " + std::to_string(i));
    }
    const double t = seconds_since(t0);
    if (t >= 10.0) o.fail("took " + std::to_string(t) + " s");
    return o;
}

Outcome search_exactness()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2);
    const auto entries = random_entries(rng, 10000, 64);
    VectorIndex idx;
    idx.add_entries(entries);
    std::vector<oracle::Row> rows;
    for (const auto& e : entries) rows.push_back({e.id, e.vector});
    for (int q = 0; q < 100; ++q) {
        const auto query = random_vector(rng, 64);
        const auto hits = idx.search(query, 50);
        const auto want = oracle::top_n(rows, query, 50);
        if (hits.size() != want.size()) {
            o.fail("size mismatch");
            continue;
        }
        for (std::size_t i = 0; i < hits.size(); ++i) {
            if (hits[i].id != want[i].first) o.fail("order differs for query " + std::to_string(q));
        }
    }
    const double t = seconds_since(t0);
    if (t >= 30.0) o.fail("took " + std::to_string(t) + " s");
    return o;
}

Outcome chunking_invariants()
{
    Outcome o;
    const auto tree = build_tree(testsupport::synthetic_manifest(200, 3));
    const RetrievalConfig cfg;
    for (const auto& id : tree.preorder()) {
        const auto chunk = build_adaptive_chunk(id, tree, cfg);
        const auto& node = tree.at(id);
        if (chunk.token_count > cfg.max_chunk_tokens && !chunk.oversize) o.fail(id + " over budget");
        if (node.parent_id) {
            const auto& parent = tree.at(*node.parent_id);
            if (!parent.intro_text.empty() && chunk.text.rfind(parent.intro_text, 0) != 0) {
                o.fail(id + " does not start with the parent intro");
            }
            // siblings are whole or absent
            std::vector<std::string> segments;
            for (std::size_t pos = 0;;) {
                const auto next = chunk.text.find("\n\n", pos);
                segments.push_back(chunk.text.substr(pos, next == std::string::npos ? next : next - pos));
                if (next == std::string::npos) break;
                pos = next + 2;
            }
            for (const auto& sib_id : parent.child_ids) {
                if (sib_id == id) continue;
                const auto& sib = tree.at(sib_id);
                const bool listed =
                    std::count(chunk.source_node_ids.begin(), chunk.source_node_ids.end(), sib_id) > 0;
                if (listed && chunk.text.find(node_text(sib)) == std::string::npos) {
                    o.fail(id + " has a partial sibling " + sib_id);
                }
                if (!listed && std::count(segments.begin(), segments.end(), sib.title) > 0) {
                    o.fail(id + " contains a prefix of sibling " + sib_id);
                }
            }
        }
        // rebuild the chunk from its listed sources
        std::string expect;
        for (std::size_t i = 0; i < chunk.source_node_ids.size(); ++i) {
            const auto& src = tree.at(chunk.source_node_ids[i]);
            const bool is_parent_intro = node.parent_id && src.id == *node.parent_id;
            if (!expect.empty()) expect += "\n\n";
            expect += is_parent_intro ? src.intro_text : node_text(src);
        }
        if (expect != chunk.text) o.fail(id + " text is not the concatenation of its sources");
    }
    return o;
}

class ScriptedReranker final : public RerankProvider {
public:
    explicit ScriptedReranker(std::map<std::string, double> scores) : scores_(std::move(scores)) {}
    std::vector<RerankScore> rerank(const std::string&, const std::vector<RerankCandidate>& c) const override
    {
        std::vector<RerankScore> out;
        for (const auto& x : c) out.push_back({x.id, scores_.at(x.id)});
        return out;
    }
    std::string model_name() const override { return "scripted"; }

private:
    std::map<std::string, double> scores_;
};

Outcome rerank_truncation()
{
    Outcome o;
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> level(0, 4);
    const KeywordSet keys{{"k"}, ""};
    for (std::size_t nc = 0; nc <= 10; ++nc) {
        for (std::size_t ne = 0; ne <= 5; ++ne) {
            std::map<std::string, double> scores;
            std::vector<RetrievalCandidate> concepts, examples;
            for (std::size_t i = 0; i < nc + ne; ++i) {
                RetrievalCandidate c;
                c.chunk.id = (i < nc ? "c" : "x") + std::to_string(i);
                c.chunk.text = "t";
                if (i >= nc) {
                    c.kind = ChunkKind::code_example;
                    CodeExample ex;
                    ex.id = c.chunk.id;
                    ex.code_text = "t";
                    c.example = ex;
                }
                scores[c.chunk.id] = 0.25 * level(rng);
                (i < nc ? concepts : examples).push_back(c);
            }
            const ScriptedReranker rr(scores);
            auto rank = [&](const std::vector<RetrievalCandidate>& v) {
                return v.empty() ? std::vector<RankedCandidate>{} : rerank_candidates("p", keys, v, rr, false);
            };
            const auto bundle = select_context(rank(concepts), rank(examples), RerankConfig{});

            auto brute = [&](const std::vector<RetrievalCandidate>& v, std::size_t keep) {
                std::vector<std::pair<double, std::string>> all;
                for (const auto& c : v) all.emplace_back(-scores.at(c.chunk.id), c.chunk.id);
                std::sort(all.begin(), all.end());
                std::vector<std::string> ids;
                for (std::size_t i = 0; i < std::min(keep, all.size()); ++i) ids.push_back(all[i].second);
                return ids;
            };
            std::vector<std::string> got_c, got_e;
            for (const auto& c : bundle.conceptual) got_c.push_back(c.id);
            for (const auto& e : bundle.examples) got_e.push_back(e.id);
            const auto tag = "(" + std::to_string(nc) + "," + std::to_string(ne) + ")";
            if (got_c.size() != std::min<std::size_t>(3, nc) || got_e.size() != std::min<std::size_t>(2, ne)) {
                o.fail("wrong sizes at " + tag);
            }
            if (got_c != brute(concepts, 3) || got_e != brute(examples, 2)) o.fail("wrong prefix at " + tag);
        }
    }
    return o;
}

std::string base_toml()
{
    return "[providers.chat]\nurl = \"mock:\"\n[providers.embed]\nurl = \"mock:\"\n[providers.rerank]\nurl = \"mock:\"\n"
           "[pipeline]\ntemplate_dir = \"" +
           testsupport::kTemplateDir + "\"\n[eval]\nsandbox_cmd = \"" + testsupport::kMockSandbox +
           "\"\ntimeout_seconds = 5.0\n";
}

struct Fixture {
    EngineConfig cfg;
    Providers providers;
    std::shared_ptr<const KnowledgeBase> kb;
};

Fixture make_fixture()
{
    Fixture f;
    f.cfg = parse_config(base_toml(), [](const std::string&) { return std::nullopt; });
    f.providers = make_providers(f.cfg);
    f.providers.chat = testsupport::echo_chat(testsupport::toy_dataset());
    auto kb = std::make_shared<KnowledgeBase>();
    ingest_documentation(*kb, testsupport::synthetic_manifest(60, 5), *f.providers.embed, 60, 10);
    ingest_examples(*kb, testsupport::small_examples(), nullptr, *f.providers.embed, {}, 1, false);
    kb->freeze();
    f.kb = kb;
    return f;
}

Outcome ablation_modes(const Fixture& f)
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const Engine engine(f.cfg, f.providers, PromptTemplates::load(f.cfg.template_dir), f.kb);
    const auto problem = testsupport::toy_dataset()[0].problem_description;
    const std::string conceptual = "### " + std::string(kConceptualLabel);
    const std::string example = "### " + std::string(kExampleLabel);
    for (const auto& name : mode_names()) {
        const auto mode = mode_from_name(name);
        PipelineTrace t;
        try {
            t = engine.run(problem, mode);
        } catch (const std::exception& e) {
            o.fail(name + ": " + e.what());
            continue;
        }
        if (mode.retrieval == RetrievalMode::none &&
            (t.prompt.user_text.find(conceptual) != std::string::npos ||
             t.prompt.user_text.find(example) != std::string::npos || !t.bundle.empty())) {
            o.fail(name + ": context in a baseline prompt");
        }
        if (mode.retrieval == RetrievalMode::traditional) {
            if (t.bundle.conceptual.empty() || !t.bundle.examples.empty()) o.fail(name + ": unexpected bundle");
            for (const auto& c : t.bundle.conceptual) {
                if (c.kind != ChunkKind::fixed) o.fail(name + ": non-fixed chunk retrieved");
            }
        }
        if (mode.retrieval == RetrievalMode::chorus && t.bundle.empty()) o.fail(name + ": empty bundle");
        const bool has_field = t.prompt.schema["properties"].contains("reasoning_steps");
        if (has_field != mode.reasoning_field) o.fail(name + ": schema reasoning field mismatch");
        if (mode.reasoning_field && t.result.solution.reasoning_steps.empty()) o.fail(name + ": empty reasoning");
    }
    // chorus must reject a reply without reasoning_steps
    try {
        parse_structured(R"({"code":"x = 1"})", modes::chorus);
        o.fail("chorus accepted a reply without reasoning_steps");
    } catch (const ParseError&) {
    }
    const double t = seconds_since(t0);
    if (t >= 60.0) o.fail("took " + std::to_string(t) + " s");
    return o;
}

std::string eval_once(const Fixture& f)
{
    const Engine engine(f.cfg, f.providers, PromptTemplates::load(f.cfg.template_dir), f.kb);
    const CommandSandbox sandbox(f.cfg.sandbox_cmd);
    const EvalServices svc{&engine, &sandbox, &sandbox, f.providers.embed.get()};
    const EvalSettings settings{f.cfg.tolerance, f.cfg.timeout_seconds, 3, f.cfg.edit_metric};
    const auto recs = run_dataset(testsupport::toy_dataset(), modes::chorus, svc, settings);
    return report_json(aggregate(recs, modes::chorus, engine.provenance(modes::chorus)), recs).dump(2);
}

Outcome end_to_end(const Fixture& f)
{
    Outcome o;
    // the scripted objectives come from vertex enumeration
    const auto probs = testsupport::toy_problems();
    if (*oracle::solve(probs[0].lp) != 11.0) o.fail("oracle disagrees on the first instance");
    const auto first = eval_once(f);
    const auto second = eval_once(f);
    const auto j = nlohmann::json::parse(first);
    if (j["means"]["accuracy"] != 1.0) o.fail("accuracy " + j["means"]["accuracy"].dump());
    if (j["means"]["syntactic_validity"] != 1.0) o.fail("validity " + j["means"]["syntactic_validity"].dump());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (j["records"][i]["reference"]["objective"] != *oracle::solve(probs[i].lp)) {
            o.fail("reference objective differs for " + probs[i].id);
        }
    }
    if (first != second) o.fail("reports differ between runs");
    return o;
}

Outcome persistence()
{
    Outcome o;
    std::mt19937_64 rng(6);
    VectorIndex idx;
    idx.add_entries(random_entries(rng, 2000, 32));
    testsupport::TempDir dir;
    save_index(idx, dir.str("i.jsonl"));
    const auto back = load_index(dir.str("i.jsonl"));
    for (int q = 0; q < 50; ++q) {
        const auto query = random_vector(rng, 32);
        const auto a = idx.search(query, 5);
        const auto b = back.search(query, 5);
        if (a.size() != b.size()) {
            o.fail("size mismatch");
            continue;
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].id != b[i].id || a[i].score != b[i].score) o.fail("query " + std::to_string(q) + " differs");
        }
    }
    return o;
}

} // namespace

int main()
{
    spdlog::set_level(spdlog::level::err);
    int failures = 0;
    auto report = [&](const std::string& name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        std::cout << (o.ok ? "PASS " : "FAIL ") << name;
        if (!o.ok) std::cout << ": " << o.detail;
        std::cout << std::endl;
        if (!o.ok) ++failures;
    };

    report("metric oracle equivalence", metric_oracle);
    report("vector search exactness", search_exactness);
    report("chunking invariants", chunking_invariants);
    report("reranking truncation", rerank_truncation);
    std::optional<Fixture> fixture;
    try {
        fixture = make_fixture();
    } catch (const std::exception& e) {
        std::cerr << "fixture setup failed: " << e.what() << '\n';
    }
    report("ablation reachability", [&] {
        if (!fixture) throw std::runtime_error("no fixture");
        return ablation_modes(*fixture);
    });
    report("end-to-end self-consistency", [&] {
        if (!fixture) throw std::runtime_error("no fixture");
        return end_to_end(*fixture);
    });
    report("index persistence", persistence);
    return failures == 0 ? 0 : 1;
}
