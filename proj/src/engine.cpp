#include "chorus/engine.hpp"

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>
#include <toml.hpp>

#include "chorus/digest.hpp"
#include "chorus/error.hpp"
#include "chorus/tokenizer.hpp"

#ifndef CHORUS_DEFAULT_TEMPLATE_DIR
#define CHORUS_DEFAULT_TEMPLATE_DIR "templates"
#endif

namespace chorus {

namespace fs = std::filesystem;

std::optional<std::string> process_env(const std::string& name)
{
    if (const char* v = std::getenv(name.c_str()); v && *v) return std::string(v);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

template <class T>
void read_value(const toml::table& tbl, std::string_view path, T& out)
{
    const auto node = tbl.at_path(path);
    if (!node) return;
    if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = node.value<std::string>()) {
            out = *v;
            return;
        }
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node.value<bool>()) {
            out = *v;
            return;
        }
    } else if constexpr (std::is_floating_point_v<T>) {
        if (auto v = node.value<double>()) {
            out = static_cast<T>(*v);
            return;
        }
    } else {
        if (auto v = node.value<std::int64_t>(); v && *v >= 0) {
            out = static_cast<T>(*v);
            return;
        }
    }
    throw ConfigError("config key '" + std::string(path) + "' has the wrong type");
}

void read_endpoint(const toml::table& tbl, const std::string& name, EndpointConfig& ep)
{
    read_value(tbl, "providers." + name + ".url", ep.url);
    read_value(tbl, "providers." + name + ".model", ep.model);
    read_value(tbl, "providers." + name + ".max_in_flight", ep.max_in_flight);
    read_value(tbl, "providers." + name + ".timeout_seconds", ep.timeout_seconds);
}

void apply_env(EngineConfig& cfg, const EnvLookup& env)
{
    auto set = [&](const char* name, std::string& field) {
        if (auto v = env(name)) field = *v;
    };
    set("CHORUS_CHAT_URL", cfg.chat.url);
    set("CHORUS_CHAT_MODEL", cfg.chat.model);
    set("CHORUS_EMBED_URL", cfg.embed.url);
    set("CHORUS_EMBED_MODEL", cfg.embed.model);
    set("CHORUS_RERANK_URL", cfg.rerank.url);
    set("CHORUS_RERANK_MODEL", cfg.rerank.model);
    set("CHORUS_SANDBOX_CMD", cfg.sandbox_cmd);
    if (auto key = env("CHORUS_API_KEY")) {
        cfg.chat.api_key = *key;
        cfg.embed.api_key = *key;
        cfg.rerank.api_key = *key;
    }
}

void validate(const EngineConfig& cfg)
{
    mode_from_name(cfg.mode);
    if (!fs::is_directory(cfg.template_dir)) throw ConfigError("template directory not found: " + cfg.template_dir);
    if (!cfg.index_dir.empty() && !fs::is_directory(cfg.index_dir)) {
        throw ConfigError("index directory not found: " + cfg.index_dir);
    }
    const auto& r = cfg.retrieval;
    if (r.k_per_keyword == 0 || r.m_examples == 0 || r.max_chunk_tokens == 0) {
        throw ConfigError("retrieval settings must be positive");
    }
    if (cfg.rerank_policy.keep_conceptual == 0 || cfg.rerank_policy.keep_examples == 0) {
        throw ConfigError("rerank caps must be positive");
    }
    if (cfg.metadata.keyword_min > cfg.metadata.keyword_max) throw ConfigError("keyword_min exceeds keyword_max");
    if (cfg.fixed_size_tokens <= cfg.fixed_overlap_tokens) throw ConfigError("fixed chunk size must exceed overlap");
    if (cfg.timeout_seconds <= 0) throw ConfigError("timeout must be positive");
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
    if (cfg.generation_retries < 0) throw ConfigError("generation retries must be >= 0");
}

EngineConfig from_table(const toml::table& tbl, const EnvLookup& env)
{
    EngineConfig cfg;
    cfg.template_dir = CHORUS_DEFAULT_TEMPLATE_DIR;

    read_endpoint(tbl, "chat", cfg.chat);
    read_endpoint(tbl, "embed", cfg.embed);
    read_endpoint(tbl, "rerank", cfg.rerank);
    read_value(tbl, "providers.embed.mock_dimension", cfg.mock_embedding_dimension);

    read_value(tbl, "retrieval.k_per_keyword", cfg.retrieval.k_per_keyword);
    read_value(tbl, "retrieval.m_examples", cfg.retrieval.m_examples);
    read_value(tbl, "retrieval.max_chunk_tokens", cfg.retrieval.max_chunk_tokens);
    read_value(tbl, "rerank.keep_conceptual", cfg.rerank_policy.keep_conceptual);
    read_value(tbl, "rerank.keep_examples", cfg.rerank_policy.keep_examples);
    read_value(tbl, "rerank.fallback_to_retrieval_scores", cfg.rerank_policy.fallback_to_retrieval_scores);
    read_value(tbl, "metadata.keyword_min", cfg.metadata.keyword_min);
    read_value(tbl, "metadata.keyword_max", cfg.metadata.keyword_max);
    read_value(tbl, "metadata.synopsis_max_lines", cfg.metadata.synopsis_max_lines);
    read_value(tbl, "traditional.size_tokens", cfg.fixed_size_tokens);
    read_value(tbl, "traditional.overlap_tokens", cfg.fixed_overlap_tokens);

    read_value(tbl, "pipeline.mode", cfg.mode);
    read_value(tbl, "pipeline.generation_retries", cfg.generation_retries);
    read_value(tbl, "pipeline.template_dir", cfg.template_dir);
    read_value(tbl, "pipeline.index_dir", cfg.index_dir);

    read_value(tbl, "eval.tol_rel", cfg.tolerance.rel);
    read_value(tbl, "eval.tol_abs", cfg.tolerance.abs);
    read_value(tbl, "eval.timeout_seconds", cfg.timeout_seconds);
    read_value(tbl, "eval.workers", cfg.workers);
    read_value(tbl, "eval.sandbox_cmd", cfg.sandbox_cmd);
    std::string edit = "gestalt";
    read_value(tbl, "eval.edit_metric", edit);
    if (edit == "gestalt") {
        cfg.edit_metric = EditMetric::gestalt;
    } else if (edit == "levenshtein") {
        cfg.edit_metric = EditMetric::levenshtein;
    } else {
        throw ConfigError("eval.edit_metric must be 'gestalt' or 'levenshtein'");
    }

    apply_env(cfg, env);
    return cfg;
}

EngineConfig parse_unchecked(const std::string& toml_text, const EnvLookup& env)
{
    try {
        return from_table(toml::parse(toml_text), env);
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + std::string(e.description()));
    }
}

} // namespace

EngineConfig parse_config(const std::string& toml_text, const EnvLookup& env)
{
    auto cfg = parse_unchecked(toml_text, env);
    validate(cfg);
    return cfg;
}

EngineConfig load_config(const std::optional<std::string>& toml_path, const EnvLookup& env)
{
    if (!toml_path) return parse_config("", env);
    std::ifstream in(*toml_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + *toml_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto cfg = parse_unchecked(ss.str(), env);
    // Relative paths in the file are relative to the file.
    const auto base = fs::path(*toml_path).parent_path();
    auto rebase = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative() && !base.empty()) p = (base / p).string();
    };
    if (ss.str().find("template_dir") != std::string::npos) rebase(cfg.template_dir);
    rebase(cfg.index_dir);
    validate(cfg);
    return cfg;
}

nlohmann::json config_json(const EngineConfig& cfg)
{
    auto ep = [](const EndpointConfig& e) {
        return nlohmann::json{{"url", e.url}, {"model", e.model}, {"max_in_flight", e.max_in_flight}};
    };
    return {{"providers", {{"chat", ep(cfg.chat)}, {"embed", ep(cfg.embed)}, {"rerank", ep(cfg.rerank)}}},
            {"retrieval",
             {{"k_per_keyword", cfg.retrieval.k_per_keyword},
              {"m_examples", cfg.retrieval.m_examples},
              {"max_chunk_tokens", cfg.retrieval.max_chunk_tokens}}},
            {"rerank",
             {{"keep_conceptual", cfg.rerank_policy.keep_conceptual},
              {"keep_examples", cfg.rerank_policy.keep_examples},
              {"fallback_to_retrieval_scores", cfg.rerank_policy.fallback_to_retrieval_scores}}},
            {"metadata",
             {{"keyword_min", cfg.metadata.keyword_min},
              {"keyword_max", cfg.metadata.keyword_max},
              {"synopsis_max_lines", cfg.metadata.synopsis_max_lines}}},
            {"traditional", {{"size_tokens", cfg.fixed_size_tokens}, {"overlap_tokens", cfg.fixed_overlap_tokens}}},
            {"pipeline", {{"mode", cfg.mode}, {"generation_retries", cfg.generation_retries}}},
            {"eval",
             {{"tol_rel", cfg.tolerance.rel},
              {"tol_abs", cfg.tolerance.abs},
              {"timeout_seconds", cfg.timeout_seconds},
              {"edit_metric", cfg.edit_metric == EditMetric::gestalt ? "gestalt" : "levenshtein"}}}};
}

std::string config_digest(const EngineConfig& cfg)
{
    return hex_digest(config_json(cfg).dump());
}

Providers make_providers(const EngineConfig& cfg)
{
    Providers p;
    if (cfg.chat.url.rfind("mock:", 0) == 0) {
        const auto fixtures = cfg.chat.url.substr(5);
        p.chat = fixtures.empty() ? std::make_shared<MockChatProvider>() : load_chat_fixtures(fixtures);
    } else if (!cfg.chat.url.empty()) {
        p.chat = make_http_chat(cfg.chat);
    }
    if (cfg.embed.url.rfind("mock:", 0) == 0) {
        p.embed = std::make_shared<HashEmbedder>(cfg.mock_embedding_dimension);
    } else if (!cfg.embed.url.empty()) {
        p.embed = make_http_embedder(cfg.embed);
    }
    if (cfg.rerank.url.rfind("mock:", 0) == 0) {
        p.rerank = std::make_shared<OverlapReranker>();
    } else if (!cfg.rerank.url.empty()) {
        p.rerank = make_http_reranker(cfg.rerank);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Knowledge base

namespace {

nlohmann::json read_json_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw PersistenceError("cannot open " + p.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw PersistenceError(p.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& p, const nlohmann::json& j)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot write " + p.string());
    out << j.dump(1) << '\n';
    if (!out) throw PersistenceError("write to " + p.string() + " failed");
}

nlohmann::json chunk_json(const Chunk& c)
{
    return {{"id", c.id},
            {"text", c.text},
            {"token_count", c.token_count},
            {"kind", to_string(c.kind)},
            {"source_node_ids", c.source_node_ids},
            {"oversize", c.oversize}};
}

Chunk chunk_from_json(const nlohmann::json& j)
{
    Chunk c;
    c.id = j.at("id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.token_count = count_tokens(c.text);
    c.kind = chunk_kind_from_string(j.at("kind").get<std::string>());
    c.source_node_ids = j.value("source_node_ids", std::vector<std::string>{});
    c.oversize = j.value("oversize", false);
    return c;
}

} // namespace

KnowledgeBase KnowledgeBase::load(const std::string& dir)
{
    const fs::path base(dir);
    if (!fs::is_directory(base)) throw ConfigError("index directory not found: " + dir);
    KnowledgeBase kb;
    if (fs::exists(base / files::manifest)) {
        kb.tree = build_tree(parse_manifest(read_json_file(base / files::manifest)));
        kb.conceptual_index = load_index((base / files::conceptual_index).string());
        if (fs::exists(base / files::fixed_chunks)) {
            for (const auto& j : read_json_file(base / files::fixed_chunks)) {
                auto c = chunk_from_json(j);
                kb.fixed_chunks.emplace(c.id, std::move(c));
            }
            kb.fixed_index = load_index((base / files::fixed_index).string());
        }
    }
    if (fs::exists(base / files::examples)) {
        for (const auto& j : read_json_file(base / files::examples)) {
            auto ex = code_example_from_json(j);
            kb.examples.emplace(ex.id, std::move(ex));
        }
        kb.example_index = load_index((base / files::example_index).string());
    }
    kb.freeze();
    return kb;
}

void KnowledgeBase::save_documentation(const std::string& dir) const
{
    if (!tree) throw ArgumentError("no documentation to save");
    const fs::path base(dir);
    fs::create_directories(base);
    write_json_file(base / files::manifest, manifest_to_json(tree_to_manifest(*tree)));
    save_index(conceptual_index, (base / files::conceptual_index).string());
    auto chunks = nlohmann::json::array();
    for (const auto& [id, c] : fixed_chunks) chunks.push_back(chunk_json(c));
    write_json_file(base / files::fixed_chunks, chunks);
    save_index(fixed_index, (base / files::fixed_index).string());
}

void KnowledgeBase::save_examples(const std::string& dir) const
{
    const fs::path base(dir);
    fs::create_directories(base);
    auto arr = nlohmann::json::array();
    for (const auto& [id, ex] : examples) arr.push_back(to_json(ex));
    write_json_file(base / files::examples, arr);
    save_index(example_index, (base / files::example_index).string());
}

void KnowledgeBase::freeze()
{
    conceptual_index.freeze();
    fixed_index.freeze();
    example_index.freeze();
}

std::vector<EmbeddingVector> embed_batched(const EmbeddingProvider& embed, const std::vector<std::string>& texts,
                                           std::size_t batch)
{
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch) {
        const auto end = std::min(texts.size(), start + batch);
        auto part = embed.embed(std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                                         texts.begin() + static_cast<std::ptrdiff_t>(end)));
        if (part.size() != end - start) throw ProviderError("embedding provider returned a short batch");
        for (auto& v : part) out.push_back(std::move(v));
    }
    return out;
}

void ingest_documentation(KnowledgeBase& kb, const CorpusManifest& manifest, const EmbeddingProvider& embed,
                          std::size_t fixed_size, std::size_t fixed_overlap)
{
    kb.tree = build_tree(manifest);
    const auto chunks = node_chunks(*kb.tree);

    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) texts.push_back(c.text);
    const auto vectors = embed_batched(embed, texts);
    std::vector<IndexEntry> entries;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        entries.push_back({chunks[i].id, vectors[i], PayloadKind::conceptual, chunks[i].id});
    }
    kb.conceptual_index = VectorIndex{};
    kb.conceptual_index.add_entries(entries);

    std::string corpus;
    for (const auto& c : chunks) {
        if (!corpus.empty()) corpus += "\n\n";
        corpus += c.text;
    }
    kb.fixed_chunks.clear();
    kb.fixed_index = VectorIndex{};
    const auto fixed = fixed_chunk(corpus, fixed_size, fixed_overlap);
    if (fixed.empty()) return;
    texts.clear();
    for (const auto& c : fixed) texts.push_back(c.text);
    const auto fixed_vectors = embed_batched(embed, texts);
    entries.clear();
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        entries.push_back({fixed[i].id, fixed_vectors[i], PayloadKind::conceptual, fixed[i].id});
        kb.fixed_chunks.emplace(fixed[i].id, fixed[i]);
    }
    kb.fixed_index.add_entries(entries);
}

void ingest_examples(KnowledgeBase& kb, std::vector<CodeExample> examples, const ChatProvider* chat,
                     const EmbeddingProvider& embed, const MetadataPromptConfig& cfg, int workers,
                     bool write_sidecars)
{
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!examples[i].has_metadata() && !(write_sidecars && read_sidecar(examples[i]))) pending.push_back(i);
    }
    if (!pending.empty() && !chat) throw ConfigError("chat provider required to generate example metadata");

    std::mutex err_mu;
    std::exception_ptr first_error;
    const auto n = static_cast<std::ptrdiff_t>(pending.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, workers))
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        auto& ex = examples[pending[static_cast<std::size_t>(p)]];
        try {
            auto meta = generate_metadata(ex.code_text, cfg, *chat);
            ex.keywords = std::move(meta.keywords);
            ex.synopsis = std::move(meta.synopsis);
            if (write_sidecars && !ex.source_path.empty()) write_sidecar(ex);
        } catch (const MetadataError& e) {
            std::lock_guard lock(err_mu);
            if (!first_error) {
                first_error = std::make_exception_ptr(
                    MetadataError("example '" + ex.id + "': " + e.what(), e.raw_response()));
            }
        } catch (...) {
            std::lock_guard lock(err_mu);
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    index_examples(examples, embed, kb.example_index);
    for (auto& ex : examples) kb.examples[ex.id] = std::move(ex);
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(EngineConfig cfg, Providers providers, PromptTemplates templates,
               std::shared_ptr<const KnowledgeBase> kb)
    : cfg_(std::move(cfg)), providers_(std::move(providers)), templates_(std::move(templates)), kb_(std::move(kb))
{
    if (!kb_) kb_ = std::make_shared<const KnowledgeBase>();
}

std::map<std::string, std::string> Engine::provenance(const PipelineMode& mode) const
{
    auto name = [](const auto& p) { return p ? p->model_name() : std::string("unset"); };
    return {{"mode", mode_name(mode)},
            {"chat_model", name(providers_.chat)},
            {"embed_model", name(providers_.embed)},
            {"rerank_model", name(providers_.rerank)},
            {"config_digest", config_digest(cfg_)}};
}

ContextBundle Engine::retrieve_traditional(const std::string& problem, PipelineTrace& trace) const
{
    if (kb_->fixed_index.empty()) spdlog::warn("traditional-rag: no fixed-chunk index loaded, prompt has no context");
    if (!providers_.embed) throw ConfigError("traditional-rag mode needs an embedding provider");
    const auto top_n = cfg_.rerank_policy.keep_conceptual + cfg_.rerank_policy.keep_examples;
    trace.conceptual_candidates = retrieve_fixed(problem, kb_->fixed_index, kb_->fixed_chunks, top_n, *providers_.embed);
    ContextBundle bundle;
    for (const auto& c : trace.conceptual_candidates) {
        bundle.conceptual.push_back(c.chunk);
        bundle.scores[c.chunk.id] = c.score;
    }
    return bundle;
}

ContextBundle Engine::retrieve_chorus(const std::string& problem, PipelineTrace& trace) const
{
    if (kb_->example_index.empty() && !kb_->has_documentation()) {
        spdlog::warn("chorus: no index loaded, prompt has no context");
    }
    if (!providers_.embed) throw ConfigError("chorus mode needs an embedding provider");
    if (!providers_.rerank) throw ConfigError("chorus mode needs a rerank provider");

    trace.keywords = extract_keywords(problem, *providers_.chat, templates_.keywords);
    const auto& keys = *trace.keywords;
    if (kb_->has_documentation()) {
        trace.conceptual_candidates =
            retrieve_conceptual(keys, *kb_->tree, kb_->conceptual_index, cfg_.retrieval, *providers_.embed);
    }
    trace.example_candidates = retrieve_examples(keys, kb_->example_index, kb_->examples, cfg_.retrieval,
                                                 *providers_.embed);

    const bool fallback = cfg_.rerank_policy.fallback_to_retrieval_scores;
    auto rank = [&](const std::vector<RetrievalCandidate>& cands) {
        if (cands.empty()) return std::vector<RankedCandidate>{};
        return rerank_candidates(problem, keys, cands, *providers_.rerank, fallback);
    };
    auto conceptual = std::async(std::launch::async, rank, std::cref(trace.conceptual_candidates));
    auto examples = rank(trace.example_candidates);
    return select_context(conceptual.get(), examples, cfg_.rerank_policy);
}

PipelineTrace Engine::run(const std::string& problem, const PipelineMode& mode) const
{
    if (!providers_.chat) throw ConfigError("no chat provider configured");
    PipelineTrace trace;
    switch (mode.retrieval) {
    case RetrievalMode::none: break;
    case RetrievalMode::traditional: trace.bundle = retrieve_traditional(problem, trace); break;
    case RetrievalMode::chorus: trace.bundle = retrieve_chorus(problem, trace); break;
    }
    trace.prompt = assemble_prompt(problem, trace.bundle, mode, templates_);
    trace.result = generate_solution(trace.prompt, mode, *providers_.chat, cfg_.generation_retries);
    return trace;
}

GenerationResult Engine::generate(const std::string& problem, const PipelineMode& mode) const
{
    return run(problem, mode).result;
}

} // namespace chorus
