#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chorus/corpus.hpp"
#include "chorus/generation.hpp"
#include "chorus/harness.hpp"
#include "chorus/metadata.hpp"
#include "chorus/providers.hpp"
#include "chorus/rerank.hpp"
#include "chorus/retrieval.hpp"
#include "chorus/vector_index.hpp"

namespace chorus {

struct EngineConfig {
    EndpointConfig chat;
    EndpointConfig embed;
    EndpointConfig rerank;
    std::size_t mock_embedding_dimension = 64;

    RetrievalConfig retrieval;
    RerankConfig rerank_policy;
    MetadataPromptConfig metadata;
    std::size_t fixed_size_tokens = 400;
    std::size_t fixed_overlap_tokens = 40;

    std::string mode = "chorus";
    int generation_retries = 2;
    std::string template_dir;

    Tolerance tolerance;
    double timeout_seconds = 30.0;
    int workers = 4;
    EditMetric edit_metric = EditMetric::gestalt;

    std::string index_dir;
    std::string sandbox_cmd;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Defaults, then the TOML file (if given), then CHORUS_* environment
/// variables, which win. Throws ConfigError on unknown modes, bad values or
/// missing referenced paths.
EngineConfig load_config(const std::optional<std::string>& toml_path, const EnvLookup& env = process_env);
EngineConfig parse_config(const std::string& toml_text, const EnvLookup& env = process_env);

/// Every setting except credentials.
nlohmann::json config_json(const EngineConfig& cfg);
std::string config_digest(const EngineConfig& cfg);

struct Providers {
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<EmbeddingProvider> embed;
    std::shared_ptr<RerankProvider> rerank;
};

/// "mock:" selects the offline providers ("mock:<fixtures.json>" for chat);
/// anything else is an HTTP endpoint. Unset endpoints stay null.
Providers make_providers(const EngineConfig& cfg);

/// Everything retrieval reads, as persisted by `ingest` and `index-examples`.
struct KnowledgeBase {
    std::optional<DocTree> tree;
    VectorIndex conceptual_index;
    std::map<std::string, Chunk> fixed_chunks;
    VectorIndex fixed_index;
    std::map<std::string, CodeExample> examples;
    VectorIndex example_index;

    bool has_documentation() const { return tree.has_value(); }

    /// Loads whichever parts exist under `dir`.
    static KnowledgeBase load(const std::string& dir);
    void save_documentation(const std::string& dir) const;
    void save_examples(const std::string& dir) const;
    void freeze();
};

namespace files {
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* conceptual_index = "conceptual.index.jsonl";
inline constexpr const char* fixed_chunks = "fixed_chunks.json";
inline constexpr const char* fixed_index = "fixed.index.jsonl";
inline constexpr const char* examples = "examples.json";
inline constexpr const char* example_index = "examples.index.jsonl";
} // namespace files

/// Embeds in batches of `batch` texts.
std::vector<EmbeddingVector> embed_batched(const EmbeddingProvider& embed, const std::vector<std::string>& texts,
                                           std::size_t batch = 64);

/// Tree, node-chunk index and the fixed-length baseline index.
void ingest_documentation(KnowledgeBase& kb, const CorpusManifest& manifest, const EmbeddingProvider& embed,
                          std::size_t fixed_size, std::size_t fixed_overlap);

/// Fills missing metadata (sidecar first, then the chat provider, concurrently
/// up to `workers`), writes sidecars for new metadata, and indexes every example.
void ingest_examples(KnowledgeBase& kb, std::vector<CodeExample> examples, const ChatProvider* chat,
                     const EmbeddingProvider& embed, const MetadataPromptConfig& cfg, int workers,
                     bool write_sidecars = true);

/// Intermediate products of one pipeline run.
struct PipelineTrace {
    std::optional<KeywordSet> keywords;
    std::vector<RetrievalCandidate> conceptual_candidates;
    std::vector<RetrievalCandidate> example_candidates;
    ContextBundle bundle;
    PromptBundle prompt;
    GenerationResult result;
};

/// End-to-end orchestration: retrieve (per mode), rerank, assemble, generate.
class Engine final : public SolutionGenerator {
public:
    Engine(EngineConfig cfg, Providers providers, PromptTemplates templates,
           std::shared_ptr<const KnowledgeBase> kb = nullptr);

    PipelineTrace run(const std::string& problem, const PipelineMode& mode) const;
    GenerationResult generate(const std::string& problem, const PipelineMode& mode) const override;

    const EngineConfig& config() const { return cfg_; }
    const Providers& providers() const { return providers_; }
    std::map<std::string, std::string> provenance(const PipelineMode& mode) const;

private:
    ContextBundle retrieve_chorus(const std::string& problem, PipelineTrace& trace) const;
    ContextBundle retrieve_traditional(const std::string& problem, PipelineTrace& trace) const;

    EngineConfig cfg_;
    Providers providers_;
    PromptTemplates templates_;
    std::shared_ptr<const KnowledgeBase> kb_;
};

} // namespace chorus
