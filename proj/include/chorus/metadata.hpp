#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "chorus/providers.hpp"

namespace chorus {

class VectorIndex;

struct CodeExample {
    std::string id;
    std::string source_path;
    std::string code_text;
    std::vector<std::string> keywords;
    std::string synopsis;
    std::size_t token_count = 0;

    bool has_metadata() const { return !keywords.empty() && !synopsis.empty(); }
};

struct MetadataPromptConfig {
    int keyword_min = 5;
    int keyword_max = 7;
    int synopsis_max_lines = 3;
    /// Accepted after the corrective retry, with a warning.
    int keyword_floor = 3;
    int keyword_ceiling = 10;
    /// Placeholders: {{code}}, {{keyword_min}}, {{keyword_max}}, {{synopsis_max_lines}}.
    std::string prompt_template;
};

struct ExampleMetadata {
    std::vector<std::string> keywords;
    std::string synopsis;
    int attempts = 0;
};

/// Asks the chat provider for {keywords, synopsis}. One corrective retry when
/// the response is unparseable or the keyword count is outside
/// [keyword_min, keyword_max]; after it, counts inside
/// [keyword_floor, keyword_ceiling] are accepted with a warning.
ExampleMetadata generate_metadata(const std::string& code_text, const MetadataPromptConfig& cfg,
                                  const ChatProvider& chat);

/// Keywords joined by ", ", a newline, then the synopsis. This is the only
/// text embedded for example retrieval.
std::string metadata_document(const CodeExample& example);

/// Embeds each example's metadata document and upserts it with
/// payload_kind=code_example. Returns the number of entries written.
std::size_t index_examples(const std::vector<CodeExample>& examples, const EmbeddingProvider& embed,
                           VectorIndex& index);

/// Reads every regular file in `dir` (sorted by name) as one example; the id
/// is the file stem. Sidecar files "<name>.meta.json" are not examples.
std::vector<CodeExample> load_example_sources(const std::string& dir);

std::string sidecar_path(const CodeExample& example);
/// Fills keywords/synopsis from the sidecar if present; returns whether it was.
bool read_sidecar(CodeExample& example);
void write_sidecar(const CodeExample& example);

nlohmann::json to_json(const CodeExample& example);
CodeExample code_example_from_json(const nlohmann::json& j);

} // namespace chorus
