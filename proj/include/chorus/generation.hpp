#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chorus/rerank.hpp"

namespace chorus {

class ChatProvider;

enum class RetrievalMode { none, traditional, chorus };

struct PipelineMode {
    bool expert_prompt = true;
    RetrievalMode retrieval = RetrievalMode::chorus;
    bool reasoning_field = true;

    friend bool operator==(const PipelineMode&, const PipelineMode&) = default;
};

/// The five ablation configurations.
namespace modes {
inline constexpr PipelineMode baseline{false, RetrievalMode::none, true};
inline constexpr PipelineMode baseline_expert{true, RetrievalMode::none, true};
inline constexpr PipelineMode traditional_rag{true, RetrievalMode::traditional, true};
inline constexpr PipelineMode chorus_noreason{true, RetrievalMode::chorus, false};
inline constexpr PipelineMode chorus{true, RetrievalMode::chorus, true};
} // namespace modes

/// "baseline", "baseline-expert", "traditional-rag", "chorus-noreason", "chorus".
PipelineMode mode_from_name(std::string_view name);
std::string mode_name(const PipelineMode& mode);
std::vector<std::string> mode_names();

struct PromptTemplates {
    std::string expert_system;
    std::string expert_user;
    std::string baseline_system;
    std::string baseline_user;
    std::string keywords;
    std::string metadata;

    /// Reads the versioned template set from `dir`; throws ConfigError on any missing file.
    static PromptTemplates load(const std::string& dir);
};

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    nlohmann::json schema;
};

struct StructuredSolution {
    std::string code;
    std::string reasoning_steps;

    friend bool operator==(const StructuredSolution&, const StructuredSolution&) = default;
};

inline constexpr std::string_view kConceptualLabel = "CONCEPTUAL CONTEXT";
inline constexpr std::string_view kExampleLabel = "CODE EXAMPLE";

/// JSON schema for the {code, reasoning_steps} response; reasoning_steps is
/// omitted entirely when the mode disables it.
nlohmann::json solution_schema(bool reasoning_field);

/// Labelled context blocks, one per bundle item, conceptual first.
std::string render_contexts(const ContextBundle& bundle);

PromptBundle assemble_prompt(const std::string& problem, const ContextBundle& bundle, const PipelineMode& mode,
                             const PromptTemplates& templates);

/// Accepts a JSON object (bare, fenced, or embedded in prose). The code field
/// is fence-stripped and trimmed; reasoning_steps is required and non-empty
/// when the mode asks for it. Throws ParseError naming the defect.
StructuredSolution parse_structured(const std::string& raw, const PipelineMode& mode);

std::string serialize(const StructuredSolution& solution);

struct GenerationResult {
    StructuredSolution solution;
    int attempts = 0;
    std::vector<std::string> raw_attempts;
};

/// Temperature 0. On a parse failure the parse error is appended as a new user
/// turn and the model asked again, up to `retries` more times. Throws
/// GenerationError holding every raw attempt.
GenerationResult generate_solution(const PromptBundle& prompt, const PipelineMode& mode, const ChatProvider& chat,
                                   int retries = 2);

} // namespace chorus
