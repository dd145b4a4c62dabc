#include "chorus/generation.hpp"

#include "chorus/error.hpp"
#include "chorus/providers.hpp"
#include "chorus/text_util.hpp"

namespace chorus {

PipelineMode mode_from_name(std::string_view name)
{
    if (name == "baseline") return modes::baseline;
    if (name == "baseline-expert") return modes::baseline_expert;
    if (name == "traditional-rag") return modes::traditional_rag;
    if (name == "chorus-noreason") return modes::chorus_noreason;
    if (name == "chorus") return modes::chorus;
    throw ConfigError("unknown pipeline mode '" + std::string(name) + "'");
}

std::string mode_name(const PipelineMode& mode)
{
    if (mode == modes::baseline) return "baseline";
    if (mode == modes::baseline_expert) return "baseline-expert";
    if (mode == modes::traditional_rag) return "traditional-rag";
    if (mode == modes::chorus_noreason) return "chorus-noreason";
    if (mode == modes::chorus) return "chorus";
    static constexpr const char* retrieval[] = {"none", "traditional", "chorus"};
    return std::string("custom(expert=") + (mode.expert_prompt ? "1" : "0") +
           ",retrieval=" + retrieval[static_cast<int>(mode.retrieval)] +
           ",reasoning=" + (mode.reasoning_field ? "1" : "0") + ")";
}

std::vector<std::string> mode_names()
{
    return {"baseline", "baseline-expert", "traditional-rag", "chorus-noreason", "chorus"};
}

PromptTemplates PromptTemplates::load(const std::string& dir)
{
    PromptTemplates t;
    t.expert_system = load_template(dir, "expert_system.v1.txt");
    t.expert_user = load_template(dir, "expert_user.v1.txt");
    t.baseline_system = load_template(dir, "baseline_system.v1.txt");
    t.baseline_user = load_template(dir, "baseline_user.v1.txt");
    t.keywords = load_template(dir, "keywords.v1.txt");
    t.metadata = load_template(dir, "metadata.v1.txt");
    return t;
}

nlohmann::json solution_schema(bool reasoning_field)
{
    nlohmann::json props = {
        {"code",
         {{"type", "string"},
          {"description", "Complete Python program using the gurobipy API that defines solve_lp() and returns the "
                          "optimal objective value"}}}};
    nlohmann::json required = {"code"};
    if (reasoning_field) {
        props["reasoning_steps"] = {
            {"type", "string"},
            {"description", "Step-by-step account of how each decision variable, constraint and the objective in "
                            "the code corresponds to the problem statement"}};
        required.push_back("reasoning_steps");
    }
    return {{"title", "LPSolution"}, {"type", "object"}, {"properties", props}, {"required", required}};
}

std::string render_contexts(const ContextBundle& bundle)
{
    std::string out;
    std::size_t n = 0;
    for (const auto& c : bundle.conceptual) {
        out += "### " + std::string(kConceptualLabel) + " " + std::to_string(++n) + "\n" + c.text + "\n\n";
    }
    n = 0;
    for (const auto& e : bundle.examples) {
        out += "### " + std::string(kExampleLabel) + " " + std::to_string(++n) + "\n```python\n" + e.code_text;
        if (!e.code_text.empty() && e.code_text.back() != '\n') out += '\n';
        out += "```\n\n";
    }
    return out;
}

PromptBundle assemble_prompt(const std::string& problem, const ContextBundle& bundle, const PipelineMode& mode,
                             const PromptTemplates& templates)
{
    const auto& sys_tmpl = mode.expert_prompt ? templates.expert_system : templates.baseline_system;
    const auto& user_tmpl = mode.expert_prompt ? templates.expert_user : templates.baseline_user;
    if (sys_tmpl.empty() || user_tmpl.empty()) throw ConfigError("prompt template not loaded");

    PromptBundle out;
    out.schema = solution_schema(mode.reasoning_field);
    std::string contexts = mode.retrieval == RetrievalMode::none ? std::string{} : render_contexts(bundle);
    if (!contexts.empty()) contexts = "Reference material from the solver documentation and code examples:\n\n" + contexts;
    const std::map<std::string, std::string> vars{
        {"problem", problem}, {"contexts", contexts}, {"schema", out.schema.dump(2)}};
    out.system_text = trim(render_template(sys_tmpl, vars));
    out.user_text = trim(render_template(user_tmpl, vars));
    return out;
}

StructuredSolution parse_structured(const std::string& raw, const PipelineMode& mode)
{
    const auto obj = extract_json_object(raw);
    if (!obj) throw ParseError("undecodable payload: no JSON object found");

    const auto code = obj->find("code");
    if (code == obj->end()) throw ParseError("missing code");
    if (!code->is_string()) throw ParseError("code is not a string");

    StructuredSolution s;
    s.code = strip_code_fences(code->get<std::string>());
    if (s.code.empty()) throw ParseError("empty code");

    const auto reasoning = obj->find("reasoning_steps");
    if (reasoning != obj->end() && !reasoning->is_null()) {
        if (!reasoning->is_string()) throw ParseError("reasoning_steps is not a string");
        s.reasoning_steps = trim(reasoning->get<std::string>());
    } else if (mode.reasoning_field) {
        throw ParseError("missing reasoning_steps");
    }
    if (mode.reasoning_field && s.reasoning_steps.empty()) throw ParseError("empty reasoning_steps");
    return s;
}

std::string serialize(const StructuredSolution& solution)
{
    return nlohmann::json{{"code", solution.code}, {"reasoning_steps", solution.reasoning_steps}}.dump();
}

GenerationResult generate_solution(const PromptBundle& prompt, const PipelineMode& mode, const ChatProvider& chat,
                                   int retries)
{
    ChatRequest req;
    if (!prompt.system_text.empty()) req.messages.push_back({Role::system, prompt.system_text});
    req.messages.push_back({Role::user, prompt.user_text});
    req.temperature = 0.0;
    req.structured_schema_hint = prompt.schema;

    GenerationResult result;
    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        if (attempt > 0) {
            req.messages.push_back(
                {Role::user, "Your previous response was rejected: " + last_error +
                                 ". Reply with a single JSON object that matches the schema and nothing else."});
        }
        std::string raw;
        try {
            raw = chat.complete(req);
        } catch (const ProviderError& e) {
            raw.clear();
            last_error = std::string("provider error: ") + e.what();
            result.raw_attempts.push_back(raw);
            continue;
        }
        result.raw_attempts.push_back(raw);
        try {
            result.solution = parse_structured(raw, mode);
            result.attempts = attempt + 1;
            return result;
        } catch (const ParseError& e) {
            last_error = e.what();
        }
    }
    throw GenerationError("no valid structured response after " + std::to_string(retries + 1) +
                              " attempts; last error: " + last_error,
                          std::move(result.raw_attempts));
}

} // namespace chorus
