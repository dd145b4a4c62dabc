#include "chorus/metadata.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "chorus/error.hpp"
#include "chorus/text_util.hpp"
#include "chorus/tokenizer.hpp"
#include "chorus/vector_index.hpp"

namespace chorus {

namespace fs = std::filesystem;

namespace {

struct ParsedMetadata {
    std::vector<std::string> keywords;
    std::string synopsis;
};

std::optional<ParsedMetadata> parse_metadata_response(const std::string& raw, int max_lines)
{
    const auto j = extract_json_object(raw);
    if (!j) return std::nullopt;
    const auto kw = j->find("keywords");
    const auto syn = j->find("synopsis");
    if (kw == j->end() || !kw->is_array() || syn == j->end() || !syn->is_string()) return std::nullopt;

    ParsedMetadata out;
    for (const auto& k : *kw) {
        if (!k.is_string()) return std::nullopt;
        auto t = trim(k.get<std::string>());
        if (!t.empty()) out.keywords.push_back(std::move(t));
    }

    std::istringstream lines(syn->get<std::string>());
    std::string line;
    int kept = 0;
    while (kept < max_lines && std::getline(lines, line)) {
        auto t = trim(line);
        if (t.empty()) continue;
        if (!out.synopsis.empty()) out.synopsis += '\n';
        out.synopsis += t;
        ++kept;
    }
    if (out.synopsis.empty()) return std::nullopt;
    return out;
}

bool within(std::size_t n, int lo, int hi)
{
    return static_cast<int>(n) >= lo && static_cast<int>(n) <= hi;
}

} // namespace

ExampleMetadata generate_metadata(const std::string& code_text, const MetadataPromptConfig& cfg,
                                  const ChatProvider& chat)
{
    if (trim(code_text).empty()) throw ArgumentError("generate_metadata: empty code");
    if (cfg.keyword_min > cfg.keyword_max) throw ArgumentError("keyword_min exceeds keyword_max");
    if (cfg.prompt_template.empty()) throw ConfigError("metadata prompt template is empty");

    const auto prompt = render_template(cfg.prompt_template,
                                        {{"code", code_text},
                                         {"keyword_min", std::to_string(cfg.keyword_min)},
                                         {"keyword_max", std::to_string(cfg.keyword_max)},
                                         {"synopsis_max_lines", std::to_string(cfg.synopsis_max_lines)}});
    ChatRequest req;
    req.messages.push_back({Role::user, prompt});
    req.structured_schema_hint = nlohmann::json{
        {"type", "object"},
        {"properties", {{"keywords", {{"type", "array"}, {"items", {{"type", "string"}}}}},
                        {"synopsis", {{"type", "string"}}}}},
        {"required", {"keywords", "synopsis"}}};

    const auto first = chat.complete(req);
    auto parsed = parse_metadata_response(first, cfg.synopsis_max_lines);
    if (parsed && within(parsed->keywords.size(), cfg.keyword_min, cfg.keyword_max)) {
        return {std::move(parsed->keywords), std::move(parsed->synopsis), 1};
    }

    std::string reminder = parsed ? "Your reply had " + std::to_string(parsed->keywords.size()) + " keywords."
                                  : "Your reply was not a JSON object with keywords and synopsis.";
    reminder += " Reply only with a JSON object {\"keywords\": [...], \"synopsis\": \"...\"} holding between " +
                std::to_string(cfg.keyword_min) + " and " + std::to_string(cfg.keyword_max) +
                " keywords and a synopsis of at most " + std::to_string(cfg.synopsis_max_lines) + " lines.";
    req.messages.push_back({Role::user, reminder});

    const auto second = chat.complete(req);
    auto retried = parse_metadata_response(second, cfg.synopsis_max_lines);
    if (!retried) throw MetadataError("metadata response unparseable after retry", second);
    const auto n = retried->keywords.size();
    if (within(n, cfg.keyword_min, cfg.keyword_max)) {
        return {std::move(retried->keywords), std::move(retried->synopsis), 2};
    }
    if (within(n, cfg.keyword_floor, cfg.keyword_ceiling)) {
        spdlog::warn("accepting {} keywords, outside [{}, {}]", n, cfg.keyword_min, cfg.keyword_max);
        return {std::move(retried->keywords), std::move(retried->synopsis), 2};
    }
    throw MetadataError("metadata keyword count " + std::to_string(n) + " outside [" +
                            std::to_string(cfg.keyword_floor) + ", " + std::to_string(cfg.keyword_ceiling) + "]",
                        second);
}

std::string metadata_document(const CodeExample& example)
{
    std::string out;
    for (std::size_t i = 0; i < example.keywords.size(); ++i) {
        if (i) out += ", ";
        out += example.keywords[i];
    }
    out += '\n';
    out += example.synopsis;
    return out;
}

std::size_t index_examples(const std::vector<CodeExample>& examples, const EmbeddingProvider& embed,
                           VectorIndex& index)
{
    if (examples.empty()) return 0;
    std::vector<std::string> docs;
    docs.reserve(examples.size());
    for (const auto& ex : examples) {
        if (!ex.has_metadata()) throw IndexError("example '" + ex.id + "' has no metadata");
        docs.push_back(metadata_document(ex));
    }
    const auto vectors = embed.embed(docs);
    std::vector<IndexEntry> entries;
    entries.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        entries.push_back({examples[i].id, vectors[i], PayloadKind::code_example, examples[i].id});
    }
    index.add_entries(entries);
    return entries.size();
}

// ---------------------------------------------------------------------------

namespace {

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ArgumentError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_sidecar(const fs::path& p)
{
    const auto name = p.filename().string();
    return name.size() > 10 && name.compare(name.size() - 10, 10, ".meta.json") == 0;
}

} // namespace

std::vector<CodeExample> load_example_sources(const std::string& dir)
{
    if (!fs::is_directory(dir)) throw ArgumentError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && !is_sidecar(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<CodeExample> out;
    for (const auto& f : files) {
        CodeExample ex;
        ex.id = f.stem().string();
        ex.source_path = f.string();
        ex.code_text = read_file(f);
        if (trim(ex.code_text).empty()) {
            spdlog::warn("skipping empty example {}", ex.source_path);
            continue;
        }
        ex.token_count = count_tokens(ex.code_text);
        out.push_back(std::move(ex));
    }
    return out;
}

std::string sidecar_path(const CodeExample& example)
{
    return example.source_path + ".meta.json";
}

bool read_sidecar(CodeExample& example)
{
    const auto path = sidecar_path(example);
    if (!fs::exists(path)) return false;
    try {
        const auto j = nlohmann::json::parse(read_file(path));
        example.keywords = j.at("keywords").get<std::vector<std::string>>();
        example.synopsis = j.at("synopsis").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        spdlog::warn("ignoring malformed sidecar {}: {}", path, e.what());
        return false;
    }
    return example.has_metadata();
}

void write_sidecar(const CodeExample& example)
{
    const auto path = sidecar_path(example);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot write sidecar " + path);
    out << nlohmann::json{{"id", example.id}, {"keywords", example.keywords}, {"synopsis", example.synopsis}}.dump(2)
        << '\n';
}

nlohmann::json to_json(const CodeExample& example)
{
    return {{"id", example.id},
            {"source_path", example.source_path},
            {"code_text", example.code_text},
            {"keywords", example.keywords},
            {"synopsis", example.synopsis},
            {"token_count", example.token_count}};
}

CodeExample code_example_from_json(const nlohmann::json& j)
{
    CodeExample ex;
    ex.id = j.at("id").get<std::string>();
    ex.source_path = j.value("source_path", std::string{});
    ex.code_text = j.at("code_text").get<std::string>();
    ex.keywords = j.value("keywords", std::vector<std::string>{});
    ex.synopsis = j.value("synopsis", std::string{});
    ex.token_count = count_tokens(ex.code_text);
    return ex;
}

} // namespace chorus
