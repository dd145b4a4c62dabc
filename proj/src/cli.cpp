#include "chorus/cli.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "chorus/engine.hpp"
#include "chorus/error.hpp"
#include "chorus/text_util.hpp"

namespace chorus {

namespace {

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot write " + path);
    out << text;
    if (!out) throw PersistenceError("write to " + path + " failed");
}

struct Options {
    std::optional<std::string> config_path;
    std::string log_level = "warn";
    std::string manifest, dir, index, out, problem, dataset, mode, emit = "solution";
    int workers = 0;
};

std::shared_ptr<const KnowledgeBase> open_index(const Options& o, const EngineConfig& cfg)
{
    const auto& dir = o.index.empty() ? cfg.index_dir : o.index;
    if (dir.empty()) return nullptr;
    return std::make_shared<const KnowledgeBase>(KnowledgeBase::load(dir));
}

void require(const auto& provider, const char* what)
{
    if (!provider) throw ConfigError(std::string(what) + " provider is not configured");
}

int cmd_ingest(const Options& o, const EngineConfig& cfg)
{
    const auto providers = make_providers(cfg);
    require(providers.embed, "embedding");
    KnowledgeBase kb;
    ingest_documentation(kb, load_manifest(o.manifest), *providers.embed, cfg.fixed_size_tokens,
                         cfg.fixed_overlap_tokens);
    kb.save_documentation(o.out);
    spdlog::info("ingested {} nodes, {} fixed chunks into {}", kb.conceptual_index.size(), kb.fixed_chunks.size(),
                 o.out);
    return 0;
}

int cmd_index_examples(const Options& o, const EngineConfig& cfg)
{
    const auto providers = make_providers(cfg);
    require(providers.embed, "embedding");
    auto meta_cfg = cfg.metadata;
    meta_cfg.prompt_template = load_template(cfg.template_dir, "metadata.v1.txt");
    KnowledgeBase kb;
    auto examples = load_example_sources(o.dir);
    const auto n = examples.size();
    ingest_examples(kb, std::move(examples), providers.chat.get(), *providers.embed, meta_cfg, cfg.workers);
    kb.save_examples(o.out);
    spdlog::info("indexed {} examples into {}", n, o.out);
    return 0;
}

int cmd_stats(const Options& o, const EngineConfig&, std::ostream& out)
{
    const auto kb = KnowledgeBase::load(o.index);
    std::vector<Chunk> chunks;
    if (kb.tree) chunks = node_chunks(*kb.tree);
    std::vector<CodeExample> examples;
    for (const auto& [id, ex] : kb.examples) examples.push_back(ex);
    const auto text = to_json(corpus_stats(chunks, examples)).dump(2) + "\n";
    if (o.out.empty() || o.out == "-") {
        out << text;
    } else {
        write_text(o.out, text);
    }
    return 0;
}

int cmd_generate(const Options& o, const EngineConfig& cfg, std::ostream& out)
{
    const auto mode = mode_from_name(o.mode.empty() ? cfg.mode : o.mode);
    const auto problem = read_text(o.problem);
    if (trim(problem).empty()) throw ArgumentError("problem file is empty: " + o.problem);
    const auto kb = mode.retrieval == RetrievalMode::none ? nullptr : open_index(o, cfg);
    Engine engine(cfg, make_providers(cfg), PromptTemplates::load(cfg.template_dir), kb);
    const auto result = engine.generate(problem, mode);
    if (o.emit == "code") {
        out << result.solution.code;
        if (!result.solution.code.empty() && result.solution.code.back() != '\n') out << '\n';
    } else {
        nlohmann::json j{{"code", result.solution.code}};
        if (mode.reasoning_field) j["reasoning_steps"] = result.solution.reasoning_steps;
        out << j.dump(2) << '\n';
    }
    return 0;
}

int cmd_eval(const Options& o, EngineConfig cfg)
{
    const auto mode = mode_from_name(o.mode.empty() ? cfg.mode : o.mode);
    if (o.workers > 0) cfg.workers = o.workers;
    if (cfg.sandbox_cmd.empty()) throw ConfigError("no sandbox runner configured (set CHORUS_SANDBOX_CMD)");
    const auto dataset = load_dataset(o.dataset);
    if (dataset.empty()) throw HarnessError("dataset is empty: " + o.dataset);

    const auto kb = mode.retrieval == RetrievalMode::none ? nullptr : open_index(o, cfg);
    Engine engine(cfg, make_providers(cfg), PromptTemplates::load(cfg.template_dir), kb);
    require(engine.providers().embed, "embedding");
    CommandSandbox sandbox(cfg.sandbox_cmd);

    EvalServices services{&engine, &sandbox, &sandbox, engine.providers().embed.get()};
    EvalSettings settings{cfg.tolerance, cfg.timeout_seconds, cfg.workers, cfg.edit_metric};
    const auto records = run_dataset(dataset, mode, services, settings);
    const auto report = aggregate(records, mode, engine.provenance(mode));
    write_text(o.out, report_json(report, records).dump(2) + "\n");
    spdlog::info("{} records, accuracy {:.4f}", report.count, report.accuracy);
    return 0;
}

class LoggerScope {
public:
    LoggerScope(std::ostream& err, const std::string& level)
    {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
        auto logger = std::make_shared<spdlog::logger>("chorus", sink);
        logger->set_pattern("[%l] %v");
        logger->set_level(spdlog::level::from_str(level));
        previous_ = spdlog::default_logger();
        spdlog::set_default_logger(logger);
    }
    ~LoggerScope() { spdlog::set_default_logger(previous_); }

private:
    std::shared_ptr<spdlog::logger> previous_;
};

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Options o;
    CLI::App app{"LP code generation with retrieval over solver documentation and examples", "chorus"};
    app.require_subcommand(1);
    app.add_option("--config", o.config_path, "TOML configuration file")->check(CLI::ExistingFile);
    app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    const auto modes = mode_names();
    auto* ingest = app.add_subcommand("ingest", "Build the documentation indexes from a manifest");
    ingest->add_option("--manifest", o.manifest, "Documentation manifest (JSON)")->required()->check(CLI::ExistingFile);
    ingest->add_option("--out", o.out, "Index directory")->required();

    auto* index_examples = app.add_subcommand("index-examples", "Generate example metadata and index it");
    index_examples->add_option("--dir", o.dir, "Directory of example scripts")->required()->check(CLI::ExistingDirectory);
    index_examples->add_option("--out", o.out, "Index directory")->required();

    auto* stats = app.add_subcommand("stats", "Corpus statistics for an index directory");
    stats->add_option("--index", o.index, "Index directory")->required()->check(CLI::ExistingDirectory);
    stats->add_option("--out", o.out, "Output JSON file (default stdout)");

    auto* generate = app.add_subcommand("generate", "Generate solver code for one problem");
    generate->add_option("--problem", o.problem, "Problem description file")->required()->check(CLI::ExistingFile);
    generate->add_option("--index", o.index, "Index directory")->check(CLI::ExistingDirectory);
    generate->add_option("--mode", o.mode, "Pipeline mode")->check(CLI::IsMember(modes));
    generate->add_option("--emit", o.emit, "solution or code")->check(CLI::IsMember({"solution", "code"}));

    auto* eval = app.add_subcommand("eval", "Evaluate a mode on a dataset");
    eval->add_option("--dataset", o.dataset, "Dataset (JSONL)")->required()->check(CLI::ExistingFile);
    eval->add_option("--index", o.index, "Index directory")->check(CLI::ExistingDirectory);
    eval->add_option("--mode", o.mode, "Pipeline mode")->check(CLI::IsMember(modes));
    eval->add_option("--out", o.out, "Report file")->required();
    eval->add_option("--workers", o.workers, "Concurrent records")->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << app.help();
        return 2;
    }

    LoggerScope logging(err, o.log_level);
    try {
        const auto cfg = load_config(o.config_path);
        if (*ingest) return cmd_ingest(o, cfg);
        if (*index_examples) return cmd_index_examples(o, cfg);
        if (*stats) return cmd_stats(o, cfg, out);
        if (*generate) return cmd_generate(o, cfg, out);
        if (*eval) return cmd_eval(o, cfg);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace chorus
