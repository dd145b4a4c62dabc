#include "chorus/harness.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <mutex>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "chorus/digest.hpp"
#include "chorus/error.hpp"
#include "chorus/providers.hpp"
#include "chorus/text_util.hpp"

namespace chorus {

std::vector<DatasetRecord> parse_dataset(const std::string& jsonl, const std::string& source_name)
{
    std::vector<DatasetRecord> out;
    std::set<std::string> ids;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fail = [&](const std::string& what) {
            throw HarnessError(source_name + ":" + std::to_string(line_no) + ": " + what);
        };
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) fail("not a JSON object");
        DatasetRecord r;
        try {
            r.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            r.problem_description = j.at("description").get<std::string>();
            r.reference_code = j.at("reference_code").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            fail(e.what());
        }
        if (trim(r.problem_description).empty()) fail("empty description");
        if (trim(r.reference_code).empty()) fail("empty reference_code");
        if (!ids.insert(r.id).second) fail("duplicate id '" + r.id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<DatasetRecord> load_dataset(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw HarnessError("cannot open dataset " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str(), path);
}

namespace {

class ReferenceCache {
public:
    ExecutionResult get(const std::string& code, const SandboxClient& sandbox, double timeout)
    {
        const auto key = hex_digest(code);
        std::shared_future<ExecutionResult> fut;
        std::promise<ExecutionResult> promise;
        bool owner = false;
        {
            std::lock_guard lock(mu_);
            auto it = cache_.find(key);
            if (it == cache_.end()) {
                fut = promise.get_future().share();
                cache_.emplace(key, fut);
                owner = true;
            } else {
                fut = it->second;
            }
        }
        if (owner) {
            try {
                promise.set_value(execute_code(code, sandbox, timeout));
            } catch (...) {
                promise.set_exception(std::current_exception());
            }
        }
        return fut.get();
    }

private:
    std::mutex mu_;
    std::map<std::string, std::shared_future<ExecutionResult>> cache_;
};

void add_note(EvalRecord& r, const std::string& what)
{
    if (!r.note.empty()) r.note += "; ";
    r.note += what;
}

EvalRecord evaluate_one(const DatasetRecord& rec, const PipelineMode& mode, const EvalServices& svc,
                        const EvalSettings& settings, ReferenceCache& refs)
{
    EvalRecord out;
    out.record_id = rec.id;

    try {
        out.ref_exec = refs.get(rec.reference_code, *svc.sandbox, settings.timeout_seconds);
    } catch (const std::exception& e) {
        out.ref_exec = {ExecStatus::runtime_error, std::nullopt, e.what(), 0.0};
        add_note(out, std::string("reference execution failed: ") + e.what());
    }

    try {
        auto gen = svc.generator->generate(rec.problem_description, mode);
        out.solution = std::move(gen.solution);
        out.attempts = gen.attempts;
    } catch (const GenerationError& e) {
        out.attempts = static_cast<int>(e.attempts().size());
        add_note(out, std::string("generation error: ") + e.what());
    } catch (const std::exception& e) {
        add_note(out, std::string("generation error: ") + e.what());
    }

    if (out.solution.code.empty()) {
        out.gen_exec = {ExecStatus::parse_error, std::nullopt, "no code generated", 0.0};
        out.edit_distance = metric_edit_distance("", rec.reference_code, settings.edit_metric);
        return out;
    }

    try {
        out.syntactic_validity = metric_syntactic_validity(out.solution.code, *svc.checker);
    } catch (const std::exception& e) {
        add_note(out, std::string("syntax check failed: ") + e.what());
    }
    try {
        out.gen_exec = execute_code(out.solution.code, *svc.sandbox, settings.timeout_seconds);
    } catch (const std::exception& e) {
        out.gen_exec = {ExecStatus::runtime_error, std::nullopt, e.what(), 0.0};
        add_note(out, std::string("execution failed: ") + e.what());
    }
    out.accuracy = metric_accuracy(out.gen_exec, out.ref_exec, settings.tolerance);
    try {
        out.semantic_similarity = metric_semantic_similarity(out.solution.code, rec.reference_code, *svc.embedder);
    } catch (const std::exception& e) {
        add_note(out, std::string("semantic similarity failed: ") + e.what());
    }
    out.edit_distance = metric_edit_distance(out.solution.code, rec.reference_code, settings.edit_metric);
    return out;
}

} // namespace

std::vector<EvalRecord> run_dataset(const std::vector<DatasetRecord>& dataset, const PipelineMode& mode,
                                    const EvalServices& services, const EvalSettings& settings)
{
    if (!services.generator || !services.sandbox || !services.checker || !services.embedder) {
        throw HarnessError("run_dataset: evaluation services not configured");
    }
    std::vector<EvalRecord> out(dataset.size());
    ReferenceCache refs;
    const auto n = static_cast<std::ptrdiff_t>(dataset.size());
    const int workers = std::max(1, settings.workers);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        try {
            out[u] = evaluate_one(dataset[u], mode, services, settings, refs);
        } catch (const std::exception& e) {
            out[u].record_id = dataset[u].id;
            add_note(out[u], std::string("evaluation failed: ") + e.what());
        }
    }
    for (const auto& r : out) {
        if (!r.note.empty()) spdlog::warn("record {}: {}", r.record_id, r.note);
    }
    return out;
}

namespace {

double order_free_mean(std::vector<double> values)
{
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

} // namespace

MetricsReport aggregate(const std::vector<EvalRecord>& records, const PipelineMode& mode,
                        std::map<std::string, std::string> provenance)
{
    if (records.empty()) throw ArgumentError("aggregate: no records");
    MetricsReport rep;
    rep.mode = mode_name(mode);
    rep.count = records.size();
    rep.provenance = std::move(provenance);
    for (auto s : {ExecStatus::optimal, ExecStatus::infeasible, ExecStatus::unbounded, ExecStatus::runtime_error,
                   ExecStatus::timeout, ExecStatus::parse_error}) {
        rep.status_counts[std::string(to_string(s))] = 0;
    }
    std::vector<double> acc, val, sim, edit;
    for (const auto& r : records) {
        acc.push_back(r.accuracy);
        val.push_back(r.syntactic_validity);
        sim.push_back(r.semantic_similarity);
        edit.push_back(r.edit_distance);
        ++rep.status_counts[std::string(to_string(r.gen_exec.status))];
    }
    rep.accuracy = order_free_mean(std::move(acc));
    rep.syntactic_validity = order_free_mean(std::move(val));
    rep.semantic_similarity = order_free_mean(std::move(sim));
    rep.edit_distance = order_free_mean(std::move(edit));
    return rep;
}

namespace {

nlohmann::json exec_json(const ExecutionResult& r)
{
    nlohmann::json j{{"status", to_string(r.status)}};
    j["objective"] = r.objective ? nlohmann::json(*r.objective) : nlohmann::json(nullptr);
    if (!r.stderr_excerpt.empty()) j["stderr_excerpt"] = r.stderr_excerpt;
    return j;
}

} // namespace

nlohmann::json to_json(const EvalRecord& record)
{
    return {{"id", record.record_id},
            {"accuracy", record.accuracy},
            {"syntactic_validity", record.syntactic_validity},
            {"semantic_similarity", record.semantic_similarity},
            {"edit_distance", record.edit_distance},
            {"attempts", record.attempts},
            {"generated", exec_json(record.gen_exec)},
            {"reference", exec_json(record.ref_exec)},
            {"code", record.solution.code},
            {"reasoning_steps", record.solution.reasoning_steps},
            {"note", record.note}};
}

nlohmann::json report_json(const MetricsReport& report, const std::vector<EvalRecord>& records)
{
    auto recs = nlohmann::json::array();
    for (const auto& r : records) recs.push_back(to_json(r));
    return {{"mode", report.mode},
            {"count", report.count},
            {"means",
             {{"accuracy", report.accuracy},
              {"syntactic_validity", report.syntactic_validity},
              {"semantic_similarity", report.semantic_similarity},
              {"edit_distance", report.edit_distance}}},
            {"status_counts", report.status_counts},
            {"provenance", report.provenance},
            {"records", recs}};
}

} // namespace chorus
