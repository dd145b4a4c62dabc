#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "chorus/generation.hpp"
#include "chorus/metrics.hpp"
#include "chorus/sandbox.hpp"

namespace chorus {

class EmbeddingProvider;

struct DatasetRecord {
    std::string id;
    std::string problem_description;
    std::string reference_code;
};

/// JSONL, one {id, description, reference_code} per line. Throws HarnessError
/// naming the line on any defect, including duplicate ids.
std::vector<DatasetRecord> load_dataset(const std::string& path);
std::vector<DatasetRecord> parse_dataset(const std::string& jsonl, const std::string& source_name = "<dataset>");

/// Produces a structured solution for one problem under a pipeline mode.
class SolutionGenerator {
public:
    virtual ~SolutionGenerator() = default;
    virtual GenerationResult generate(const std::string& problem, const PipelineMode& mode) const = 0;
};

struct EvalRecord {
    std::string record_id;
    StructuredSolution solution;
    ExecutionResult gen_exec;
    ExecutionResult ref_exec;
    int accuracy = 0;
    int syntactic_validity = 0;
    double semantic_similarity = 0.0;
    double edit_distance = 0.0;
    int attempts = 0;
    /// Failures recorded for this record (generation, checker, embedding).
    std::string note;
};

struct EvalSettings {
    Tolerance tolerance;
    double timeout_seconds = 30.0;
    int workers = 4;
    EditMetric edit_metric = EditMetric::gestalt;
};

struct EvalServices {
    const SolutionGenerator* generator = nullptr;
    const SandboxClient* sandbox = nullptr;
    const SyntaxChecker* checker = nullptr;
    const EmbeddingProvider* embedder = nullptr;
};

/// Generates, executes and scores every record. Records run on a bounded
/// worker pool; a failure inside one record is noted on it and never aborts
/// the run. Reference executions are cached by code digest. Output order
/// follows the dataset.
std::vector<EvalRecord> run_dataset(const std::vector<DatasetRecord>& dataset, const PipelineMode& mode,
                                    const EvalServices& services, const EvalSettings& settings = {});

struct MetricsReport {
    std::string mode;
    std::size_t count = 0;
    double accuracy = 0.0;
    double syntactic_validity = 0.0;
    double semantic_similarity = 0.0;
    double edit_distance = 0.0;
    std::map<std::string, std::size_t> status_counts;
    std::map<std::string, std::string> provenance;
};

/// Arithmetic means over the records, independent of record order.
MetricsReport aggregate(const std::vector<EvalRecord>& records, const PipelineMode& mode,
                        std::map<std::string, std::string> provenance = {});

nlohmann::json to_json(const EvalRecord& record);
/// {mode, count, means, status_counts, provenance, records}
nlohmann::json report_json(const MetricsReport& report, const std::vector<EvalRecord>& records);

} // namespace chorus
