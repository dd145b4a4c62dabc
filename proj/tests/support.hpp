#pragma once

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chorus/corpus.hpp"
#include "chorus/harness.hpp"
#include "chorus/metadata.hpp"
#include "chorus/providers.hpp"
#include "oracles/lp_vertices.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline const std::string kTemplateDir = CHORUS_TEST_TEMPLATE_DIR;
inline const std::string kMockSandbox = std::string(CHORUS_TEST_FIXTURE_DIR) + "/mock_sandbox.sh";

class TempDir {
public:
    TempDir()
    {
        std::string tmpl = (fs::temp_directory_path() / "chorus-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    std::string str(const std::string& name = "") const { return name.empty() ? path_.string() : (path_ / name).string(); }

private:
    fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string random_words(std::mt19937_64& rng, std::size_t n)
{
    static const std::vector<std::string> vocab = {
        "variable", "constraint", "objective", "bound",    "model",   "linear",  "integer", "continuous",
        "solver",   "optimize",   "maximize",  "minimize", "profit",  "cost",    "capacity", "demand",
        "supply",   "resource",   "quicksum",  "addVar",   "addConstr", "setObjective", "<=", ">=", "+", "*",
        "3",        "10",         "x",         "y"};
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += vocab[pick(rng)];
    }
    return out;
}

/// Valid manifest of `n` entries: one document, then levels that never skip
/// a step downward. Body lengths vary enough to exercise packing and oversize.
inline chorus::CorpusManifest synthetic_manifest(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coin(0, 99);
    std::uniform_int_distribution<std::size_t> body_len(0, 140);
    std::uniform_int_distribution<std::size_t> intro_len(1, 40);

    chorus::CorpusManifest m;
    m.push_back({chorus::Level::document, "Reference Manual", random_words(rng, 30), ""});
    int depth = 0;
    for (std::size_t k = 1; k < n; ++k) {
        int level;
        if (depth == 0) {
            level = 1;
        } else {
            std::uniform_int_distribution<int> next(1, std::min(3, depth + 1));
            level = next(rng);
        }
        depth = level;
        chorus::ManifestEntry e;
        e.level = static_cast<chorus::Level>(level);
        e.title = "Heading " + std::to_string(k);
        e.intro = coin(rng) < 30 ? "" : random_words(rng, intro_len(rng));
        std::size_t len = body_len(rng);
        if (coin(rng) < 4) len = 420;
        e.body = random_words(rng, len);
        m.push_back(std::move(e));
    }
    return m;
}

/// Small hand-written documentation set for pipeline tests.
inline chorus::CorpusManifest small_manifest()
{
    using chorus::Level;
    return {
        {Level::document, "Solver Manual", "Reference for the modeling API.", ""},
        {Level::chapter, "Variables", "Decision variables hold the unknowns of a model.", ""},
        {Level::section, "Continuous variables", "", "Use addVar with lb=0 for continuous nonnegative variables."},
        {Level::section, "Integer variables", "", "Set vtype to INTEGER for integer variables."},
        {Level::chapter, "Constraints", "Constraints restrict the feasible region.", ""},
        {Level::section, "Linear constraints", "", "addConstr adds a linear constraint such as x + y <= 4."},
        {Level::section, "Resource limits", "", "Capacity and resource constraints bound total usage."},
        {Level::chapter, "Objective", "", "setObjective with GRB.MAXIMIZE to maximize profit or GRB.MINIMIZE for cost."},
    };
}

inline std::vector<chorus::CodeExample> small_examples()
{
    std::vector<chorus::CodeExample> out(3);
    out[0] = {"diet", "", "import gurobipy as gp\nm = gp.Model()\nx = m.addVar()\nm.setObjective(2 * x, gp.GRB.MINIMIZE)\n",
              {"minimize cost", "continuous variables", "linear constraints"}, "Diet problem minimizing cost.", 0};
    out[1] = {"production", "", "import gurobipy as gp\nm = gp.Model()\nx = m.addVar()\ny = m.addVar()\nm.addConstr(x + y <= 4)\n",
              {"maximize profit", "resource allocation", "linear constraints"}, "Production planning for profit.", 0};
    out[2] = {"assignment", "", "import gurobipy as gp\nm = gp.Model()\nz = m.addVars(3, vtype='B')\n",
              {"binary variables", "assignment", "integer variables"}, "Assign workers to jobs.", 0};
    return out;
}

struct ToyProblem {
    std::string id;
    std::string description;
    oracle::Lp2 lp;
};

inline std::vector<ToyProblem> toy_problems()
{
    return {
        {"lp-1", "Maximize 3x + 2y subject to x + y <= 4 and x <= 3 with x, y nonnegative.",
         {3, 2, true, {{1, 1, 4}, {1, 0, 3}}}},
        {"lp-2", "A workshop makes tables (profit 5) and chairs (profit 4). Tables use 6 hours of wood and chairs 4 "
                 "hours, with 24 hours available. Tables use 1 hour of paint and chairs 2, with 6 hours available. "
                 "Maximize profit.",
         {5, 4, true, {{6, 4, 24}, {1, 2, 6}}}},
        {"lp-3", "Minimize the cost 2x + 3y of buying at least 5 units in total when at most 3 units of x are in stock.",
         {2, 3, false, {{1, 1, 5, true}, {1, 0, 3}}}},
    };
}

inline std::string format_objective(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Solver script whose mock-sandbox objective is the oracle optimum.
inline std::string reference_script(const ToyProblem& p)
{
    const double z = *oracle::solve(p.lp);
    return "import gurobipy as gp\n# mock-objective: " + format_objective(z) +
           "\ndef solve_lp():\n    m = gp.Model()\n    return m.ObjVal\n";
}

inline std::vector<chorus::DatasetRecord> toy_dataset()
{
    std::vector<chorus::DatasetRecord> out;
    for (const auto& p : toy_problems()) out.push_back({p.id, p.description, reference_script(p)});
    return out;
}

inline std::string dataset_jsonl(const std::vector<chorus::DatasetRecord>& records)
{
    std::string out;
    for (const auto& r : records) {
        out += nlohmann::json{{"id", r.id}, {"description", r.problem_description}, {"reference_code", r.reference_code}}
                   .dump() +
               "\n";
    }
    return out;
}

/// Chat mock that answers keyword and metadata prompts with fixed text and
/// generation prompts with the reference code of the problem they contain.
inline std::shared_ptr<chorus::MockChatProvider> echo_chat(std::vector<chorus::DatasetRecord> records)
{
    auto chat = std::make_shared<chorus::MockChatProvider>();
    chat->set_responder([records = std::move(records)](const chorus::ChatRequest& req) -> std::optional<std::string> {
        std::string all;
        for (const auto& m : req.messages) all += m.content + "\n";
        if (all.find("Extract between") != std::string::npos) {
            return "linear constraints; continuous variables; maximize profit; resource allocation; minimize cost";
        }
        if (all.find("Code example:") != std::string::npos) {
            return R"({"keywords": ["linear constraints", "continuous variables", "maximize profit", "resource allocation", "lp"], "synopsis": "A small linear program."})";
        }
        for (const auto& r : records) {
            if (all.find(r.problem_description) != std::string::npos) {
                return nlohmann::json{{"code", r.reference_code},
                                      {"reasoning_steps", "Variables, constraints and objective follow the statement."}}
                    .dump();
            }
        }
        return nlohmann::json{{"code", "def solve_lp():\n    return 0\n"}, {"reasoning_steps", "fallback"}}.dump();
    });
    return chat;
}

} // namespace testsupport
