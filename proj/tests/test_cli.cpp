#include <doctest.h>

#include <sstream>

#include "chorus/cli.hpp"
#include "chorus/corpus.hpp"
#include "support.hpp"

using namespace chorus;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

// Config, chat fixtures, docs, examples and dataset in one scratch directory.
class Workspace {
public:
    Workspace()
    {
        const auto ds = testsupport::toy_dataset();
        nlohmann::json rules = nlohmann::json::array();
        rules.push_back({{"contains", "Extract between"},
                         {"response", "linear constraints; maximize profit; continuous variables"}});
        rules.push_back({{"contains", "Code example:"},
                         {"response", R"({"keywords": ["lp", "linear constraints", "maximize profit", "continuous variables", "resource allocation"], "synopsis": "A small LP."})"}});
        for (const auto& r : ds) {
            rules.push_back({{"contains", r.problem_description},
                             {"response", nlohmann::json{{"code", r.reference_code}, {"reasoning_steps", "x, y"}}.dump()}});
        }
        testsupport::write_file(dir.path() / "chat.json", nlohmann::json{{"rules", rules}}.dump());

        testsupport::write_file(dir.path() / "chorus.toml",
                                "[providers.chat]\nurl = \"mock:" + dir.str("chat.json") +
                                    "\"\n[providers.embed]\nurl = \"mock:\"\n[providers.rerank]\nurl = \"mock:\"\n"
                                    "[eval]\nsandbox_cmd = \"" + testsupport::kMockSandbox +
                                    "\"\ntimeout_seconds = 5.0\nworkers = 2\n");
        testsupport::write_file(dir.path() / "manifest.json",
                                manifest_to_json(testsupport::small_manifest()).dump());
        std::filesystem::create_directories(dir.path() / "examples");
        for (const auto& ex : testsupport::small_examples()) {
            testsupport::write_file(dir.path() / "examples" / (ex.id + ".py"), ex.code_text);
        }
        testsupport::write_file(dir.path() / "problem.txt", ds[0].problem_description);
        testsupport::write_file(dir.path() / "d.jsonl", testsupport::dataset_jsonl(ds));
    }

    std::string path(const std::string& name) const { return dir.str(name); }
    std::string config() const { return dir.str("chorus.toml"); }

    void build_index() const
    {
        REQUIRE(run({"--config", config(), "ingest", "--manifest", path("manifest.json"), "--out", path("idx")}).code == 0);
        REQUIRE(run({"--config", config(), "index-examples", "--dir", path("examples"), "--out", path("idx")}).code == 0);
    }

    testsupport::TempDir dir;
};

} // namespace

TEST_CASE("usage errors exit with 2")
{
    CHECK(run({}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    const auto r = run({"ingest", "--out", "x"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--manifest") != std::string::npos);
    CHECK(run({"generate", "--problem", "/nonexistent/p.txt"}).code == 2);
    CHECK(run({"eval", "--dataset", "/nonexistent", "--out", "r.json"}).code == 2);
    CHECK(run({"--config", "/nonexistent/c.toml", "stats", "--index", "."}).code == 2);
}

TEST_CASE("help exits with 0")
{
    const auto r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("index-examples") != std::string::npos);
}

TEST_CASE("runtime errors exit with 1")
{
    Workspace ws;
    testsupport::write_file(ws.path("bad.toml"), "[pipeline]\nmode = \"fastest\"\n");
    auto r = run({"--config", ws.path("bad.toml"), "generate", "--problem", ws.path("problem.txt")});
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);

    // no chat provider configured
    testsupport::write_file(ws.path("empty.toml"), "");
    r = run({"--config", ws.path("empty.toml"), "generate", "--problem", ws.path("problem.txt"), "--mode", "baseline"});
    CHECK(r.code == 1);

    // eval without a runner
    r = run({"--config", ws.path("empty.toml"), "eval", "--dataset", ws.path("d.jsonl"), "--out", ws.path("r.json")});
    CHECK(r.code == 1);
    CHECK(r.err.find("sandbox") != std::string::npos);
}

TEST_CASE("ingest, index-examples and stats")
{
    Workspace ws;
    ws.build_index();
    CHECK(std::filesystem::exists(ws.path("idx/manifest.json")));
    CHECK(std::filesystem::exists(ws.path("idx/examples.index.jsonl")));
    CHECK(std::filesystem::exists(ws.path("examples/diet.py.meta.json")));

    const auto r = run({"--config", ws.config(), "stats", "--index", ws.path("idx")});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    for (const char* key : {"conceptual_hist", "example_hist", "raw_code_terms", "metadata_terms"}) {
        CHECK(j.contains(key));
    }
    CHECK(run({"--config", ws.config(), "stats", "--index", ws.path("idx"), "--out", ws.path("s.json")}).code == 0);
    CHECK(nlohmann::json::parse(testsupport::read_file(ws.path("s.json"))) == j);
}

TEST_CASE("generate prints the solution")
{
    Workspace ws;
    ws.build_index();
    const auto ref = testsupport::toy_dataset()[0].reference_code;

    auto r = run({"--config", ws.config(), "generate", "--problem", ws.path("problem.txt"), "--index", ws.path("idx"),
                  "--emit", "code"});
    REQUIRE(r.code == 0);
    CHECK(r.out == ref);

    r = run({"--config", ws.config(), "generate", "--problem", ws.path("problem.txt"), "--mode", "baseline"});
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["code"].get<std::string>() + "\n" == ref);
    CHECK(j["reasoning_steps"] == "x, y");

    r = run({"--config", ws.config(), "generate", "--problem", ws.path("problem.txt"), "--index", ws.path("idx"),
             "--mode", "chorus-noreason"});
    REQUIRE(r.code == 0);
    j = nlohmann::json::parse(r.out);
    CHECK(!j.contains("reasoning_steps"));
}

TEST_CASE("eval writes a report")
{
    Workspace ws;
    ws.build_index();
    const auto r = run({"--config", ws.config(), "eval", "--dataset", ws.path("d.jsonl"), "--index", ws.path("idx"),
                        "--mode", "chorus", "--out", ws.path("r.json")});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(testsupport::read_file(ws.path("r.json")));
    CHECK(j["mode"] == "chorus");
    CHECK(j["count"] == 3);
    CHECK(j["means"]["accuracy"] == 1.0);
    CHECK(j["means"]["syntactic_validity"] == 1.0);
    CHECK(j["status_counts"]["optimal"] == 3);
    CHECK(j["provenance"]["chat_model"] == "mock-chat");

    // no index: runs context-free
    CHECK(run({"--config", ws.config(), "eval", "--dataset", ws.path("d.jsonl"), "--mode", "traditional-rag", "--out",
               ws.path("r2.json")})
              .code == 0);
}
