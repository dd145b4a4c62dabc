#include <doctest.h>

#include <mutex>

#include "chorus/error.hpp"
#include "chorus/generation.hpp"
#include "chorus/metadata.hpp"
#include "chorus/vector_index.hpp"
#include "support.hpp"

using namespace chorus;

namespace {

MetadataPromptConfig prompt_config()
{
    MetadataPromptConfig cfg;
    cfg.prompt_template = PromptTemplates::load(testsupport::kTemplateDir).metadata;
    return cfg;
}

std::string meta_reply(int n_keywords, const std::string& synopsis = "Line one.\nLine two.")
{
    std::vector<std::string> kws;
    for (int i = 0; i < n_keywords; ++i) kws.push_back("kw" + std::to_string(i));
    return nlohmann::json{{"keywords", kws}, {"synopsis", synopsis}}.dump();
}

class RecordingEmbedder final : public EmbeddingProvider {
public:
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const override
    {
        std::lock_guard lock(mu_);
        for (const auto& t : texts) seen.push_back(t);
        return inner_.embed(texts);
    }
    std::string model_name() const override { return "recording"; }

    mutable std::vector<std::string> seen;

private:
    HashEmbedder inner_{16};
    mutable std::mutex mu_;
};

const std::string kCode = "import gurobipy as gp\nm = gp.Model('diet')\nx = m.addVar(lb=0)\nm.optimize()\n";

} // namespace

TEST_CASE("metadata accepted on the first reply")
{
    MockChatProvider chat;
    chat.enqueue(meta_reply(6));
    const auto meta = generate_metadata(kCode, prompt_config(), chat);
    CHECK(meta.keywords.size() == 6);
    CHECK(meta.synopsis == "Line one.\nLine two.");
    CHECK(meta.attempts == 1);
    const auto req = chat.requests().at(0);
    CHECK(req.structured_schema_hint.has_value());
    CHECK(req.messages[0].content.find(kCode) != std::string::npos);
    CHECK(req.messages[0].content.find("5 to 7") != std::string::npos);
}

TEST_CASE("keyword count outside range triggers one corrective retry")
{
    MockChatProvider chat;
    chat.enqueue(meta_reply(4));
    chat.enqueue(meta_reply(5));
    const auto meta = generate_metadata(kCode, prompt_config(), chat);
    CHECK(meta.keywords.size() == 5);
    CHECK(meta.attempts == 2);
    REQUIRE(chat.requests().size() == 2);
    CHECK(chat.requests()[1].messages.size() == 2);
    CHECK(chat.requests()[1].messages[1].content.find("4 keywords") != std::string::npos);
}

TEST_CASE("fallback range after the retry")
{
    MockChatProvider chat;
    chat.enqueue(meta_reply(2));
    chat.enqueue(meta_reply(9));
    CHECK(generate_metadata(kCode, prompt_config(), chat).keywords.size() == 9);

    MockChatProvider chat2;
    chat2.enqueue(meta_reply(2));
    chat2.enqueue(meta_reply(11));
    CHECK_THROWS_AS(generate_metadata(kCode, prompt_config(), chat2), MetadataError);
}

TEST_CASE("unparseable twice is a metadata error with the raw reply")
{
    MockChatProvider chat;
    chat.enqueue("This code models a diet.");
    chat.enqueue("Still prose.");
    try {
        generate_metadata(kCode, prompt_config(), chat);
        FAIL("expected MetadataError");
    } catch (const MetadataError& e) {
        CHECK(e.raw_response() == "Still prose.");
    }
}

TEST_CASE("synopsis is capped at the configured number of lines")
{
    MockChatProvider chat;
    chat.enqueue(meta_reply(5, "a\nb\n\nc\nd\ne"));
    const auto meta = generate_metadata(kCode, prompt_config(), chat);
    CHECK(meta.synopsis == "a\nb\nc");
}

TEST_CASE("metadata arguments")
{
    MockChatProvider chat;
    CHECK_THROWS_AS(generate_metadata("  ", prompt_config(), chat), ArgumentError);
    MetadataPromptConfig no_template;
    CHECK_THROWS_AS(generate_metadata(kCode, no_template, chat), ConfigError);
}

TEST_CASE("metadata document and indexing")
{
    auto examples = testsupport::small_examples();
    CHECK(metadata_document(examples[0]) ==
          "minimize cost, continuous variables, linear constraints\nDiet problem minimizing cost.");

    RecordingEmbedder embed;
    VectorIndex idx;
    CHECK(index_examples(examples, embed, idx) == 3);
    CHECK(idx.size() == 3);
    REQUIRE(embed.seen.size() == 3);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        std::istringstream lines(examples[i].code_text);
        std::string line;
        while (std::getline(lines, line)) {
            if (!line.empty()) CHECK(embed.seen[i].find(line) == std::string::npos);
        }
        const auto e = idx.entry(examples[i].id);
        CHECK(e.payload_kind == PayloadKind::code_example);
        CHECK(e.payload_id == examples[i].id);
    }

    examples[1].keywords.clear();
    try {
        VectorIndex other;
        index_examples(examples, embed, other);
        FAIL("expected IndexError");
    } catch (const IndexError& e) {
        CHECK(std::string(e.what()).find("production") != std::string::npos);
    }
}

TEST_CASE("example sources and sidecars")
{
    testsupport::TempDir dir;
    testsupport::write_file(dir.path() / "b_transport.py", "x = 1\n");
    testsupport::write_file(dir.path() / "a_diet.py", kCode);
    testsupport::write_file(dir.path() / "empty.py", "  \n");
    testsupport::write_file(dir.path() / "a_diet.py.meta.json", R"({"keywords":["diet"],"synopsis":"s"})");

    auto examples = load_example_sources(dir.str());
    REQUIRE(examples.size() == 2);
    CHECK(examples[0].id == "a_diet");
    CHECK(examples[1].id == "b_transport");
    CHECK(examples[0].code_text == kCode);
    CHECK(examples[0].token_count > 0);

    CHECK(read_sidecar(examples[0]));
    CHECK(examples[0].keywords == std::vector<std::string>{"diet"});
    CHECK(!read_sidecar(examples[1]));

    examples[1].keywords = {"transport"};
    examples[1].synopsis = "Ship goods.";
    write_sidecar(examples[1]);
    CodeExample fresh = examples[1];
    fresh.keywords.clear();
    CHECK(read_sidecar(fresh));
    CHECK(fresh.keywords == std::vector<std::string>{"transport"});

    const auto back = code_example_from_json(to_json(examples[1]));
    CHECK(back.id == examples[1].id);
    CHECK(back.synopsis == examples[1].synopsis);
    CHECK(back.keywords == examples[1].keywords);

    CHECK_THROWS_AS(load_example_sources(dir.str("nope")), ArgumentError);
}
