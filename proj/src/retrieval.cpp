#include "chorus/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>

#include "chorus/digest.hpp"
#include "chorus/error.hpp"
#include "chorus/text_util.hpp"
#include "chorus/tokenizer.hpp"
#include "chorus/vector_index.hpp"

namespace chorus {

namespace {

std::string lower(std::string s)
{
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string clean_item(std::string_view item)
{
    auto t = trim(item);
    // "- foo", "* foo", "1. foo", "2) foo"
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) t = trim(std::string_view(t).substr(i + 1));
    if (!t.empty() && (t[0] == '-' || t[0] == '*' || t[0] == '+')) t = trim(std::string_view(t).substr(1));
    while (!t.empty() && (t.front() == '"' || t.front() == '\'' || t.front() == '`')) t.erase(t.begin());
    while (!t.empty() && (t.back() == '"' || t.back() == '\'' || t.back() == '`' || t.back() == '.')) t.pop_back();
    return lower(trim(t));
}

void add_unique(std::vector<std::string>& out, std::set<std::string>& seen, const std::string& kw)
{
    if (kw.empty() || out.size() >= kMaxKeywords) return;
    if (seen.insert(kw).second) out.push_back(kw);
}

} // namespace

std::vector<std::string> parse_keyword_list(const std::string& raw)
{
    std::vector<std::string> out;
    std::set<std::string> seen;

    const auto body = trim(raw);
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) {
        if (auto obj = extract_json_object(body)) j = *obj;
    }
    if (!j.is_discarded()) {
        const nlohmann::json* list = nullptr;
        if (j.is_array()) list = &j;
        if (j.is_object() && j.contains("keywords") && j["keywords"].is_array()) list = &j["keywords"];
        if (list) {
            for (const auto& item : *list) {
                if (item.is_string()) add_unique(out, seen, clean_item(item.get<std::string>()));
            }
            return out;
        }
    }

    std::string text = body;
    if (lower(text.substr(0, 9)) == "keywords:") text = text.substr(9);
    std::string item;
    for (char c : text) {
        if (c == ';' || c == ',' || c == '\n') {
            add_unique(out, seen, clean_item(item));
            item.clear();
        } else {
            item += c;
        }
    }
    add_unique(out, seen, clean_item(item));
    return out;
}

KeywordSet extract_keywords(const std::string& problem, const ChatProvider& chat, const std::string& prompt_template)
{
    if (trim(problem).empty()) throw ArgumentError("extract_keywords: empty problem");
    if (prompt_template.empty()) throw ConfigError("keyword prompt template is empty");

    ChatRequest req;
    req.messages.push_back({Role::user, render_template(prompt_template, {{"problem", problem}})});

    auto reply = chat.complete(req);
    auto keywords = parse_keyword_list(reply);
    if (keywords.empty()) {
        req.messages.push_back(
            {Role::user, "No keywords could be read from your reply. Answer only with the keywords, separated by "
                         "semicolons."});
        reply = chat.complete(req);
        keywords = parse_keyword_list(reply);
        if (keywords.empty()) throw RetrievalError("keyword extraction failed after retry: " + reply.substr(0, 200));
    }
    return {std::move(keywords), hex_digest(problem)};
}

Chunk build_adaptive_chunk(const std::string& node_id, const DocTree& tree, const RetrievalConfig& cfg)
{
    const auto& node = tree.at(node_id);
    const DocNode* parent = node.parent_id ? &tree.at(*node.parent_id) : nullptr;

    Chunk chunk;
    chunk.id = node_id;
    chunk.kind = ChunkKind::conceptual;

    std::size_t used = 0;
    auto append = [&](const std::string& text, std::size_t tokens, const std::string& source) {
        if (!chunk.text.empty()) chunk.text += "\n\n";
        chunk.text += text;
        used += tokens;
        chunk.source_node_ids.push_back(source);
    };

    if (parent && !parent->intro_text.empty()) append(parent->intro_text, count_tokens(parent->intro_text), parent->id);
    const auto own = node_text(node);
    append(own, count_tokens(own), node.id);

    if (used > cfg.max_chunk_tokens) {
        chunk.oversize = true;
    } else if (parent) {
        for (std::size_t i = static_cast<std::size_t>(node.order_index) + 1; i < parent->child_ids.size(); ++i) {
            const auto& sibling = tree.at(parent->child_ids[i]);
            const auto text = node_text(sibling);
            const auto tokens = count_tokens(text);
            if (used + tokens <= cfg.max_chunk_tokens) append(text, tokens, sibling.id);
        }
    }
    chunk.token_count = count_tokens(chunk.text);
    return chunk;
}

namespace {

void order_candidates(std::vector<RetrievalCandidate>& out)
{
    std::sort(out.begin(), out.end(), [](const RetrievalCandidate& a, const RetrievalCandidate& b) {
        return a.score != b.score ? a.score > b.score : a.chunk.id < b.chunk.id;
    });
}

std::vector<EmbeddingVector> embed_or_throw(const EmbeddingProvider& embed, const std::vector<std::string>& texts)
{
    try {
        return embed.embed(texts);
    } catch (const ProviderError& e) {
        throw RetrievalError(std::string("embedding failed: ") + e.what());
    }
}

} // namespace

std::vector<RetrievalCandidate> retrieve_conceptual(const KeywordSet& keys, const DocTree& tree,
                                                    const VectorIndex& index, const RetrievalConfig& cfg,
                                                    const EmbeddingProvider& embed)
{
    if (keys.keywords.empty()) throw ArgumentError("retrieve_conceptual: empty keyword set");
    if (index.empty()) return {};
    const auto vectors = embed_or_throw(embed, keys.keywords);

    struct Best {
        double score;
        std::string keyword;
    };
    std::unordered_map<std::string, Best> best;
    for (std::size_t k = 0; k < keys.keywords.size(); ++k) {
        for (const auto& hit : index.search(vectors[k], cfg.k_per_keyword)) {
            if (hit.payload_kind != PayloadKind::conceptual) continue;
            auto [it, inserted] = best.try_emplace(hit.payload_id, Best{hit.score, keys.keywords[k]});
            if (!inserted && hit.score > it->second.score) it->second = {hit.score, keys.keywords[k]};
        }
    }

    std::vector<RetrievalCandidate> out;
    out.reserve(best.size());
    for (const auto& [node_id, b] : best) {
        RetrievalCandidate c;
        c.chunk = build_adaptive_chunk(node_id, tree, cfg);
        c.score = b.score;
        c.matched_keyword = b.keyword;
        c.kind = ChunkKind::conceptual;
        out.push_back(std::move(c));
    }
    order_candidates(out);
    return out;
}

std::vector<RetrievalCandidate> retrieve_examples(const KeywordSet& keys, const VectorIndex& index,
                                                  const std::map<std::string, CodeExample>& examples,
                                                  const RetrievalConfig& cfg, const EmbeddingProvider& embed)
{
    if (keys.keywords.empty()) throw ArgumentError("retrieve_examples: empty keyword set");
    if (index.empty()) return {};
    std::string query;
    for (std::size_t i = 0; i < keys.keywords.size(); ++i) {
        if (i) query += ", ";
        query += keys.keywords[i];
    }
    const auto vec = embed_or_throw(embed, {query});

    std::vector<RetrievalCandidate> out;
    for (const auto& hit : index.search(vec.front(), cfg.m_examples)) {
        if (hit.payload_kind != PayloadKind::code_example) continue;
        auto it = examples.find(hit.payload_id);
        if (it == examples.end()) throw RetrievalError("index refers to unknown example '" + hit.payload_id + "'");
        RetrievalCandidate c;
        c.chunk.id = it->second.id;
        c.chunk.text = it->second.code_text;
        c.chunk.token_count = count_tokens(c.chunk.text);
        c.chunk.kind = ChunkKind::code_example;
        c.score = hit.score;
        c.matched_keyword = query;
        c.kind = ChunkKind::code_example;
        c.example = it->second;
        out.push_back(std::move(c));
    }
    order_candidates(out);
    return out;
}

std::vector<RetrievalCandidate> retrieve_fixed(const std::string& problem, const VectorIndex& index,
                                               const std::map<std::string, Chunk>& chunks, std::size_t top_n,
                                               const EmbeddingProvider& embed)
{
    if (trim(problem).empty()) throw ArgumentError("retrieve_fixed: empty problem");
    if (index.empty() || top_n == 0) return {};
    const auto vec = embed_or_throw(embed, {problem});
    std::vector<RetrievalCandidate> out;
    for (const auto& hit : index.search(vec.front(), top_n)) {
        auto it = chunks.find(hit.payload_id);
        if (it == chunks.end()) throw RetrievalError("index refers to unknown chunk '" + hit.payload_id + "'");
        RetrievalCandidate c;
        c.chunk = it->second;
        c.score = hit.score;
        c.kind = it->second.kind;
        out.push_back(std::move(c));
    }
    order_candidates(out);
    return out;
}

} // namespace chorus
