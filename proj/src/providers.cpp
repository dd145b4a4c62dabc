#include "chorus/providers.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "chorus/digest.hpp"
#include "chorus/error.hpp"
#include "chorus/tokenizer.hpp"

namespace chorus {

void validate_request(const ChatRequest& req)
{
    bool has_user = false;
    for (const auto& m : req.messages) has_user = has_user || m.role == Role::user;
    if (!has_user) throw ArgumentError("chat request needs at least one user message");
    if (!(req.temperature >= 0.0)) throw ArgumentError("chat temperature must be >= 0");
}

EmbeddingVector EmbeddingProvider::embed_one(const std::string& text) const
{
    auto out = embed({text});
    if (out.size() != 1) throw ProviderError("embedding provider returned " + std::to_string(out.size()) +
                                             " vectors for one input");
    return std::move(out.front());
}

InFlightLimiter::InFlightLimiter(std::ptrdiff_t limit)
    : sem_(limit < 1 ? 1 : limit)
{
}

// ---------------------------------------------------------------------------

HashEmbedder::HashEmbedder(std::size_t dimension)
    : dimension_(dimension)
{
    if (dimension_ == 0) throw ArgumentError("embedding dimension must be positive");
}

std::size_t HashEmbedder::bucket(std::string_view token) const
{
    std::string lower(token);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return static_cast<std::size_t>(fnv1a64(lower) % dimension_);
}

std::vector<EmbeddingVector> HashEmbedder::embed(const std::vector<std::string>& texts) const
{
    if (texts.empty()) throw ArgumentError("embed: empty input list");
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto tokens = tokenize(texts[i]);
        if (tokens.empty()) throw ArgumentError("embed: input " + std::to_string(i) + " has no tokens");
        EmbeddingVector v(dimension_, 0.0);
        for (auto tok : tokens) v[bucket(tok)] += 1.0;
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<RerankScore> OverlapReranker::rerank(const std::string& query,
                                                 const std::vector<RerankCandidate>& candidates) const
{
    if (candidates.empty()) throw ArgumentError("rerank: empty candidate list");
    const auto q = word_terms(query);
    const std::set<std::string> query_terms(q.begin(), q.end());
    std::vector<RerankScore> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        const auto t = word_terms(c.text);
        const std::set<std::string> cand_terms(t.begin(), t.end());
        std::size_t shared = 0;
        for (const auto& term : query_terms) shared += cand_terms.count(term);
        const double score =
            query_terms.empty() ? 0.0 : static_cast<double>(shared) / static_cast<double>(query_terms.size());
        out.push_back({c.id, score});
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string MockChatProvider::digest(const ChatRequest& req)
{
    std::string buf;
    for (const auto& m : req.messages) {
        buf += m.role == Role::system ? "system\x1f" : "user\x1f";
        buf += m.content;
        buf += '\x1e';
    }
    return hex_digest(buf);
}

void MockChatProvider::set_fixture(const std::string& digest, std::string response)
{
    std::lock_guard lock(mu_);
    fixtures_[digest] = std::move(response);
}

void MockChatProvider::enqueue(std::string response)
{
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(response));
}

void MockChatProvider::set_responder(Responder responder)
{
    std::lock_guard lock(mu_);
    responder_ = std::move(responder);
}

void MockChatProvider::set_unavailable(bool down)
{
    std::lock_guard lock(mu_);
    down_ = down;
}

std::string MockChatProvider::complete(const ChatRequest& req) const
{
    validate_request(req);
    Responder responder;
    {
        std::lock_guard lock(mu_);
        log_.push_back(req);
        if (down_) throw ProviderError("mock chat provider unavailable");
        if (auto it = fixtures_.find(digest(req)); it != fixtures_.end()) return it->second;
        if (!queue_.empty()) {
            auto text = std::move(queue_.front());
            queue_.pop_front();
            return text;
        }
        responder = responder_;
    }
    if (responder) {
        if (auto text = responder(req)) {
            if (text->empty()) throw ProviderError("mock chat provider returned an empty response");
            return *text;
        }
    }
    throw ProviderError("mock chat provider has no response for prompt digest " + digest(req));
}

std::size_t MockChatProvider::call_count() const
{
    std::lock_guard lock(mu_);
    return log_.size();
}

std::vector<ChatRequest> MockChatProvider::requests() const
{
    std::lock_guard lock(mu_);
    return log_;
}

std::shared_ptr<MockChatProvider> load_chat_fixtures(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open chat fixture file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("chat fixture file " + path + ": " + e.what());
    }
    auto mock = std::make_shared<MockChatProvider>();
    if (auto it = doc.find("responses"); it != doc.end()) {
        for (const auto& [key, value] : it->items()) mock->set_fixture(key, value.get<std::string>());
    }
    std::vector<std::pair<std::string, std::string>> rules;
    std::optional<std::string> fallback;
    try {
        if (auto it = doc.find("rules"); it != doc.end()) {
            for (const auto& r : *it) {
                rules.emplace_back(r.at("contains").get<std::string>(), r.at("response").get<std::string>());
            }
        }
        if (auto it = doc.find("default"); it != doc.end()) fallback = it->get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("chat fixture file " + path + ": " + e.what());
    }
    if (!rules.empty() || fallback) {
        mock->set_responder([rules, fallback](const ChatRequest& req) -> std::optional<std::string> {
            for (const auto& [needle, response] : rules) {
                for (const auto& m : req.messages) {
                    if (m.content.find(needle) != std::string::npos) return response;
                }
            }
            return fallback;
        });
    }
    return mock;
}

} // namespace chorus
