#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace chorus {

enum class Role { system, user };

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    /// JSON schema requesting a fielded response; absent for free text.
    std::optional<nlohmann::json> structured_schema_hint;
};

/// Throws ArgumentError unless the request has a user message and temperature >= 0.
void validate_request(const ChatRequest& req);

using EmbeddingVector = std::vector<double>;

struct RerankScore {
    std::string candidate_id;
    double score = 0.0;
};

struct RerankCandidate {
    std::string id;
    std::string text;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string complete(const ChatRequest& req) const = 0;
    virtual std::string model_name() const = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    /// One vector per input, order-preserving, uniform dimension.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const = 0;
    virtual std::string model_name() const = 0;

    EmbeddingVector embed_one(const std::string& text) const;
};

class RerankProvider {
public:
    virtual ~RerankProvider() = default;
    /// Exactly one score per candidate, ids bijective to the input ids.
    virtual std::vector<RerankScore> rerank(const std::string& query,
                                            const std::vector<RerankCandidate>& candidates) const = 0;
    virtual std::string model_name() const = 0;
};

/// Caps concurrent requests to one provider.
class InFlightLimiter {
public:
    explicit InFlightLimiter(std::ptrdiff_t limit);

    template <class F>
    auto run(F&& f) const
    {
        sem_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{sem_};
        return f();
    }

private:
    mutable std::counting_semaphore<> sem_;
};

// ---------------------------------------------------------------------------
// Deterministic offline providers
// ---------------------------------------------------------------------------

/// Hashed bag-of-words, L2-normalized. Tokens are the tokenizer's output,
/// lower-cased; each lands in bucket fnv1a64(token) % dimension.
class HashEmbedder final : public EmbeddingProvider {
public:
    explicit HashEmbedder(std::size_t dimension = 64);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const override;
    std::string model_name() const override { return "mock-hash-" + std::to_string(dimension_); }

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t bucket(std::string_view token) const;

private:
    std::size_t dimension_;
};

/// Fraction of the query's distinct word terms that also occur in the candidate.
class OverlapReranker final : public RerankProvider {
public:
    std::vector<RerankScore> rerank(const std::string& query,
                                    const std::vector<RerankCandidate>& candidates) const override;
    std::string model_name() const override { return "mock-overlap"; }
};

/// Fixture table keyed by prompt digest, with a FIFO of sequential responses
/// and an optional responder consulted last. Thread-safe.
class MockChatProvider final : public ChatProvider {
public:
    using Responder = std::function<std::optional<std::string>(const ChatRequest&)>;

    static std::string digest(const ChatRequest& req);

    void set_fixture(const std::string& digest, std::string response);
    void enqueue(std::string response);
    void set_responder(Responder responder);
    /// Makes every call fail with ProviderError.
    void set_unavailable(bool down);

    std::string complete(const ChatRequest& req) const override;
    std::string model_name() const override { return "mock-chat"; }

    std::size_t call_count() const;
    std::vector<ChatRequest> requests() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> fixtures_;
    mutable std::deque<std::string> queue_;
    Responder responder_;
    bool down_ = false;
    mutable std::vector<ChatRequest> log_;
};

/// Loads {"responses": {digest: text}, "rules": [{"contains": s, "response": text}], "default": text}.
/// Rules match on any message content, first match wins; "default" answers the rest.
std::shared_ptr<MockChatProvider> load_chat_fixtures(const std::string& path);

// ---------------------------------------------------------------------------
// HTTP clients
// ---------------------------------------------------------------------------

struct EndpointConfig {
    std::string url;
    std::string model;
    std::string api_key;
    std::ptrdiff_t max_in_flight = 4;
    double timeout_seconds = 120.0;
};

/// Chat-completions-compatible endpoint; returns choices[0].message.content.
std::shared_ptr<ChatProvider> make_http_chat(const EndpointConfig& cfg);
/// POST {model, input:[...]}; reads [{index, embedding}] (bare or under "data").
std::shared_ptr<EmbeddingProvider> make_http_embedder(const EndpointConfig& cfg);
/// POST {model, query, documents:[...]}; reads [{index, relevance_score}] (bare or under "results").
std::shared_ptr<RerankProvider> make_http_reranker(const EndpointConfig& cfg);

// Wire helpers, exposed for tests.
nlohmann::json chat_request_body(const ChatRequest& req, const std::string& model);
std::string parse_chat_response(const std::string& body);
std::vector<EmbeddingVector> parse_embedding_response(const std::string& body, std::size_t expected);
std::vector<double> parse_rerank_response(const std::string& body, std::size_t expected);

} // namespace chorus
