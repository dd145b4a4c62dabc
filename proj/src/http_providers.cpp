#include <cmath>

#include <httplib.h>

#include <spdlog/spdlog.h>

#include "chorus/error.hpp"
#include "chorus/providers.hpp"

namespace chorus {

namespace {

using nlohmann::json;

struct SplitUrl {
    std::string origin; // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint url lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// One POST of a JSON body; returns the response body or throws ProviderError.
class JsonEndpoint {
public:
    explicit JsonEndpoint(const EndpointConfig& cfg)
        : cfg_(cfg), url_(split_url(cfg.url)), limiter_(cfg.max_in_flight)
    {
    }

    std::string post(const json& body) const
    {
        return limiter_.run([&] {
            httplib::Client client(url_.origin);
            const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
            client.set_connection_timeout(10, 0);
            client.set_read_timeout(secs, 0);
            client.set_write_timeout(secs, 0);
            httplib::Headers headers;
            if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
            auto res = client.Post(url_.path, headers, body.dump(), "application/json");
            if (!res) {
                throw ProviderError("request to " + cfg_.url + " failed: " + httplib::to_string(res.error()));
            }
            if (res->status < 200 || res->status >= 300) {
                throw ProviderError("request to " + cfg_.url + " returned status " + std::to_string(res->status) +
                                    ": " + res->body.substr(0, 512));
            }
            if (res->body.empty()) throw ProviderError("empty response body from " + cfg_.url);
            return res->body;
        });
    }

    const EndpointConfig& config() const { return cfg_; }

private:
    EndpointConfig cfg_;
    SplitUrl url_;
    InFlightLimiter limiter_;
};

json parse_body(const std::string& body)
{
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw ProviderError(std::string("undecodable provider response: ") + e.what());
    }
}

class HttpChat final : public ChatProvider {
public:
    explicit HttpChat(const EndpointConfig& cfg) : endpoint_(cfg) {}

    std::string complete(const ChatRequest& req) const override
    {
        validate_request(req);
        return parse_chat_response(endpoint_.post(chat_request_body(req, endpoint_.config().model)));
    }

    std::string model_name() const override { return endpoint_.config().model; }

private:
    JsonEndpoint endpoint_;
};

class HttpEmbedder final : public EmbeddingProvider {
public:
    explicit HttpEmbedder(const EndpointConfig& cfg) : endpoint_(cfg) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const override
    {
        if (texts.empty()) throw ArgumentError("embed: empty input list");
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (texts[i].empty()) throw ArgumentError("embed: input " + std::to_string(i) + " is empty");
        }
        json body{{"model", endpoint_.config().model}, {"input", texts}};
        return parse_embedding_response(endpoint_.post(body), texts.size());
    }

    std::string model_name() const override { return endpoint_.config().model; }

private:
    JsonEndpoint endpoint_;
};

class HttpReranker final : public RerankProvider {
public:
    explicit HttpReranker(const EndpointConfig& cfg) : endpoint_(cfg) {}

    std::vector<RerankScore> rerank(const std::string& query,
                                    const std::vector<RerankCandidate>& candidates) const override
    {
        if (candidates.empty()) throw ArgumentError("rerank: empty candidate list");
        json docs = json::array();
        for (const auto& c : candidates) docs.push_back(c.text);
        json body{{"model", endpoint_.config().model}, {"query", query}, {"documents", docs}};
        const auto scores = parse_rerank_response(endpoint_.post(body), candidates.size());
        std::vector<RerankScore> out;
        out.reserve(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back({candidates[i].id, scores[i]});
        return out;
    }

    std::string model_name() const override { return endpoint_.config().model; }

private:
    JsonEndpoint endpoint_;
};

} // namespace

json chat_request_body(const ChatRequest& req, const std::string& model)
{
    json messages = json::array();
    for (const auto& m : req.messages) {
        messages.push_back({{"role", m.role == Role::system ? "system" : "user"}, {"content", m.content}});
    }
    json body{{"model", model}, {"messages", messages}, {"temperature", req.temperature}};
    if (req.structured_schema_hint) {
        body["response_format"] = {
            {"type", "json_schema"},
            {"json_schema", {{"name", "structured_response"}, {"schema", *req.structured_schema_hint}}}};
    }
    return body;
}

std::string parse_chat_response(const std::string& body)
{
    const auto doc = parse_body(body);
    try {
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw ProviderError("chat response content is not a string");
        auto text = content.get<std::string>();
        if (text.empty()) throw ProviderError("chat response content is empty");
        return text;
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed chat response: ") + e.what());
    }
}

std::vector<EmbeddingVector> parse_embedding_response(const std::string& body, std::size_t expected)
{
    const auto doc = parse_body(body);
    const json& items = doc.is_object() && doc.contains("data") ? doc.at("data") : doc;
    if (!items.is_array() || items.size() != expected) {
        throw ProviderError("embedding response holds " + std::to_string(items.is_array() ? items.size() : 0) +
                            " items, expected " + std::to_string(expected));
    }
    std::vector<EmbeddingVector> out(expected);
    std::vector<bool> seen(expected, false);
    try {
        for (const auto& item : items) {
            const auto idx = item.at("index").get<std::size_t>();
            if (idx >= expected || seen[idx]) throw ProviderError("embedding response index out of range or repeated");
            seen[idx] = true;
            out[idx] = item.at("embedding").get<EmbeddingVector>();
        }
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed embedding response: ") + e.what());
    }
    const auto dim = out.front().size();
    for (const auto& v : out) {
        if (v.size() != dim || dim == 0) throw ProviderError("embedding dimension mismatch within one batch");
        for (double x : v) {
            if (!std::isfinite(x)) throw ProviderError("embedding contains a non-finite value");
        }
    }
    return out;
}

std::vector<double> parse_rerank_response(const std::string& body, std::size_t expected)
{
    const auto doc = parse_body(body);
    const json& items = doc.is_object() && doc.contains("results") ? doc.at("results") : doc;
    if (!items.is_array() || items.size() != expected) {
        throw ProviderError("rerank response holds a different number of scores than candidates");
    }
    std::vector<double> scores(expected, 0.0);
    std::vector<bool> seen(expected, false);
    try {
        for (const auto& item : items) {
            const auto idx = item.at("index").get<std::size_t>();
            if (idx >= expected || seen[idx]) throw ProviderError("rerank response index out of range or repeated");
            seen[idx] = true;
            scores[idx] = item.at("relevance_score").get<double>();
        }
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed rerank response: ") + e.what());
    }
    return scores;
}

std::shared_ptr<ChatProvider> make_http_chat(const EndpointConfig& cfg)
{
    spdlog::debug("chat endpoint {} model {}", cfg.url, cfg.model);
    return std::make_shared<HttpChat>(cfg);
}

std::shared_ptr<EmbeddingProvider> make_http_embedder(const EndpointConfig& cfg)
{
    return std::make_shared<HttpEmbedder>(cfg);
}

std::shared_ptr<RerankProvider> make_http_reranker(const EndpointConfig& cfg)
{
    return std::make_shared<HttpReranker>(cfg);
}

} // namespace chorus
