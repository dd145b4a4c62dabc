#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace chorus {

/// Root of every exception thrown by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (empty input, bad sizes, unknown id).
class ArgumentError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    using Error::Error;
};

class ManifestError : public Error {
public:
    ManifestError(std::size_t entry_index, const std::string& what)
        : Error("manifest entry " + std::to_string(entry_index) + ": " + what),
          entry_index_(entry_index) {}

    std::size_t entry_index() const noexcept { return entry_index_; }

private:
    std::size_t entry_index_;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class PersistenceError : public Error {
public:
    using Error::Error;
};

class MetadataError : public Error {
public:
    MetadataError(const std::string& what, std::string raw_response)
        : Error(what), raw_response_(std::move(raw_response)) {}

    const std::string& raw_response() const noexcept { return raw_response_; }

private:
    std::string raw_response_;
};

class RetrievalError : public Error {
public:
    using Error::Error;
};

class RerankError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Structured response failed validation; the message names the defect.
class ParseError : public Error {
public:
    using Error::Error;
};

class GenerationError : public Error {
public:
    GenerationError(const std::string& what, std::vector<std::string> attempts)
        : Error(what), attempts_(std::move(attempts)) {}

    /// Raw text of every attempt, in order.
    const std::vector<std::string>& attempts() const noexcept { return attempts_; }

private:
    std::vector<std::string> attempts_;
};

class HarnessError : public Error {
public:
    using Error::Error;
};

} // namespace chorus
