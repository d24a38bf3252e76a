#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ragonite {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// corpus
class EmptyDocument : public Error {
public:
    explicit EmptyDocument(const std::string& url)
        : Error("document has no extractable text: " + url), url_(url) {}
    const std::string& url() const noexcept { return url_; }

private:
    std::string url_;
};

class HeaderArityMismatch : public Error {
public:
    HeaderArityMismatch(std::size_t headers, std::size_t cells)
        : Error("table row has " + std::to_string(cells) + " cells but only " +
                std::to_string(headers) + " headers") {}
};

class ManifestMissing : public Error {
public:
    using Error::Error;
};

class ManifestInvalid : public Error {
public:
    using Error::Error;
};

// retrieval / providers
class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t got)
        : Error("embedding dimension mismatch: expected " + std::to_string(expected) +
                ", got " + std::to_string(got)) {}
};

/// A model provider call failed. `retryable` marks transport-level or 5xx/429 failures.
class ProviderFailure : public Error {
public:
    ProviderFailure(std::string provider, const std::string& what, bool retryable = false)
        : Error(provider + ": " + what), provider_(std::move(provider)), retryable_(retryable) {}
    const std::string& provider() const noexcept { return provider_; }
    bool retryable() const noexcept { return retryable_; }

private:
    std::string provider_;
    bool retryable_;
};

class ContextOverflow : public Error {
public:
    explicit ContextOverflow(std::size_t evidences_that_fit)
        : Error("prompt exceeds the model context window; " + std::to_string(evidences_that_fit) +
                " evidence(s) fit"),
          fit_(evidences_that_fit) {}
    std::size_t evidences_that_fit() const noexcept { return fit_; }

private:
    std::size_t fit_;
};

class UnparseableVerdict : public Error {
public:
    explicit UnparseableVerdict(const std::string& raw)
        : Error("judge verdict could not be parsed: " + raw) {}
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class PreconditionViolation : public Error {
public:
    using Error::Error;
};

// attribution
class AttributionFailed : public Error {
public:
    using Error::Error;
};

// evaluation
class SchemaViolation : public Error {
public:
    using Error::Error;
};

// conversation / service
class UnknownTurn : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class Conflict : public Error {
public:
    using Error::Error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

/// The store file is unreadable, corrupt, or from an unsupported schema version.
class CorruptStore : public Error {
public:
    CorruptStore(const std::string& what, const std::string& hint)
        : Error(what + " (hint: " + hint + ")"), hint_(hint) {}
    const std::string& hint() const noexcept { return hint_; }

private:
    std::string hint_;
};

}  // namespace ragonite
