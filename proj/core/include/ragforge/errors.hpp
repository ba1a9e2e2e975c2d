#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ragforge {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad input or a broken data invariant: duplicate ids, empty text,
// dimension mismatches, out-of-range config values.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Network-level failure talking to a remote endpoint. Retryable.
class TransportError : public Error {
public:
    using Error::Error;
};

// The model (or a replay script) violated the conversation protocol:
// empty assistant turn, unparseable tool payload, wrong message shape.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// A replay script had no entry left (or none matching) for a request.
class ScriptUnderrun : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

// Malformed file content. Messages name the offending line where known.
class ParseError : public Error {
public:
    using Error::Error;
};

// Final-answer markers missing or unbalanced in a model reply.
class ExtractionError : public Error {
public:
    using Error::Error;
};

// QA generation failed even after the corrective re-prompt. Keeps the raw
// model output for offline inspection.
class SynthesisError : public Error {
public:
    SynthesisError(const std::string& what, std::string raw_output)
        : Error(what), raw_output_(std::move(raw_output)) {}

    const std::string& raw_output() const { return raw_output_; }

private:
    std::string raw_output_;
};

// A pipeline stage could not run or could not complete.
class StageError : public Error {
public:
    using Error::Error;
};

}  // namespace ragforge
