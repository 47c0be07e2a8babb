#pragma once

#include <stdexcept>
#include <string>

namespace mufu {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument values or broken type invariants.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed input files; messages name the offending row/file.
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// A score map or output set does not cover a required key.
class CoverageError : public Error {
public:
    using Error::Error;
};

// Fewer candidates available than requested.
class InsufficientCandidatesError : public Error {
public:
    using Error::Error;
};

// Request never produced a usable response; carries the attempt history.
class TransportError : public Error {
public:
    using Error::Error;
};

// Endpoint answered with a non-2xx status and a parseable body.
class EndpointError : public Error {
public:
    using Error::Error;
};

// A pipeline stage ran without its upstream manifest.
class DependencyError : public Error {
public:
    using Error::Error;
};

} // namespace mufu
