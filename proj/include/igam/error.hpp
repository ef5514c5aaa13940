#pragma once

#include <stdexcept>
#include <string>

namespace igam {

// Error taxonomy shared by every module. The CLI and the HTTP service map
// these onto exit codes / status codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

// Missing columns, unknown feature names, bad flag combinations.
class ConfigurationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "configuration"; }
};

// A cell or file that could not be parsed.
class IngestionError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ingestion"; }
};

// Inputs that parsed fine but violate a precondition.
class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

// Numerical failure, e.g. a singular normal-equation system.
class SolverError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "solver"; }
};

// Corrupt or truncated model document.
class FormatError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "format"; }
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
    const char* kind() const noexcept override { return "version"; }
};

} // namespace igam
