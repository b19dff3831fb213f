#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mv3 {

// Base class for all toolkit errors. Subclasses match the error names used
// throughout the module contracts so call sites can catch selectively.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class MissingManifest : public Error {
public:
    explicit MissingManifest(const std::string& what) : Error(what) {}
};

class MalformedArchive : public Error {
public:
    explicit MalformedArchive(const std::string& what) : Error(what) {}
};

class ManifestParseError : public Error {
public:
    explicit ManifestParseError(const std::string& what) : Error(what) {}
};

class WrongVersion : public Error {
public:
    explicit WrongVersion(const std::string& what) : Error(what) {}
};

class MalformedUrl : public Error {
public:
    explicit MalformedUrl(const std::string& what) : Error(what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

// Non-fatal diagnostics. Operations that are total (lexing, filter parsing,
// package loading) collect these instead of throwing.
struct Warning {
    std::string code;                 // stable machine-readable tag, e.g. "duplicate_key"
    std::string message;              // human-readable detail
    std::string file;                 // optional path context
    std::optional<int> line;          // optional 1-based line context

    bool operator==(const Warning&) const = default;
};

using Warnings = std::vector<Warning>;

}  // namespace mv3
