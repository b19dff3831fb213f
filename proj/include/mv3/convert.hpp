#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mv3/model.hpp"

namespace mv3 {

// One applied rewrite.  For ApiRename the (file, offset) pair locates the
// replaced bytes in the original text, so substitutions can be replayed;
// manifest fields are re-emitted through the serializer and carry
// field-level before/after text instead.
struct Substitution {
    enum class Kind { ManifestField, ApiRename };
    std::string file;
    int line = 0;
    Kind kind = Kind::ApiRename;
    std::string before;
    std::string after;
    std::string note;        // optional caveat (over-breadth, unmigrated arguments)
    std::size_t offset = 0;  // byte offset in the original file (ApiRename only)
};

struct Blocker {
    enum class Kind {
        RemoteCodeReference,
        StringCodeExecution,
        BlockingWebRequest,
        DomInBackground,
        CspUnconvertible,
    };
    Kind kind = Kind::RemoteCodeReference;
    std::string file;
    std::optional<int> line;
    std::string detail;
};

std::string_view to_string(Substitution::Kind kind);
std::string_view to_string(Blocker::Kind kind);

struct ConversionReport {
    enum class Status { Success, Fail };
    Status status = Status::Success;
    std::vector<Substitution> substitutions;
    std::vector<Blocker> blockers;
    std::size_t loc_changed = 0;
    std::vector<std::string> generated_files;
    bool manifest_valid = true;  // validate_v3 of the converted manifest was empty
};

// Result of the manifest-only step.  had_unsafe_eval records whether the V2
// CSP carried 'unsafe-eval'; whether that escalates to a blocker is decided
// by convert_package, which can see if eval is actually used.
struct ManifestConversion {
    Manifest manifest;
    std::vector<Substitution> substitutions;
    std::vector<Blocker> blockers;
    bool had_unsafe_eval = false;
};

ManifestConversion convert_manifest(const Manifest& m);

struct RewriteResult {
    std::string text;
    std::vector<Substitution> substitutions;
    std::vector<Blocker> blockers;
};

// Chain renames in code context only: chrome.browserAction -> chrome.action,
// the deprecated chrome.extension.* messaging subset -> chrome.runtime.*,
// chrome.tabs.executeScript/insertCSS -> chrome.scripting.*.
RewriteResult rewrite_api_calls(std::string_view source);

std::vector<Blocker> detect_blockers(const ExtensionPackage& pkg);

struct ConvertedPackage {
    ExtensionPackage package;
    ConversionReport report;
};

ConvertedPackage convert_package(const ExtensionPackage& pkg);

json conversion_report_to_json(const ConversionReport& report);

// Writes the converted file tree under out_dir (creating it).
void write_package_files(const ExtensionPackage& pkg, const std::filesystem::path& out_dir);

inline constexpr std::string_view kGeneratedWorkerName = "__generated_sw.js";

}  // namespace mv3
