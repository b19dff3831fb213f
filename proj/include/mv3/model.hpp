#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mv3/errors.hpp"

namespace mv3 {

using json = nlohmann::ordered_json;

// Chrome extension identifier: exactly 32 characters over 'a'..'p'.
struct ExtensionId {
    std::string value;

    static bool is_valid(std::string_view s);
    // Deterministic placeholder for local packages without a store id:
    // a 128-bit content hash mapped into the 'a'..'p' alphabet.
    static ExtensionId from_content_hash(const std::map<std::string, std::string>& files);

    bool operator==(const ExtensionId&) const = default;
};

struct BackgroundSpec {
    enum class Kind { None, Scripts, Page, ServiceWorker };
    Kind kind = Kind::None;
    std::vector<std::string> scripts;  // Kind::Scripts
    std::string entry;                 // Kind::Page / Kind::ServiceWorker

    bool operator==(const BackgroundSpec&) const = default;
};

struct CspSpec {
    enum class Kind { Absent, V2String, V3Object };
    Kind kind = Kind::Absent;
    std::string v2_value;
    // V3 object entries in declaration order, e.g. {"extension_pages", "script-src 'self'"}.
    std::vector<std::pair<std::string, std::string>> v3_values;

    const std::string* v3_value(std::string_view key) const;

    bool operator==(const CspSpec&) const = default;
};

struct WarEntry {
    std::vector<std::string> resources;
    std::vector<std::string> matches;

    bool operator==(const WarEntry&) const = default;
};

struct WarSpec {
    enum class Kind { Absent, V2List, V3List };
    Kind kind = Kind::Absent;
    std::vector<std::string> v2_resources;
    std::vector<WarEntry> v3_entries;

    bool operator==(const WarSpec&) const = default;
};

struct ContentScript {
    std::vector<std::string> matches;
    std::vector<std::string> js;
    std::vector<std::string> css;

    bool operator==(const ContentScript&) const = default;
};

struct SandboxSpec {
    std::vector<std::string> pages;
    std::optional<std::string> content_security_policy;

    bool operator==(const SandboxSpec&) const = default;
};

enum class ActionKind { None, BrowserAction, PageAction, Action };

std::string_view action_kind_key(ActionKind kind);

// Typed view of the manifest fields the toolkit cares about.  Anything else
// is carried in raw_extra verbatim so re-serialization stays honest.
struct Manifest {
    int manifest_version = 2;
    std::string name;
    std::string version;
    std::vector<std::string> permissions;
    std::vector<std::string> host_permissions;  // V3 only
    BackgroundSpec background;
    ActionKind action_kind = ActionKind::None;
    json action_payload = json::object();
    CspSpec content_security_policy;
    WarSpec web_accessible_resources;
    std::vector<ContentScript> content_scripts;
    std::optional<SandboxSpec> sandbox;
    json raw_extra = json::object();

    bool operator==(const Manifest&) const = default;
};

struct Violation {
    std::string field;  // manifest field name
    std::string value;  // offending value
    std::string rule;   // violated rule, human readable

    bool operator==(const Violation&) const = default;
};

// An unpacked extension.  Immutable after construction; loading distinct
// packages concurrently is safe.
struct ExtensionPackage {
    ExtensionId id;
    std::string version;
    std::map<std::string, std::string> files;  // normalized relative path -> bytes
    Manifest manifest;
};

Manifest parse_manifest(std::string_view text, Warnings* warnings = nullptr);

// Stable re-serialization: typed fields in fixed order, raw_extra appended
// in original key order, 2-space indent.
std::string serialize_manifest(const Manifest& m);
json manifest_to_json(const Manifest& m);

// V3 well-formedness check.  Empty result means the manifest satisfies all
// V3 invariants (service-worker background, object CSP restricted to the
// allowed source set with no unsafe-eval, object-form WAR with non-empty
// matches, no match patterns left in permissions).
std::vector<Violation> validate_v3(const Manifest& m);

// Loads an unpacked directory or a .zip archive.  The id comes from the
// directory/archive name when that is a well-formed extension id, otherwise
// from the content hash.
ExtensionPackage load_package(const std::filesystem::path& root, Warnings* warnings = nullptr);

bool is_match_pattern(std::string_view permission);

}  // namespace mv3
