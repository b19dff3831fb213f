#include "mv3/model.hpp"

#include <cstdint>
#include <fstream>
#include <set>

#include "mv3/csp.hpp"
#include "mv3/zip.hpp"

namespace fs = std::filesystem;

namespace mv3 {

namespace {

[[noreturn]] void fail(const std::string& message) { throw ManifestParseError(message); }

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read file: " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<std::string> string_array(const json& v, const char* field) {
    if (!v.is_array()) fail(std::string(field) + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) fail(std::string(field) + " entries must be strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

// Syntax-only pass that records duplicate object keys; the ordered parse
// below keeps the last occurrence, matching common JSON parser behavior.
void detect_duplicate_keys(std::string_view text, Warnings* warnings) {
    std::vector<std::set<std::string>> stack;
    nlohmann::json::parser_callback_t cb = [&](int /*depth*/, nlohmann::json::parse_event_t event,
                                               nlohmann::json& parsed) {
        using event_t = nlohmann::json::parse_event_t;
        if (event == event_t::object_start) {
            stack.emplace_back();
        } else if (event == event_t::object_end) {
            stack.pop_back();
        } else if (event == event_t::key) {
            const auto key = parsed.get<std::string>();
            if (!stack.empty() && !stack.back().insert(key).second && warnings != nullptr)
                warnings->push_back(Warning{"duplicate_key",
                                            "duplicate key '" + key +
                                                "' in manifest.json: last occurrence wins",
                                            "manifest.json", std::nullopt});
        }
        return true;
    };
    [[maybe_unused]] const auto parsed = nlohmann::json::parse(text, cb);
}

BackgroundSpec parse_background(const json& bg, int version) {
    if (!bg.is_object()) fail("background must be an object");
    BackgroundSpec spec;
    const bool has_scripts = bg.contains("scripts");
    const bool has_page = bg.contains("page");
    const bool has_sw = bg.contains("service_worker");
    if (version == 2) {
        if (has_sw) fail("background.service_worker requires manifest_version 3");
        if (has_scripts && has_page) fail("background declares both scripts and page");
        if (has_scripts) {
            spec.kind = BackgroundSpec::Kind::Scripts;
            spec.scripts = string_array(bg["scripts"], "background.scripts");
        } else if (has_page) {
            if (!bg["page"].is_string()) fail("background.page must be a string");
            spec.kind = BackgroundSpec::Kind::Page;
            spec.entry = bg["page"].get<std::string>();
        }
    } else {
        if (has_scripts || has_page)
            fail("manifest_version 3 background must declare a single service_worker");
        if (has_sw) {
            if (!bg["service_worker"].is_string())
                fail("background.service_worker must be a string");
            spec.kind = BackgroundSpec::Kind::ServiceWorker;
            spec.entry = bg["service_worker"].get<std::string>();
        }
    }
    return spec;
}

CspSpec parse_csp(const json& v, int version) {
    CspSpec spec;
    if (version == 2) {
        if (!v.is_string())
            fail("content_security_policy must be a string in manifest_version 2");
        spec.kind = CspSpec::Kind::V2String;
        spec.v2_value = v.get<std::string>();
    } else {
        if (!v.is_object())
            fail("content_security_policy must be an object in manifest_version 3");
        spec.kind = CspSpec::Kind::V3Object;
        for (const auto& [key, val] : v.items()) {
            if (!val.is_string()) fail("content_security_policy." + key + " must be a string");
            spec.v3_values.emplace_back(key, val.get<std::string>());
        }
    }
    return spec;
}

WarSpec parse_war(const json& v, int version) {
    if (!v.is_array()) fail("web_accessible_resources must be an array");
    WarSpec spec;
    if (version == 2) {
        spec.kind = WarSpec::Kind::V2List;
        spec.v2_resources = string_array(v, "web_accessible_resources");
    } else {
        spec.kind = WarSpec::Kind::V3List;
        for (const auto& e : v) {
            if (!e.is_object())
                fail("web_accessible_resources entries must be objects in manifest_version 3");
            WarEntry entry;
            if (e.contains("resources"))
                entry.resources = string_array(e["resources"], "web_accessible_resources.resources");
            if (e.contains("matches"))
                entry.matches = string_array(e["matches"], "web_accessible_resources.matches");
            if (entry.resources.empty() || entry.matches.empty())
                fail("web_accessible_resources entries need non-empty resources and matches");
            spec.v3_entries.push_back(std::move(entry));
        }
    }
    return spec;
}

std::vector<ContentScript> parse_content_scripts(const json& v) {
    if (!v.is_array()) fail("content_scripts must be an array");
    std::vector<ContentScript> out;
    for (const auto& e : v) {
        if (!e.is_object()) fail("content_scripts entries must be objects");
        ContentScript cs;
        if (e.contains("matches")) cs.matches = string_array(e["matches"], "content_scripts.matches");
        if (e.contains("js")) cs.js = string_array(e["js"], "content_scripts.js");
        if (e.contains("css")) cs.css = string_array(e["css"], "content_scripts.css");
        out.push_back(std::move(cs));
    }
    return out;
}

SandboxSpec parse_sandbox(const json& v) {
    if (!v.is_object()) fail("sandbox must be an object");
    SandboxSpec sandbox;
    if (v.contains("pages")) sandbox.pages = string_array(v["pages"], "sandbox.pages");
    if (v.contains("content_security_policy")) {
        if (!v["content_security_policy"].is_string())
            fail("sandbox.content_security_policy must be a string");
        sandbox.content_security_policy = v["content_security_policy"].get<std::string>();
    }
    return sandbox;
}

const std::set<std::string>& recognized_fields() {
    static const std::set<std::string> fields = {
        "manifest_version", "name",           "version",
        "permissions",      "host_permissions", "background",
        "browser_action",   "page_action",    "action",
        "content_security_policy", "web_accessible_resources",
        "content_scripts",  "sandbox",
    };
    return fields;
}

}  // namespace

std::string_view action_kind_key(ActionKind kind) {
    switch (kind) {
        case ActionKind::BrowserAction: return "browser_action";
        case ActionKind::PageAction: return "page_action";
        case ActionKind::Action: return "action";
        case ActionKind::None: return "";
    }
    return "";
}

const std::string* CspSpec::v3_value(std::string_view key) const {
    for (const auto& [k, v] : v3_values)
        if (k == key) return &v;
    return nullptr;
}

bool ExtensionId::is_valid(std::string_view s) {
    if (s.size() != 32) return false;
    for (char c : s)
        if (c < 'a' || c > 'p') return false;
    return true;
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view data) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

ExtensionId ExtensionId::from_content_hash(const std::map<std::string, std::string>& files) {
    std::uint64_t h1 = 0xcbf29ce484222325ULL;
    std::uint64_t h2 = 0x9e3779b97f4a7c15ULL;
    for (const auto& [path, content] : files) {
        h1 = fnv1a(fnv1a(h1, path), std::string_view("\0", 1));
        h1 = fnv1a(h1, content);
        h2 = fnv1a(fnv1a(h2, content), std::string_view("\0", 1));
        h2 = fnv1a(h2, path);
    }
    std::string id;
    id.reserve(32);
    for (int i = 15; i >= 0; --i) id.push_back(static_cast<char>('a' + ((h1 >> (4 * i)) & 0xf)));
    for (int i = 15; i >= 0; --i) id.push_back(static_cast<char>('a' + ((h2 >> (4 * i)) & 0xf)));
    return ExtensionId{std::move(id)};
}

Manifest parse_manifest(std::string_view text, Warnings* warnings) {
    json root;
    try {
        detect_duplicate_keys(text, warnings);
        root = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) fail("manifest root must be a JSON object");

    if (!root.contains("manifest_version")) fail("manifest_version is required");
    const json& mv = root["manifest_version"];
    if (!mv.is_number_integer()) fail("manifest_version must be the integer 2 or 3");
    const int version = mv.get<int>();
    if (version != 2 && version != 3) fail("manifest_version must be 2 or 3");

    Manifest m;
    m.manifest_version = version;
    if (root.contains("name")) {
        if (!root["name"].is_string()) fail("name must be a string");
        m.name = root["name"].get<std::string>();
    }
    if (root.contains("version")) {
        if (!root["version"].is_string()) fail("version must be a string");
        m.version = root["version"].get<std::string>();
    }
    if (root.contains("permissions"))
        m.permissions = string_array(root["permissions"], "permissions");
    if (root.contains("host_permissions")) {
        if (version == 2) fail("host_permissions is not valid in manifest_version 2");
        m.host_permissions = string_array(root["host_permissions"], "host_permissions");
    }
    if (root.contains("background")) m.background = parse_background(root["background"], version);

    const int action_fields = static_cast<int>(root.contains("browser_action")) +
                              static_cast<int>(root.contains("page_action")) +
                              static_cast<int>(root.contains("action"));
    if (action_fields > 1) fail("manifest declares more than one action field");
    if (root.contains("action")) {
        if (version == 2) fail("action requires manifest_version 3");
        if (!root["action"].is_object()) fail("action must be an object");
        m.action_kind = ActionKind::Action;
        m.action_payload = root["action"];
    } else if (root.contains("browser_action") || root.contains("page_action")) {
        if (version == 3) fail("browser_action/page_action are not valid in manifest_version 3");
        const char* key = root.contains("browser_action") ? "browser_action" : "page_action";
        if (!root[key].is_object()) fail(std::string(key) + " must be an object");
        m.action_kind =
            root.contains("browser_action") ? ActionKind::BrowserAction : ActionKind::PageAction;
        m.action_payload = root[key];
    }

    if (root.contains("content_security_policy"))
        m.content_security_policy = parse_csp(root["content_security_policy"], version);
    if (root.contains("web_accessible_resources"))
        m.web_accessible_resources = parse_war(root["web_accessible_resources"], version);
    if (root.contains("content_scripts"))
        m.content_scripts = parse_content_scripts(root["content_scripts"]);
    if (root.contains("sandbox")) m.sandbox = parse_sandbox(root["sandbox"]);

    for (const auto& [key, value] : root.items())
        if (recognized_fields().count(key) == 0) m.raw_extra[key] = value;

    return m;
}

json manifest_to_json(const Manifest& m) {
    json j = json::object();
    j["manifest_version"] = m.manifest_version;
    if (!m.name.empty()) j["name"] = m.name;
    if (!m.version.empty()) j["version"] = m.version;
    if (!m.permissions.empty()) j["permissions"] = m.permissions;
    if (!m.host_permissions.empty()) j["host_permissions"] = m.host_permissions;

    switch (m.background.kind) {
        case BackgroundSpec::Kind::None: break;
        case BackgroundSpec::Kind::Scripts:
            j["background"] = json{{"scripts", m.background.scripts}};
            break;
        case BackgroundSpec::Kind::Page:
            j["background"] = json{{"page", m.background.entry}};
            break;
        case BackgroundSpec::Kind::ServiceWorker:
            j["background"] = json{{"service_worker", m.background.entry}};
            break;
    }

    if (m.action_kind != ActionKind::None)
        j[std::string(action_kind_key(m.action_kind))] = m.action_payload;

    switch (m.content_security_policy.kind) {
        case CspSpec::Kind::Absent: break;
        case CspSpec::Kind::V2String:
            j["content_security_policy"] = m.content_security_policy.v2_value;
            break;
        case CspSpec::Kind::V3Object: {
            json obj = json::object();
            for (const auto& [k, v] : m.content_security_policy.v3_values) obj[k] = v;
            j["content_security_policy"] = std::move(obj);
            break;
        }
    }

    switch (m.web_accessible_resources.kind) {
        case WarSpec::Kind::Absent: break;
        case WarSpec::Kind::V2List:
            j["web_accessible_resources"] = m.web_accessible_resources.v2_resources;
            break;
        case WarSpec::Kind::V3List: {
            json arr = json::array();
            for (const WarEntry& e : m.web_accessible_resources.v3_entries)
                arr.push_back(json{{"resources", e.resources}, {"matches", e.matches}});
            j["web_accessible_resources"] = std::move(arr);
            break;
        }
    }

    if (!m.content_scripts.empty()) {
        json arr = json::array();
        for (const ContentScript& cs : m.content_scripts) {
            json e = json::object();
            if (!cs.matches.empty()) e["matches"] = cs.matches;
            if (!cs.js.empty()) e["js"] = cs.js;
            if (!cs.css.empty()) e["css"] = cs.css;
            arr.push_back(std::move(e));
        }
        j["content_scripts"] = std::move(arr);
    }

    if (m.sandbox.has_value()) {
        json s = json::object();
        if (!m.sandbox->pages.empty()) s["pages"] = m.sandbox->pages;
        if (m.sandbox->content_security_policy.has_value())
            s["content_security_policy"] = *m.sandbox->content_security_policy;
        j["sandbox"] = std::move(s);
    }

    for (const auto& [key, value] : m.raw_extra.items()) j[key] = value;
    return j;
}

std::string serialize_manifest(const Manifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

bool is_match_pattern(std::string_view permission) {
    return permission == "<all_urls>" || permission.find("://") != std::string_view::npos;
}

std::vector<Violation> validate_v3(const Manifest& m) {
    if (m.manifest_version != 3)
        throw WrongVersion("validate_v3 requires a manifest_version 3 manifest");
    std::vector<Violation> violations;

    if (m.background.kind == BackgroundSpec::Kind::Scripts ||
        m.background.kind == BackgroundSpec::Kind::Page) {
        violations.push_back(Violation{
            "background",
            m.background.kind == BackgroundSpec::Kind::Page ? m.background.entry
                                                            : "scripts list",
            "V3 background must be a single service worker"});
    }

    if (m.content_security_policy.kind == CspSpec::Kind::V2String) {
        violations.push_back(Violation{"content_security_policy",
                                       m.content_security_policy.v2_value,
                                       "V3 CSP must be an object keyed by extension_pages"});
    } else if (m.content_security_policy.kind == CspSpec::Kind::V3Object) {
        for (const auto& [key, policy] : m.content_security_policy.v3_values) {
            for (const csp::Directive& d : csp::parse(policy)) {
                if (!csp::directive_takes_sources(d.name)) continue;
                for (const std::string& src : d.sources) {
                    if (!csp::source_allowed_v3(src)) {
                        violations.push_back(Violation{
                            "content_security_policy." + key, src,
                            src == "'unsafe-eval'"
                                ? "unsafe-eval is deprecated in V3"
                                : "CSP source outside the allowed set (self, none, "
                                  "localhost, 127.0.0.1)"});
                    }
                }
            }
        }
    }

    if (m.sandbox.has_value() && m.sandbox->content_security_policy.has_value()) {
        for (const csp::Directive& d : csp::parse(*m.sandbox->content_security_policy)) {
            if (!csp::directive_takes_sources(d.name)) continue;
            for (const std::string& src : d.sources)
                if (!csp::source_allowed_v3(src))
                    violations.push_back(
                        Violation{"sandbox.content_security_policy", src,
                                  "CSP source outside the allowed set (self, none, localhost, "
                                  "127.0.0.1)"});
        }
    }

    if (m.web_accessible_resources.kind == WarSpec::Kind::V2List) {
        violations.push_back(Violation{"web_accessible_resources", "string list",
                                       "V3 WAR entries must declare resources and matches"});
    } else if (m.web_accessible_resources.kind == WarSpec::Kind::V3List) {
        for (const WarEntry& e : m.web_accessible_resources.v3_entries)
            if (e.resources.empty() || e.matches.empty())
                violations.push_back(Violation{"web_accessible_resources", "entry",
                                               "WAR entries need non-empty resources and matches"});
    }

    for (const std::string& p : m.permissions)
        if (is_match_pattern(p))
            violations.push_back(
                Violation{"permissions", p, "match patterns belong in host_permissions in V3"});

    return violations;
}

ExtensionPackage load_package(const fs::path& root, Warnings* warnings) {
    std::map<std::string, std::string> files;
    std::string base_name;

    if (fs::is_directory(root)) {
        fs::path dir = root;
        if (dir.filename().empty()) dir = dir.parent_path();
        base_name = dir.filename().string();
        if (!fs::exists(root / "manifest.json"))
            throw MissingManifest("no manifest.json in " + root.string());
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (!entry.is_regular_file()) continue;
            const std::string rel = entry.path().lexically_relative(root).generic_string();
            files[rel] = read_file_bytes(entry.path());
        }
    } else if (fs::is_regular_file(root)) {
        files = zip::read_archive(root);
        base_name = root.stem().string();
        if (files.count("manifest.json") == 0)
            throw MissingManifest("no manifest.json at archive root of " + root.string());
    } else {
        throw IoError("input path does not exist: " + root.string());
    }

    Manifest manifest = parse_manifest(files.at("manifest.json"), warnings);

    ExtensionPackage pkg;
    pkg.id = ExtensionId::is_valid(base_name) ? ExtensionId{base_name}
                                              : ExtensionId::from_content_hash(files);
    pkg.version = manifest.version;
    pkg.manifest = std::move(manifest);
    pkg.files = std::move(files);
    return pkg;
}

}  // namespace mv3
