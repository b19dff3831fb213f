#include "mv3/convert.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include "mv3/csp.hpp"
#include "mv3/html.hpp"
#include "mv3/js_analysis.hpp"
#include "mv3/jslex.hpp"

namespace fs = std::filesystem;

namespace mv3 {

namespace {

bool has_extension(std::string_view path, std::string_view ext) {
    if (path.size() < ext.size()) return false;
    std::string_view tail = path.substr(path.size() - ext.size());
    return std::equal(tail.begin(), tail.end(), ext.begin(), [](unsigned char a, unsigned char b) {
        return std::tolower(a) == std::tolower(b);
    });
}

bool is_js_file(std::string_view path) { return has_extension(path, ".js"); }
bool is_html_file(std::string_view path) {
    return has_extension(path, ".html") || has_extension(path, ".htm");
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

Substitution manifest_sub(std::string before, std::string after, std::string note = "") {
    Substitution s;
    s.file = "manifest.json";
    s.line = 0;
    s.kind = Substitution::Kind::ManifestField;
    s.before = std::move(before);
    s.after = std::move(after);
    s.note = std::move(note);
    return s;
}

// Drops V3-disallowed sources from every directive, one substitution per
// dropped source.  Returns the filtered policy string.
std::string filter_csp_policy(const std::string& policy, const std::string& field,
                              std::vector<Substitution>& subs, bool& saw_unsafe_eval) {
    std::vector<csp::Directive> directives = csp::parse(policy);
    for (csp::Directive& d : directives) {
        if (!csp::directive_takes_sources(d.name)) continue;
        std::vector<std::string> kept;
        for (std::string& src : d.sources) {
            if (csp::source_allowed_v3(src)) {
                kept.push_back(std::move(src));
                continue;
            }
            if (src == "'unsafe-eval'") saw_unsafe_eval = true;
            subs.push_back(manifest_sub(
                d.name + " " + src, d.name,
                field + ": source outside the V3 allowed set (self, none, localhost, "
                        "127.0.0.1) dropped"));
        }
        d.sources = std::move(kept);
    }
    return csp::serialize(directives);
}

int find_line(std::string_view haystack, std::string_view needle) {
    const std::size_t pos = haystack.find(needle);
    if (pos == std::string_view::npos) return 0;
    return 1 + static_cast<int>(std::count(haystack.begin(),
                                           haystack.begin() + static_cast<std::ptrdiff_t>(pos),
                                           '\n'));
}

const std::unordered_set<std::string_view>& deprecated_extension_members() {
    // chrome.extension.* members that moved verbatim to chrome.runtime.*
    static const std::unordered_set<std::string_view> members = {
        "sendMessage", "onMessage", "connect", "onConnect",
        "getURL",      "sendRequest", "onRequest",
    };
    return members;
}

bool manifest_has_unsafe_eval(const Manifest& m) {
    auto policy_has = [](const std::string& policy) {
        for (const csp::Directive& d : csp::parse(policy))
            for (const std::string& s : d.sources)
                if (s == "'unsafe-eval'") return true;
        return false;
    };
    if (m.content_security_policy.kind == CspSpec::Kind::V2String &&
        policy_has(m.content_security_policy.v2_value))
        return true;
    if (m.content_security_policy.kind == CspSpec::Kind::V3Object)
        for (const auto& [key, policy] : m.content_security_policy.v3_values)
            if (policy_has(policy)) return true;
    return false;
}

}  // namespace

std::string_view to_string(Substitution::Kind kind) {
    switch (kind) {
        case Substitution::Kind::ManifestField: return "manifest_field";
        case Substitution::Kind::ApiRename: return "api_rename";
    }
    return "";
}

std::string_view to_string(Blocker::Kind kind) {
    switch (kind) {
        case Blocker::Kind::RemoteCodeReference: return "remote_code_reference";
        case Blocker::Kind::StringCodeExecution: return "string_code_execution";
        case Blocker::Kind::BlockingWebRequest: return "blocking_web_request";
        case Blocker::Kind::DomInBackground: return "dom_in_background";
        case Blocker::Kind::CspUnconvertible: return "csp_unconvertible";
    }
    return "";
}

ManifestConversion convert_manifest(const Manifest& m) {
    if (m.manifest_version != 2)
        throw WrongVersion("convert_manifest requires a manifest_version 2 manifest");

    ManifestConversion out;
    Manifest v3 = m;
    v3.manifest_version = 3;
    out.substitutions.push_back(manifest_sub("manifest_version: 2", "manifest_version: 3"));

    // Match-pattern permissions move to host_permissions, order preserved.
    std::vector<std::string> plain;
    std::vector<std::string> hosts;
    for (const std::string& p : m.permissions) {
        if (is_match_pattern(p)) {
            hosts.push_back(p);
            out.substitutions.push_back(
                manifest_sub("permissions: " + p, "host_permissions: " + p));
        } else {
            plain.push_back(p);
        }
    }
    v3.permissions = std::move(plain);
    v3.host_permissions = std::move(hosts);

    if (m.background.kind == BackgroundSpec::Kind::Scripts) {
        v3.background.kind = BackgroundSpec::Kind::ServiceWorker;
        v3.background.entry = std::string(kGeneratedWorkerName);
        v3.background.scripts.clear();
        out.substitutions.push_back(
            manifest_sub("background.scripts: [" + join(m.background.scripts, ", ") + "]",
                         "background.service_worker: " + std::string(kGeneratedWorkerName)));
    } else if (m.background.kind == BackgroundSpec::Kind::Page) {
        v3.background.kind = BackgroundSpec::Kind::ServiceWorker;
        v3.background.entry = std::string(kGeneratedWorkerName);
        out.substitutions.push_back(
            manifest_sub("background.page: " + m.background.entry,
                         "background.service_worker: " + std::string(kGeneratedWorkerName)));
    }

    if (m.action_kind == ActionKind::BrowserAction || m.action_kind == ActionKind::PageAction) {
        v3.action_kind = ActionKind::Action;
        out.substitutions.push_back(
            manifest_sub(std::string(action_kind_key(m.action_kind)), "action"));
    }

    if (m.content_security_policy.kind == CspSpec::Kind::V2String) {
        bool saw_unsafe_eval = false;
        const std::string filtered =
            filter_csp_policy(m.content_security_policy.v2_value, "content_security_policy",
                              out.substitutions, saw_unsafe_eval);
        out.had_unsafe_eval = saw_unsafe_eval;
        v3.content_security_policy.kind = CspSpec::Kind::V3Object;
        v3.content_security_policy.v2_value.clear();
        v3.content_security_policy.v3_values = {{"extension_pages", filtered}};
    }

    if (m.web_accessible_resources.kind == WarSpec::Kind::V2List) {
        WarEntry entry;
        entry.resources = m.web_accessible_resources.v2_resources;
        entry.matches = {"<all_urls>"};
        v3.web_accessible_resources.kind = WarSpec::Kind::V3List;
        v3.web_accessible_resources.v2_resources.clear();
        v3.web_accessible_resources.v3_entries = {std::move(entry)};
        out.substitutions.push_back(manifest_sub(
            "web_accessible_resources: [" + join(m.web_accessible_resources.v2_resources, ", ") +
                "]",
            "web_accessible_resources: [{resources, matches: [<all_urls>]}]",
            "V2 resources were reachable from every origin; <all_urls> preserves that but is "
            "over-broad"));
    }

    if (m.sandbox.has_value() && m.sandbox->content_security_policy.has_value()) {
        bool sandbox_unsafe_eval = false;
        v3.sandbox->content_security_policy =
            filter_csp_policy(*m.sandbox->content_security_policy,
                              "sandbox.content_security_policy", out.substitutions,
                              sandbox_unsafe_eval);
        out.had_unsafe_eval = out.had_unsafe_eval || sandbox_unsafe_eval;
    }

    out.manifest = std::move(v3);
    return out;
}

RewriteResult rewrite_api_calls(std::string_view source) {
    RewriteResult out;
    const jslex::LexResult lexed = jslex::tokenize(source);
    const std::vector<jslex::ApiChain> chains = jslex::extract_chains(lexed.tokens);

    struct Edit {
        std::size_t token_index;
        std::string replacement;
        std::string note;
    };
    std::vector<Edit> edits;

    for (const jslex::ApiChain& chain : chains) {
        if (chain.segments.size() < 2 || chain.segments[0] != "chrome") continue;
        const std::string& receiver = chain.segments[1];

        if (iequals(receiver, "browseraction")) {
            edits.push_back({chain.token_indices[1], "action", ""});
        } else if (receiver == "extension" && chain.segments.size() >= 3 &&
                   deprecated_extension_members().count(chain.segments[2]) > 0) {
            edits.push_back({chain.token_indices[1], "runtime", ""});
        } else if (receiver == "tabs" && chain.segments.size() >= 3 &&
                   (chain.segments[2] == "executeScript" || chain.segments[2] == "insertCSS")) {
            edits.push_back({chain.token_indices[1], "scripting",
                             "argument shape not migrated; call site needs the scripting API "
                             "injection object"});
            if (chain.segments[2] == "executeScript") {
                const auto span = analysis::call_arg_span(lexed.tokens, chain.token_indices.back());
                if (span.has_value() &&
                    analysis::span_has_property_key(lexed.tokens, *span, "code")) {
                    Blocker b;
                    b.kind = Blocker::Kind::StringCodeExecution;
                    b.line = chain.line;
                    b.detail = "executeScript with a string `code` argument cannot run in V3";
                    out.blockers.push_back(std::move(b));
                }
            }
        }
    }

    std::sort(edits.begin(), edits.end(),
              [](const Edit& a, const Edit& b) { return a.token_index < b.token_index; });

    std::size_t next_edit = 0;
    std::string text;
    text.reserve(source.size());
    for (std::size_t i = 0; i < lexed.tokens.size(); ++i) {
        const jslex::Token& tok = lexed.tokens[i];
        if (next_edit < edits.size() && edits[next_edit].token_index == i) {
            const Edit& e = edits[next_edit++];
            Substitution s;
            s.line = tok.line;
            s.offset = tok.begin;
            s.kind = Substitution::Kind::ApiRename;
            s.before = tok.text;
            s.after = e.replacement;
            s.note = e.note;
            out.substitutions.push_back(std::move(s));
            text += e.replacement;
        } else {
            text += tok.text;
        }
    }
    out.text = std::move(text);
    return out;
}

std::vector<Blocker> detect_blockers(const ExtensionPackage& pkg) {
    std::vector<Blocker> blockers;

    // Files that run in the background context.
    std::set<std::string> background_files;
    const BackgroundSpec& bg = pkg.manifest.background;
    if (bg.kind == BackgroundSpec::Kind::Scripts)
        background_files.insert(bg.scripts.begin(), bg.scripts.end());
    if (bg.kind == BackgroundSpec::Kind::ServiceWorker) background_files.insert(bg.entry);
    if (bg.kind == BackgroundSpec::Kind::Page) {
        background_files.insert(bg.entry);
        auto it = pkg.files.find(bg.entry);
        if (it != pkg.files.end())
            for (const html::ScriptTag& tag : html::find_script_tags(it->second))
                if (tag.has_src) background_files.insert(tag.src);
    }

    const bool csp_allows_eval = manifest_has_unsafe_eval(pkg.manifest);

    auto scan_code = [&](const std::string& path, std::string_view code, int line_base,
                         bool background) {
        const analysis::JsFacts facts = analysis::analyze_js(code);
        auto at = [&](int line) { return line_base + line - 1; };

        const bool builds_script_element = !facts.create_element_script_lines.empty();
        for (const analysis::ConcatGroup& src : facts.src_assignments) {
            if (!src.has_remote_scheme || !builds_script_element) continue;
            blockers.push_back(Blocker{Blocker::Kind::RemoteCodeReference, path, at(src.line),
                                       "script src assigned a remote URL: " +
                                           (src.value.empty() ? "<unresolved>" : src.value)});
        }
        if (!csp_allows_eval) {
            for (int line : facts.eval_call_lines)
                blockers.push_back(Blocker{Blocker::Kind::StringCodeExecution, path, at(line),
                                           "eval() executes string code"});
            for (int line : facts.new_function_lines)
                blockers.push_back(Blocker{Blocker::Kind::StringCodeExecution, path, at(line),
                                           "new Function() executes string code"});
        }
        for (int line : facts.webrequest_blocking_lines)
            blockers.push_back(Blocker{Blocker::Kind::BlockingWebRequest, path, at(line),
                                       "webRequest listener registered with the blocking option"});
        if (background)
            for (int line : facts.document_chain_lines)
                blockers.push_back(Blocker{Blocker::Kind::DomInBackground, path, at(line),
                                           "background script touches the DOM via document.*"});
    };

    for (const auto& [path, content] : pkg.files) {
        if (is_js_file(path)) {
            scan_code(path, content, 1, background_files.count(path) > 0);
        } else if (is_html_file(path)) {
            const bool background = background_files.count(path) > 0;
            for (const html::ScriptTag& tag : html::find_script_tags(content)) {
                if (tag.has_src) {
                    if (analysis::starts_with_remote_scheme(tag.src))
                        blockers.push_back(Blocker{Blocker::Kind::RemoteCodeReference, path,
                                                   tag.tag_line,
                                                   "script tag loads a remote URL: " + tag.src});
                } else {
                    scan_code(path, tag.inline_body, tag.body_line, background);
                }
            }
        }
    }

    for (const std::string& perm : pkg.manifest.permissions) {
        if (perm != "webRequestBlocking") continue;
        const auto it = pkg.files.find("manifest.json");
        const int line =
            it == pkg.files.end() ? 0 : find_line(it->second, "\"webRequestBlocking\"");
        Blocker b;
        b.kind = Blocker::Kind::BlockingWebRequest;
        b.file = "manifest.json";
        if (line > 0) b.line = line;
        b.detail = "webRequestBlocking permission has no V3 equivalent";
        blockers.push_back(std::move(b));
    }

    return blockers;
}

ConvertedPackage convert_package(const ExtensionPackage& pkg) {
    if (pkg.manifest.manifest_version != 2)
        throw WrongVersion("convert_package requires a manifest_version 2 package");

    ManifestConversion mc = convert_manifest(pkg.manifest);
    ConvertedPackage out;
    out.package.id = pkg.id;
    out.package.version = pkg.version;
    ConversionReport& report = out.report;
    report.substitutions = std::move(mc.substitutions);
    report.blockers = std::move(mc.blockers);

    std::size_t loc = 0;
    bool uses_eval = false;

    for (const auto& [path, content] : pkg.files) {
        if (path == "manifest.json") continue;
        if (is_js_file(path)) {
            RewriteResult rw = rewrite_api_calls(content);
            for (Substitution& s : rw.substitutions) {
                s.file = path;
                report.substitutions.push_back(std::move(s));
            }
            for (Blocker& b : rw.blockers) {
                b.file = path;
                report.blockers.push_back(std::move(b));
            }
            if (rw.text != content) loc += jslex::loc_changed(content, rw.text);
            out.package.files[path] = std::move(rw.text);
        } else {
            out.package.files[path] = content;
        }
        if (mc.had_unsafe_eval && !uses_eval) {
            if (is_js_file(path)) {
                const analysis::JsFacts facts = analysis::analyze_js(pkg.files.at(path));
                uses_eval = !facts.eval_call_lines.empty() || !facts.new_function_lines.empty();
            } else if (is_html_file(path)) {
                for (const html::ScriptTag& tag : html::find_script_tags(pkg.files.at(path))) {
                    if (tag.has_src) continue;
                    const analysis::JsFacts facts = analysis::analyze_js(tag.inline_body);
                    if (!facts.eval_call_lines.empty() || !facts.new_function_lines.empty()) {
                        uses_eval = true;
                        break;
                    }
                }
            }
        }
    }

    for (Blocker& b : detect_blockers(pkg)) report.blockers.push_back(std::move(b));

    // Dropping 'unsafe-eval' is behavior-preserving unless string code
    // execution is actually present; only then does it block conversion.
    if (mc.had_unsafe_eval && uses_eval) {
        Blocker b;
        b.kind = Blocker::Kind::CspUnconvertible;
        b.file = "manifest.json";
        b.detail = "CSP declared unsafe-eval and the sources execute string code";
        report.blockers.push_back(std::move(b));
    }

    // Background loader: original scripts imported in declaration order via
    // the worker-scope synchronous import.
    std::vector<std::string> imports;
    if (pkg.manifest.background.kind == BackgroundSpec::Kind::Scripts) {
        imports = pkg.manifest.background.scripts;
    } else if (pkg.manifest.background.kind == BackgroundSpec::Kind::Page) {
        const auto page = pkg.files.find(pkg.manifest.background.entry);
        if (page != pkg.files.end()) {
            int inline_count = 0;
            for (const html::ScriptTag& tag : html::find_script_tags(page->second)) {
                if (tag.has_src) {
                    imports.push_back(tag.src);
                } else {
                    const std::string name =
                        "__generated_sw_inline_" + std::to_string(++inline_count) + ".js";
                    out.package.files[name] = tag.inline_body;
                    report.generated_files.push_back(name);
                    loc += jslex::split_lines(tag.inline_body).size();
                    imports.push_back(name);
                }
            }
        }
    }
    if (pkg.manifest.background.kind == BackgroundSpec::Kind::Scripts ||
        pkg.manifest.background.kind == BackgroundSpec::Kind::Page) {
        std::string loader = "// background loader generated during the V2 to V3 conversion\n";
        loader += "importScripts(";
        for (std::size_t i = 0; i < imports.size(); ++i) {
            if (i) loader += ", ";
            loader += json(imports[i]).dump();
        }
        loader += ");\n";
        out.package.files[std::string(kGeneratedWorkerName)] = loader;
        report.generated_files.insert(report.generated_files.begin(),
                                      std::string(kGeneratedWorkerName));
        loc += jslex::split_lines(loader).size();
    }

    const std::string& old_manifest = pkg.files.at("manifest.json");
    const std::string new_manifest = serialize_manifest(mc.manifest);
    loc += jslex::line_diff(jslex::split_lines(old_manifest), jslex::split_lines(new_manifest));
    out.package.files["manifest.json"] = new_manifest;
    out.package.manifest = std::move(mc.manifest);

    report.loc_changed = loc;
    report.manifest_valid = validate_v3(out.package.manifest).empty();
    report.status = (report.blockers.empty() && report.manifest_valid)
                        ? ConversionReport::Status::Success
                        : ConversionReport::Status::Fail;

    std::sort(report.substitutions.begin(), report.substitutions.end(),
              [](const Substitution& a, const Substitution& b) {
                  if (a.file != b.file) return a.file < b.file;
                  if (a.line != b.line) return a.line < b.line;
                  if (a.offset != b.offset) return a.offset < b.offset;
                  return a.before < b.before;
              });
    std::sort(report.blockers.begin(), report.blockers.end(),
              [](const Blocker& a, const Blocker& b) {
                  if (a.file != b.file) return a.file < b.file;
                  const int la = a.line.value_or(0), lb = b.line.value_or(0);
                  if (la != lb) return la < lb;
                  return static_cast<int>(a.kind) < static_cast<int>(b.kind);
              });
    return out;
}

json conversion_report_to_json(const ConversionReport& report) {
    json j = json::object();
    j["schema_version"] = 1;
    j["status"] = report.status == ConversionReport::Status::Success ? "Success" : "Fail";
    json subs = json::array();
    for (const Substitution& s : report.substitutions) {
        json e = json::object();
        e["file"] = s.file;
        e["line"] = s.line;
        e["kind"] = std::string(to_string(s.kind));
        e["before"] = s.before;
        e["after"] = s.after;
        if (s.kind == Substitution::Kind::ApiRename) e["offset"] = s.offset;
        if (!s.note.empty()) e["note"] = s.note;
        subs.push_back(std::move(e));
    }
    j["substitutions"] = std::move(subs);
    json blockers = json::array();
    for (const Blocker& b : report.blockers) {
        json e = json::object();
        e["kind"] = std::string(to_string(b.kind));
        e["file"] = b.file;
        if (b.line.has_value()) e["line"] = *b.line;
        e["detail"] = b.detail;
        blockers.push_back(std::move(e));
    }
    j["blockers"] = std::move(blockers);
    j["loc_changed"] = report.loc_changed;
    j["generated_files"] = report.generated_files;
    j["manifest_valid"] = report.manifest_valid;
    return j;
}

void write_package_files(const ExtensionPackage& pkg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    for (const auto& [path, content] : pkg.files) {
        const fs::path target = out_dir / fs::path(path);
        if (target.has_parent_path()) fs::create_directories(target.parent_path());
        std::ofstream f(target, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write file: " + target.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
}

}  // namespace mv3
