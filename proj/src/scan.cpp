#include "mv3/scan.hpp"

#include <algorithm>
#include <set>

#include "mv3/html.hpp"
#include "mv3/js_analysis.hpp"

namespace mv3 {

namespace {

bool has_suffix_ci(std::string_view path, std::string_view ext) {
    if (path.size() < ext.size()) return false;
    std::string_view tail = path.substr(path.size() - ext.size());
    return std::equal(tail.begin(), tail.end(), ext.begin(), [](unsigned char a, unsigned char b) {
        return std::tolower(a) == std::tolower(b);
    });
}

bool is_js_file(std::string_view path) { return has_suffix_ci(path, ".js"); }
bool is_html_file(std::string_view path) {
    return has_suffix_ci(path, ".html") || has_suffix_ci(path, ".htm");
}

std::vector<std::string> taxonomy_names() {
    std::vector<std::string> names;
    for (const TaxonomyEntry& e : api_taxonomy()) names.push_back(e.api);
    return names;
}

int count_newlines_before(std::string_view text, std::string_view needle) {
    const std::size_t pos = text.find(needle);
    if (pos == std::string_view::npos) return -1;
    return static_cast<int>(
        std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

}  // namespace

const std::vector<TaxonomyEntry>& api_taxonomy() {
    using Cat = TaxonomyEntry::Category;
    static const std::vector<TaxonomyEntry> rows = {
        {Cat::BackgroundPages, "runtime.sendMessage", true, false},
        {Cat::BackgroundPages, "runtime.connect", true, false},
        {Cat::BackgroundPages, "runtime.onMessage.addListener", true, false},
        {Cat::BackgroundPages, "runtime.onConnect.addListener", true, false},
        {Cat::WebRequest, "webRequest", true, true},
        {Cat::WebRequest, "webRequestBlocking", true, true},
        {Cat::ContentScriptsCrossOrigin, "XMLHttpRequest", true, true},
        {Cat::ContentScriptsCrossOrigin, "fetch", true, true},
        {Cat::RemotelyHostedCode, "eval", false, true},
    };
    return rows;
}

std::string_view to_string(TaxonomyEntry::Category category) {
    switch (category) {
        case TaxonomyEntry::Category::BackgroundPages: return "Background Pages Related APIs";
        case TaxonomyEntry::Category::WebRequest: return "Web Request API";
        case TaxonomyEntry::Category::ContentScriptsCrossOrigin:
            return "Content Scripts and Cross-Origin Requests";
        case TaxonomyEntry::Category::RemotelyHostedCode: return "Remotely Hosted Code";
    }
    return "";
}

RiskReport scan_package(const ExtensionPackage& pkg, const ScanOptions& options) {
    RiskReport report;
    const std::vector<std::string> targets = taxonomy_names();
    for (const std::string& name : targets) report.per_api[name];  // all APIs present

    auto record = [&](const std::string& api, const std::string& path, int line) {
        ApiUsage& usage = report.per_api[api];
        ++usage.hits;
        usage.locations.emplace_back(path, line);
    };

    for (const auto& [path, content] : pkg.files) {
        if (is_js_file(path)) {
            for (const jslex::ApiHit& hit : jslex::find_api_hits(content, targets, options.mode))
                record(hit.api, path, hit.line);
        } else if (is_html_file(path)) {
            for (const html::ScriptTag& tag : html::find_script_tags(content)) {
                if (tag.has_src) continue;
                for (const jslex::ApiHit& hit :
                     jslex::find_api_hits(tag.inline_body, targets, options.mode))
                    record(hit.api, path, tag.body_line + hit.line - 1);
            }
        }
    }

    if (options.count_manifest_permissions) {
        const auto manifest_it = pkg.files.find("manifest.json");
        for (const std::string& perm : pkg.manifest.permissions) {
            if (perm != "webRequestBlocking") continue;
            int line = 1;
            if (manifest_it != pkg.files.end()) {
                const int newlines =
                    count_newlines_before(manifest_it->second, "\"webRequestBlocking\"");
                if (newlines >= 0) line = newlines + 1;
            }
            record("webRequestBlocking", "manifest.json", line);
        }
    }

    for (const TaxonomyEntry& entry : api_taxonomy()) {
        if (report.per_api[entry.api].hits == 0) continue;
        report.uses_vulnerability_related |= entry.vulnerability_related;
        report.uses_malicious_related |= entry.malicious_related;
    }
    return report;
}

bool glob_match(std::string_view pattern, std::string_view path) {
    // Iterative '*' backtracking; no other metacharacters.
    std::size_t p = 0, s = 0;
    std::size_t star = std::string_view::npos, mark = 0;
    while (s < path.size()) {
        if (p < pattern.size() && (pattern[p] == path[s])) {
            ++p;
            ++s;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = s;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            s = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::vector<WarInjectionFinding> detect_war_injection(const ExtensionPackage& pkg) {
    std::vector<WarInjectionFinding> findings;
    const WarSpec& war = pkg.manifest.web_accessible_resources;
    if (war.kind == WarSpec::Kind::Absent) return findings;

    // (resource glob, matches) pairs in declaration order.
    std::vector<std::pair<std::string, std::vector<std::string>>> declared;
    if (war.kind == WarSpec::Kind::V2List) {
        for (const std::string& glob : war.v2_resources)
            declared.emplace_back(glob, std::vector<std::string>{"<all_urls>"});
    } else {
        for (const WarEntry& entry : war.v3_entries)
            for (const std::string& glob : entry.resources) declared.emplace_back(glob, entry.matches);
    }

    std::set<std::string> seen;
    for (const auto& [glob, matches] : declared) {
        for (const auto& [path, content] : pkg.files) {
            if (!is_js_file(path) || !glob_match(glob, path) || seen.count(path) > 0) continue;
            const analysis::JsFacts facts = analysis::analyze_js(content);
            if (facts.create_element_script_lines.empty() || facts.append_lines.empty()) continue;
            for (const analysis::ConcatGroup& src : facts.src_assignments) {
                if (!src.has_remote_scheme) continue;
                WarInjectionFinding f;
                f.war_resource = path;
                f.matches = matches;
                f.injection_site = {path, src.line};
                f.remote_host_expression = src.value;
                findings.push_back(std::move(f));
                seen.insert(path);
                break;
            }
        }
    }
    return findings;
}

json risk_report_to_json(const RiskReport& report,
                         const std::vector<WarInjectionFinding>& findings) {
    json j = json::object();
    j["schema_version"] = 1;
    json per_api = json::object();
    for (const auto& [api, usage] : report.per_api) {
        json locations = json::array();
        for (const auto& [file, line] : usage.locations)
            locations.push_back(json{{"file", file}, {"line", line}});
        per_api[api] = json{{"hits", usage.hits}, {"locations", std::move(locations)}};
    }
    j["per_api"] = std::move(per_api);
    j["flags"] = json{{"uses_vulnerability_related", report.uses_vulnerability_related},
                      {"uses_malicious_related", report.uses_malicious_related}};
    json flist = json::array();
    for (const WarInjectionFinding& f : findings) {
        flist.push_back(json{{"war_resource", f.war_resource},
                             {"matches", f.matches},
                             {"injection_site",
                              json{{"file", f.injection_site.first}, {"line", f.injection_site.second}}},
                             {"remote_host_expression", f.remote_host_expression}});
    }
    j["war_injection_findings"] = std::move(flist);
    return j;
}

}  // namespace mv3
