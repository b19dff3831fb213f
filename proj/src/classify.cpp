#include "mv3/classify.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "mv3/html.hpp"
#include "mv3/js_analysis.hpp"
#include "mv3/scan.hpp"

namespace mv3 {

namespace {

bool has_suffix_ci(std::string_view path, std::string_view ext) {
    if (path.size() < ext.size()) return false;
    std::string_view tail = path.substr(path.size() - ext.size());
    return std::equal(tail.begin(), tail.end(), ext.begin(), [](unsigned char a, unsigned char b) {
        return std::tolower(a) == std::tolower(b);
    });
}

// Package file paths declared under web_accessible_resources.
std::set<std::string> war_declared_files(const ExtensionPackage& pkg) {
    std::set<std::string> out;
    const WarSpec& war = pkg.manifest.web_accessible_resources;
    std::vector<std::string> globs;
    if (war.kind == WarSpec::Kind::V2List) globs = war.v2_resources;
    if (war.kind == WarSpec::Kind::V3List)
        for (const WarEntry& e : war.v3_entries)
            globs.insert(globs.end(), e.resources.begin(), e.resources.end());
    for (const std::string& glob : globs)
        for (const auto& [path, content] : pkg.files)
            if (glob_match(glob, path)) out.insert(path);
    return out;
}

void collect_targets(const std::string& path, std::string_view code, int line_base,
                     bool war_declared, std::vector<RequestTarget>& targets,
                     Warnings* warnings) {
    const analysis::JsFacts facts = analysis::analyze_js(code);
    for (const analysis::ConcatGroup& group : facts.string_groups) {
        const int line = line_base + group.line - 1;
        if (group.fully_resolved && analysis::starts_with_remote_scheme(group.value)) {
            RequestTarget t;
            t.url = group.value;
            t.file = path;
            t.line = line;
            if (war_declared)
                t.source_kind = RequestTarget::SourceKind::ManifestWarMatch;
            else if (group.operand_count > 1)
                t.source_kind = RequestTarget::SourceKind::ConcatenatedLiterals;
            else
                t.source_kind = RequestTarget::SourceKind::StringLiteral;
            targets.push_back(std::move(t));
        } else if (!group.fully_resolved && group.has_remote_scheme && warnings != nullptr) {
            warnings->push_back(Warning{
                "partial_url",
                "URL expression could not be fully resolved: \"" + group.value + "\" + <dynamic>",
                path, line});
        }
    }
}

}  // namespace

std::string_view to_string(RequestTarget::SourceKind kind) {
    switch (kind) {
        case RequestTarget::SourceKind::StringLiteral: return "string_literal";
        case RequestTarget::SourceKind::ConcatenatedLiterals: return "concatenated_literals";
        case RequestTarget::SourceKind::ManifestWarMatch: return "manifest_war_match";
    }
    return "";
}

std::string_view to_string(MaliciousLabel label) {
    switch (label) {
        case MaliciousLabel::ClickScam: return "click_scam";
        case MaliciousLabel::AdReplacement: return "ad_replacement";
        case MaliciousLabel::UserDataAnalytics: return "user_data_analytics";
        case MaliciousLabel::CredentialsStealing: return "credentials_stealing";
        case MaliciousLabel::BrowserModification: return "browser_modification";
        case MaliciousLabel::Other: return "other";
    }
    return "";
}

std::optional<MaliciousLabel> parse_label(std::string_view name) {
    for (int i = 0; i < kMaliciousLabelCount; ++i) {
        const auto label = static_cast<MaliciousLabel>(i);
        if (name == to_string(label)) return label;
    }
    return std::nullopt;
}

std::vector<RequestTarget> extract_request_targets(const ExtensionPackage& pkg,
                                                   Warnings* warnings) {
    std::vector<RequestTarget> targets;
    const std::set<std::string> war_files = war_declared_files(pkg);

    for (const auto& [path, content] : pkg.files) {
        const bool war_declared = war_files.count(path) > 0;
        if (has_suffix_ci(path, ".js")) {
            collect_targets(path, content, 1, war_declared, targets, warnings);
        } else if (has_suffix_ci(path, ".html") || has_suffix_ci(path, ".htm")) {
            for (const html::ScriptTag& tag : html::find_script_tags(content))
                if (!tag.has_src)
                    collect_targets(path, tag.inline_body, tag.body_line, war_declared, targets,
                                    warnings);
        }
    }

    // dedupe by (url, file, line), keep first occurrence order
    std::set<std::tuple<std::string, std::string, int>> seen;
    std::vector<RequestTarget> unique;
    for (RequestTarget& t : targets)
        if (seen.emplace(t.url, t.file, t.line).second) unique.push_back(std::move(t));
    return unique;
}

ActivityVerdict classify(const ExtensionPackage& pkg, const ConversionReport& conversion,
                         const abp::RuleSet& rules, const PackageMetadata& metadata) {
    ActivityVerdict verdict;
    verdict.criteria.has_prior_report = metadata.has_prior_report;
    verdict.criteria.removed_from_store = metadata.removed_from_store;
    verdict.criteria.has_label = !metadata.labels.empty();
    // For a V2 original the converter's status invariant already folds in
    // validate_v3; when handed a V3 package directly, re-check it here.
    bool loads = conversion.status == ConversionReport::Status::Success;
    if (loads && pkg.manifest.manifest_version == 3) loads = validate_v3(pkg.manifest).empty();
    verdict.criteria.converts_and_loads = loads;

    const std::vector<RequestTarget> targets =
        extract_request_targets(pkg, &verdict.warnings);
    for (const RequestTarget& target : targets) {
        // scheme-relative targets resolve as https for matching purposes
        const std::string match_url =
            target.url.rfind("//", 0) == 0 ? "https:" + target.url : target.url;
        abp::Verdict v = abp::classify_url(rules, match_url);
        if (v.kind == abp::Verdict::Kind::Blocked)
            verdict.criteria.contacts_malicious_url = true;
        verdict.evidence.emplace_back(target, std::move(v));
    }

    verdict.functionally_active = verdict.criteria.all();
    return verdict;
}

json verdict_to_json(const ActivityVerdict& verdict) {
    json j = json::object();
    j["schema_version"] = 1;
    j["functionally_active"] = verdict.functionally_active;
    j["criteria"] = json{{"has_prior_report", verdict.criteria.has_prior_report},
                         {"removed_from_store", verdict.criteria.removed_from_store},
                         {"has_label", verdict.criteria.has_label},
                         {"converts_and_loads", verdict.criteria.converts_and_loads},
                         {"contacts_malicious_url", verdict.criteria.contacts_malicious_url}};
    j["load_check"] = "static";
    j["target_extraction"] = "static_literal_approximation";
    json evidence = json::array();
    for (const auto& [target, v] : verdict.evidence) {
        json e = json::object();
        e["url"] = target.url;
        e["file"] = target.file;
        e["line"] = target.line;
        e["source_kind"] = std::string(to_string(target.source_kind));
        e["verdict"] = v.kind == abp::Verdict::Kind::Blocked     ? "blocked"
                       : v.kind == abp::Verdict::Kind::Excepted ? "excepted"
                                                                 : "clean";
        if (!v.rule.empty()) e["rule"] = v.rule;
        evidence.push_back(std::move(e));
    }
    j["evidence"] = std::move(evidence);
    if (!verdict.warnings.empty()) {
        json warnings = json::array();
        for (const Warning& w : verdict.warnings) {
            json e = json::object();
            e["code"] = w.code;
            e["message"] = w.message;
            if (!w.file.empty()) e["file"] = w.file;
            if (w.line.has_value()) e["line"] = *w.line;
            warnings.push_back(std::move(e));
        }
        j["warnings"] = std::move(warnings);
    }
    return j;
}

namespace {

std::vector<std::string> split_csv_row(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::optional<bool> parse_bool(std::string_view v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    return std::nullopt;
}

}  // namespace

LabelsFile parse_labels_csv(std::string_view text) {
    LabelsFile out;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string_view line =
            nl == std::string_view::npos ? text.substr(start) : text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        const bool last = nl == std::string_view::npos;
        start = last ? text.size() + 1 : nl + 1;

        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("id,", 0) == 0) continue;  // header row

        const std::vector<std::string> fields = split_csv_row(line);
        if (fields.size() < 5) {
            out.warnings.push_back(
                Warning{"malformed_row", "labels.csv row needs 5 fields", "", line_no});
            continue;
        }
        const auto prior = parse_bool(fields[2]);
        const auto removed = parse_bool(fields[3]);
        if (!ExtensionId::is_valid(fields[0]) || !prior.has_value() || !removed.has_value()) {
            out.warnings.push_back(
                Warning{"malformed_row", "labels.csv row has invalid fields", "", line_no});
            continue;
        }
        PackageMetadata meta;
        meta.has_prior_report = *prior;
        meta.removed_from_store = *removed;
        bool labels_ok = true;
        if (!fields[4].empty()) {
            std::size_t p = 0;
            const std::string& ls = fields[4];
            while (p <= ls.size()) {
                const std::size_t semi = ls.find(';', p);
                const std::string name =
                    semi == std::string::npos ? ls.substr(p) : ls.substr(p, semi - p);
                if (!name.empty()) {
                    const auto label = parse_label(name);
                    if (!label.has_value()) {
                        out.warnings.push_back(Warning{
                            "unknown_label", "unknown malicious label: " + name, "", line_no});
                        labels_ok = false;
                        break;
                    }
                    meta.labels.push_back(*label);
                }
                if (semi == std::string::npos) break;
                p = semi + 1;
            }
        }
        if (labels_ok) out.by_id[fields[0]] = std::move(meta);
    }
    return out;
}

LabelsFile load_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read labels file: " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    return parse_labels_csv(text);
}

}  // namespace mv3
