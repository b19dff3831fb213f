#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mv3/convert.hpp"
#include "mv3/filter.hpp"
#include "mv3/model.hpp"

namespace mv3 {

// A statically extracted outbound request target.  This under-approximates
// the dynamic behavior (runtime-computed URLs are invisible) and every
// report carries that caveat.
struct RequestTarget {
    std::string url;  // begins with http://, https:// or //
    std::string file;
    int line = 1;
    enum class SourceKind { StringLiteral, ConcatenatedLiterals, ManifestWarMatch };
    SourceKind source_kind = SourceKind::StringLiteral;
};

std::string_view to_string(RequestTarget::SourceKind kind);

enum class MaliciousLabel {
    ClickScam,
    AdReplacement,
    UserDataAnalytics,
    CredentialsStealing,
    BrowserModification,
    Other,
};

constexpr int kMaliciousLabelCount = 6;
std::string_view to_string(MaliciousLabel label);
std::optional<MaliciousLabel> parse_label(std::string_view name);

// Caller-supplied review metadata; the toolkit never infers these.
struct PackageMetadata {
    bool has_prior_report = false;
    bool removed_from_store = false;
    std::vector<MaliciousLabel> labels;
};

struct ActivityCriteria {
    bool has_prior_report = false;
    bool removed_from_store = false;
    bool has_label = false;
    bool converts_and_loads = false;
    bool contacts_malicious_url = false;

    bool all() const {
        return has_prior_report && removed_from_store && has_label && converts_and_loads &&
               contacts_malicious_url;
    }
};

struct ActivityVerdict {
    bool functionally_active = false;  // the AND of all five criteria
    ActivityCriteria criteria;
    std::vector<std::pair<RequestTarget, abp::Verdict>> evidence;
    Warnings warnings;
};

// Absolute and scheme-relative URL literals in code context, including
// adjacent `+`-concatenations of literals and literal-bound identifiers.
std::vector<RequestTarget> extract_request_targets(const ExtensionPackage& pkg,
                                                   Warnings* warnings = nullptr);

ActivityVerdict classify(const ExtensionPackage& pkg, const ConversionReport& conversion,
                         const abp::RuleSet& rules, const PackageMetadata& metadata);

json verdict_to_json(const ActivityVerdict& verdict);

// labels.csv: id,version,has_prior_report,removed_from_store,labels
// (labels semicolon-separated; a header row is allowed).
struct LabelsFile {
    std::map<std::string, PackageMetadata> by_id;
    Warnings warnings;
};

LabelsFile parse_labels_csv(std::string_view text);
LabelsFile load_labels_csv(const std::filesystem::path& path);

}  // namespace mv3
