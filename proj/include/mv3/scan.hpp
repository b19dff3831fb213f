#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mv3/jslex.hpp"
#include "mv3/model.hpp"

namespace mv3 {

// One row of the fixed API taxonomy.  Extending the taxonomy is a config
// change, never inference.
struct TaxonomyEntry {
    enum class Category {
        BackgroundPages,
        WebRequest,
        ContentScriptsCrossOrigin,
        RemotelyHostedCode,
    };
    Category category;
    std::string api;
    bool vulnerability_related = false;
    bool malicious_related = false;
};

// The nine taxonomy rows, in table order.
const std::vector<TaxonomyEntry>& api_taxonomy();
std::string_view to_string(TaxonomyEntry::Category category);

struct ApiUsage {
    int hits = 0;
    std::vector<std::pair<std::string, int>> locations;  // (path, line)
};

struct RiskReport {
    std::map<std::string, ApiUsage> per_api;  // one entry per taxonomy API
    bool uses_vulnerability_related = false;
    bool uses_malicious_related = false;
};

struct ScanOptions {
    jslex::CountingMode mode = jslex::CountingMode::CodeOnly;
    // Count webRequestBlocking once per occurrence in manifest permissions
    // on top of code hits.
    bool count_manifest_permissions = true;
};

// Counts taxonomy API hits over all .js files and inline <script> bodies of
// .html files.
RiskReport scan_package(const ExtensionPackage& pkg, const ScanOptions& options = {});

// The web-accessible-resources third-party injection pattern: a WAR-declared
// JS file that builds a script element, points its src at a remote host and
// appends it to the document.
struct WarInjectionFinding {
    std::string war_resource;
    std::vector<std::string> matches;
    std::pair<std::string, int> injection_site;  // (path, line of the src assignment)
    std::string remote_host_expression;          // concatenated literal fragments
};

std::vector<WarInjectionFinding> detect_war_injection(const ExtensionPackage& pkg);

// '*' wildcard glob as used by WAR resource declarations.
bool glob_match(std::string_view pattern, std::string_view path);

json risk_report_to_json(const RiskReport& report,
                         const std::vector<WarInjectionFinding>& findings);

}  // namespace mv3
