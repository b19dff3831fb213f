#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mv3::csp {

struct Directive {
    std::string name;                  // e.g. "script-src"
    std::vector<std::string> sources;  // source expressions in order
};

// Splits a policy string on ';' into directives; tokens within a directive
// are whitespace-separated, the first being the directive name.
std::vector<Directive> parse(std::string_view policy);

std::string serialize(const std::vector<Directive>& directives);

// V3 allows only 'self', 'none' and localhost/127.0.0.1 origins as script
// and object sources for extension pages.
bool source_allowed_v3(std::string_view source);

// The `sandbox` directive carries flag keywords (allow-scripts, ...) rather
// than source expressions; its values are exempt from the source check.
bool directive_takes_sources(std::string_view name);

}  // namespace mv3::csp
