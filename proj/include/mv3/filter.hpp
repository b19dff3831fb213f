#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mv3/errors.hpp"

namespace mv3::abp {

// Supported option subset; anything else is parsed and recorded as ignored.
struct FilterOptions {
    std::optional<bool> third_party;          // $third-party / $~third-party
    std::vector<std::string> include_domains; // $domain=a.com
    std::vector<std::string> exclude_domains; // $domain=~b.com
    std::vector<std::string> ignored;         // unknown option names

    bool operator==(const FilterOptions&) const = default;
};

struct FilterRule {
    struct Atom {
        enum class Kind { Literal, Wildcard, Separator };
        Kind kind = Kind::Literal;
        char ch = 0;  // lowercased, Literal only

        bool operator==(const Atom&) const = default;
    };

    enum class Anchor { None, Domain, Start };

    std::string raw;
    bool exception = false;   // leading "@@"
    Anchor anchor = Anchor::None;
    bool end_anchor = false;  // trailing "|"
    std::vector<Atom> atoms;
    FilterOptions options;

    bool operator==(const FilterRule&) const = default;
};

struct RuleSet {
    std::vector<FilterRule> block_rules;
    std::vector<FilterRule> exception_rules;
    std::set<std::string> plain_domains;  // registrable domains from plain lists
};

struct ParsedList {
    RuleSet rules;
    Warnings warnings;
};

// Total: element-hiding rules, metadata headers and malformed lines become
// warnings, plain domain lines go to plain_domains.
ParsedList parse_filter_list(std::string_view text);

// Single line -> rule; nullopt for comments/blank/skipped lines.
std::optional<FilterRule> parse_rule_line(std::string_view line, Warnings* warnings = nullptr);

// Reconstructs a match-equivalent rule string from the parsed form.
std::string serialize_rule(const FilterRule& rule);

struct UrlParts {
    std::string full;    // lowercased absolute URL
    std::string scheme;
    std::string host;
    std::size_t host_begin = 0;  // offset of host within full
};

UrlParts parse_url(std::string_view url);  // throws MalformedUrl

struct MatchContext {
    std::optional<std::string> origin_host;
};

bool matches(const FilterRule& rule, std::string_view url, const MatchContext& context = {});

struct Verdict {
    enum class Kind { Clean, Blocked, Excepted };
    Kind kind = Kind::Clean;
    std::string rule;  // raw rule text or plain domain that decided

    bool operator==(const Verdict&) const = default;
};

// Exceptions dominate; otherwise the first matching block rule in parse
// order, then plain-domain membership of the registrable domain.
Verdict classify_url(const RuleSet& rules, std::string_view url, const MatchContext& context = {});

// Registrable domain from a bundled static suffix snapshot (no network).
std::string registrable_domain(std::string_view host);

}  // namespace mv3::abp
