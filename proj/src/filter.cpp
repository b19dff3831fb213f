#include "mv3/filter.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace mv3::abp {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_separator_char(char c) {
    // ABP: any character outside [a-zA-Z0-9_.%-]
    return !(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '%' ||
             c == '-');
}

bool looks_like_plain_domain(std::string_view line) {
    if (line.find('.') == std::string_view::npos) return false;
    for (char c : line) {
        const unsigned char u = static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(c)));
        if (!(std::isalnum(u) || u == '.' || u == '-' || u == '_')) return false;
    }
    return true;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

bool option_name_ok(std::string_view name) {
    if (name.empty()) return false;
    for (char c : name)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
    return true;
}

// Tries to interpret the text after the last '$' as an option list.
// Returns false when it cannot be one, in which case '$' stays pattern text.
bool parse_options(std::string_view text, FilterOptions& options) {
    FilterOptions parsed;
    for (const std::string& raw_tok : split(text, ',')) {
        std::string_view tok = trim(raw_tok);
        if (tok.empty()) return false;
        bool negated = false;
        if (tok.front() == '~') {
            negated = true;
            tok.remove_prefix(1);
        }
        std::string_view name = tok;
        std::string_view value;
        if (const std::size_t eq = tok.find('='); eq != std::string_view::npos) {
            name = tok.substr(0, eq);
            value = tok.substr(eq + 1);
        }
        if (!option_name_ok(name)) return false;
        const std::string lname = to_lower(name);
        if (lname == "third-party") {
            parsed.third_party = !negated;
        } else if (lname == "domain" && !value.empty()) {
            for (const std::string& d : split(value, '|')) {
                std::string_view dv = trim(d);
                if (dv.empty()) continue;
                if (dv.front() == '~')
                    parsed.exclude_domains.push_back(to_lower(dv.substr(1)));
                else
                    parsed.include_domains.push_back(to_lower(dv));
            }
        } else {
            parsed.ignored.push_back(to_lower(name));
        }
    }
    options = std::move(parsed);
    return true;
}

// Host-or-subdomain containment, e.g. sub.a.com is within a.com.
bool host_within(std::string_view host, std::string_view domain) {
    if (host == domain) return true;
    if (host.size() <= domain.size()) return false;
    return host.substr(host.size() - domain.size()) == domain &&
           host[host.size() - domain.size() - 1] == '.';
}

bool match_atoms(const std::vector<FilterRule::Atom>& atoms, std::size_t ai,
                 std::string_view url, std::size_t ui, bool end_anchor) {
    using Kind = FilterRule::Atom::Kind;
    if (ai == atoms.size()) return !end_anchor || ui == url.size();
    const FilterRule::Atom& a = atoms[ai];
    switch (a.kind) {
        case Kind::Literal:
            return ui < url.size() && url[ui] == a.ch &&
                   match_atoms(atoms, ai + 1, url, ui + 1, end_anchor);
        case Kind::Separator:
            if (ui == url.size())  // '^' also matches the end of the address
                return match_atoms(atoms, ai + 1, url, ui, end_anchor);
            return is_separator_char(url[ui]) &&
                   match_atoms(atoms, ai + 1, url, ui + 1, end_anchor);
        case Kind::Wildcard:
            for (std::size_t k = ui; k <= url.size(); ++k)
                if (match_atoms(atoms, ai + 1, url, k, end_anchor)) return true;
            return false;
    }
    return false;
}

}  // namespace

std::string registrable_domain(std::string_view host) {
    // Static snapshot of common multi-label public suffixes; everything else
    // falls back to the final label.
    static const std::unordered_set<std::string_view> multi_label_suffixes = {
        "co.uk",  "org.uk", "ac.uk",  "gov.uk", "net.uk", "me.uk",
        "co.jp",  "ne.jp",  "or.jp",  "ac.jp",  "go.jp",
        "com.au", "net.au", "org.au", "edu.au", "gov.au",
        "co.nz",  "net.nz", "org.nz",
        "com.br", "net.br", "org.br",
        "com.cn", "net.cn", "org.cn",
        "com.mx", "com.ar", "com.tr", "com.sg", "com.hk", "com.tw",
        "co.in",  "net.in", "org.in", "co.kr",  "co.za",  "co.id",
        "github.io", "gitlab.io", "blogspot.com", "appspot.com",
        "herokuapp.com", "cloudfront.net", "amazonaws.com", "web.app",
        "pages.dev", "netlify.app",
    };

    std::string lowered = to_lower(host);
    while (!lowered.empty() && lowered.back() == '.') lowered.pop_back();
    const std::vector<std::string> labels = split(lowered, '.');
    if (labels.size() <= 1) return lowered;

    // Literal IPv4 addresses are their own registrable domain.
    const bool numeric = std::all_of(labels.begin(), labels.end(), [](const std::string& l) {
        return !l.empty() && std::all_of(l.begin(), l.end(), [](unsigned char c) {
            return std::isdigit(c) != 0;
        });
    });
    if (numeric) return lowered;

    std::size_t suffix_labels = 1;
    for (std::size_t take = 3; take >= 2; --take) {
        if (labels.size() < take) continue;
        std::string candidate;
        for (std::size_t i = labels.size() - take; i < labels.size(); ++i) {
            if (!candidate.empty()) candidate += '.';
            candidate += labels[i];
        }
        if (multi_label_suffixes.count(candidate) > 0) {
            suffix_labels = take;
            break;
        }
    }
    const std::size_t keep = std::min(labels.size(), suffix_labels + 1);
    std::string out;
    for (std::size_t i = labels.size() - keep; i < labels.size(); ++i) {
        if (!out.empty()) out += '.';
        out += labels[i];
    }
    return out;
}

std::optional<FilterRule> parse_rule_line(std::string_view line, Warnings* warnings) {
    const std::string_view trimmed = trim(line);
    auto warn = [&](const std::string& code, const std::string& message) {
        if (warnings != nullptr) warnings->push_back(Warning{code, message, "", std::nullopt});
    };

    if (trimmed.empty() || trimmed.front() == '!') return std::nullopt;
    if (trimmed.front() == '[') {
        warn("metadata_header", "skipped list metadata: " + std::string(trimmed));
        return std::nullopt;
    }
    for (std::string_view marker : {"##", "#@#", "#?#", "#$#"}) {
        if (trimmed.find(marker) != std::string_view::npos) {
            warn("element_hiding_skipped",
                 "element hiding rules are not supported: " + std::string(trimmed));
            return std::nullopt;
        }
    }

    FilterRule rule;
    rule.raw = std::string(trimmed);
    std::string_view rest = trimmed;

    if (rest.rfind("@@", 0) == 0) {
        rule.exception = true;
        rest.remove_prefix(2);
    }

    if (const std::size_t dollar = rest.rfind('$');
        dollar != std::string_view::npos && dollar + 1 < rest.size()) {
        FilterOptions options;
        if (parse_options(rest.substr(dollar + 1), options)) {
            rule.options = std::move(options);
            rest = rest.substr(0, dollar);
        }
    }

    if (rest.rfind("||", 0) == 0) {
        rule.anchor = FilterRule::Anchor::Domain;
        rest.remove_prefix(2);
    } else if (!rest.empty() && rest.front() == '|') {
        rule.anchor = FilterRule::Anchor::Start;
        rest.remove_prefix(1);
    }
    if (!rest.empty() && rest.back() == '|') {
        rule.end_anchor = true;
        rest.remove_suffix(1);
    }

    if (rest.empty() && rule.anchor == FilterRule::Anchor::None && !rule.end_anchor) {
        warn("malformed_line", "empty pattern: " + std::string(trimmed));
        return std::nullopt;
    }

    for (char c : rest) {
        FilterRule::Atom atom;
        if (c == '*')
            atom.kind = FilterRule::Atom::Kind::Wildcard;
        else if (c == '^')
            atom.kind = FilterRule::Atom::Kind::Separator;
        else {
            atom.kind = FilterRule::Atom::Kind::Literal;
            atom.ch = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        rule.atoms.push_back(atom);
    }
    return rule;
}

ParsedList parse_filter_list(std::string_view text) {
    ParsedList out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string_view line =
            nl == std::string_view::npos ? text.substr(start) : text.substr(start, nl - start);
        const std::string_view trimmed = trim(line);

        if (!trimmed.empty() && trimmed.front() != '!') {
            // Plain domain lines (no ABP metacharacters) feed the domain set.
            if (looks_like_plain_domain(trimmed)) {
                out.rules.plain_domains.insert(to_lower(trimmed));
            } else if (auto rule = parse_rule_line(trimmed, &out.warnings)) {
                if (rule->exception)
                    out.rules.exception_rules.push_back(std::move(*rule));
                else
                    out.rules.block_rules.push_back(std::move(*rule));
            }
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

std::string serialize_rule(const FilterRule& rule) {
    std::string out;
    if (rule.exception) out += "@@";
    if (rule.anchor == FilterRule::Anchor::Domain) out += "||";
    if (rule.anchor == FilterRule::Anchor::Start) out += "|";
    for (const FilterRule::Atom& a : rule.atoms) {
        switch (a.kind) {
            case FilterRule::Atom::Kind::Literal: out += a.ch; break;
            case FilterRule::Atom::Kind::Wildcard: out += '*'; break;
            case FilterRule::Atom::Kind::Separator: out += '^'; break;
        }
    }
    if (rule.end_anchor) out += "|";

    std::vector<std::string> opts;
    if (rule.options.third_party.has_value())
        opts.push_back(*rule.options.third_party ? "third-party" : "~third-party");
    if (!rule.options.include_domains.empty() || !rule.options.exclude_domains.empty()) {
        std::string d = "domain=";
        bool first = true;
        for (const std::string& inc : rule.options.include_domains) {
            if (!first) d += '|';
            d += inc;
            first = false;
        }
        for (const std::string& exc : rule.options.exclude_domains) {
            if (!first) d += '|';
            d += '~' + exc;
            first = false;
        }
        opts.push_back(std::move(d));
    }
    for (const std::string& name : rule.options.ignored) opts.push_back(name);
    if (!opts.empty()) {
        out += '$';
        for (std::size_t i = 0; i < opts.size(); ++i) {
            if (i) out += ',';
            out += opts[i];
        }
    }
    return out;
}

UrlParts parse_url(std::string_view url) {
    UrlParts parts;
    parts.full = to_lower(url);
    const std::size_t scheme_end = parts.full.find("://");
    if (scheme_end == std::string::npos || scheme_end == 0)
        throw MalformedUrl("URL has no scheme: " + std::string(url));
    parts.scheme = parts.full.substr(0, scheme_end);
    parts.host_begin = scheme_end + 3;
    std::size_t host_end = parts.full.find_first_of("/?#", parts.host_begin);
    if (host_end == std::string::npos) host_end = parts.full.size();
    parts.host = parts.full.substr(parts.host_begin, host_end - parts.host_begin);
    // strip userinfo and port from the host view
    if (const std::size_t at = parts.host.rfind('@'); at != std::string::npos) {
        parts.host_begin += at + 1;
        parts.host = parts.host.substr(at + 1);
    }
    if (const std::size_t colon = parts.host.find(':'); colon != std::string::npos)
        parts.host = parts.host.substr(0, colon);
    if (parts.host.empty()) throw MalformedUrl("URL has no host: " + std::string(url));
    return parts;
}

bool matches(const FilterRule& rule, std::string_view url, const MatchContext& context) {
    const UrlParts parts = parse_url(url);

    if (context.origin_host.has_value()) {
        const std::string origin = to_lower(*context.origin_host);
        if (rule.options.third_party.has_value()) {
            const bool third_party =
                registrable_domain(parts.host) != registrable_domain(origin);
            if (third_party != *rule.options.third_party) return false;
        }
        if (!rule.options.include_domains.empty()) {
            const bool included =
                std::any_of(rule.options.include_domains.begin(),
                            rule.options.include_domains.end(),
                            [&](const std::string& d) { return host_within(origin, d); });
            if (!included) return false;
        }
        for (const std::string& d : rule.options.exclude_domains)
            if (host_within(origin, d)) return false;
    }

    const std::string& full = parts.full;
    switch (rule.anchor) {
        case FilterRule::Anchor::Start:
            return match_atoms(rule.atoms, 0, full, 0, rule.end_anchor);
        case FilterRule::Anchor::Domain: {
            // anchored at the host start or at any label boundary within it
            if (match_atoms(rule.atoms, 0, full, parts.host_begin, rule.end_anchor)) return true;
            for (std::size_t i = 0; i < parts.host.size(); ++i) {
                if (parts.host[i] != '.') continue;
                if (match_atoms(rule.atoms, 0, full, parts.host_begin + i + 1, rule.end_anchor))
                    return true;
            }
            return false;
        }
        case FilterRule::Anchor::None: {
            for (std::size_t i = 0; i <= full.size(); ++i)
                if (match_atoms(rule.atoms, 0, full, i, rule.end_anchor)) return true;
            return false;
        }
    }
    return false;
}

Verdict classify_url(const RuleSet& rules, std::string_view url, const MatchContext& context) {
    for (const FilterRule& rule : rules.exception_rules)
        if (matches(rule, url, context)) return Verdict{Verdict::Kind::Excepted, rule.raw};
    for (const FilterRule& rule : rules.block_rules)
        if (matches(rule, url, context)) return Verdict{Verdict::Kind::Blocked, rule.raw};
    if (!rules.plain_domains.empty()) {
        const UrlParts parts = parse_url(url);
        const std::string reg = registrable_domain(parts.host);
        if (rules.plain_domains.count(reg) > 0) return Verdict{Verdict::Kind::Blocked, reg};
    }
    return Verdict{Verdict::Kind::Clean, ""};
}

}  // namespace mv3::abp
