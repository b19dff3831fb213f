#include "mv3/csp.hpp"

#include <algorithm>
#include <cctype>

namespace mv3::csp {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

}  // namespace

std::vector<Directive> parse(std::string_view policy) {
    std::vector<Directive> directives;
    std::size_t start = 0;
    while (start <= policy.size()) {
        std::size_t semi = policy.find(';', start);
        std::string_view part =
            semi == std::string_view::npos ? policy.substr(start) : policy.substr(start, semi - start);
        std::vector<std::string> tokens = split_ws(part);
        if (!tokens.empty()) {
            Directive d;
            d.name = to_lower(tokens.front());
            d.sources.assign(tokens.begin() + 1, tokens.end());
            directives.push_back(std::move(d));
        }
        if (semi == std::string_view::npos) break;
        start = semi + 1;
    }
    return directives;
}

std::string serialize(const std::vector<Directive>& directives) {
    std::string out;
    for (const Directive& d : directives) {
        if (!out.empty()) out += "; ";
        out += d.name;
        for (const std::string& s : d.sources) {
            out += ' ';
            out += s;
        }
    }
    return out;
}

bool directive_takes_sources(std::string_view name) { return name != "sandbox"; }

bool source_allowed_v3(std::string_view source) {
    const std::string s = to_lower(source);
    if (s == "'self'" || s == "'none'") return true;
    // Host sources: strip scheme, then the host must be localhost or
    // 127.0.0.1 (any port, any path).
    std::string_view rest = s;
    if (auto scheme = rest.find("://"); scheme != std::string_view::npos)
        rest = rest.substr(scheme + 3);
    std::size_t host_end = rest.find_first_of(":/");
    std::string_view host = rest.substr(0, host_end);
    return host == "localhost" || host == "127.0.0.1";
}

}  // namespace mv3::csp
