#include "mv3/js_analysis.hpp"

#include <algorithm>
#include <cctype>

namespace mv3::analysis {

using jslex::ApiChain;
using jslex::Token;
using jslex::TokenKind;

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

struct Walker {
    const std::vector<Token>& tokens;
    std::vector<std::size_t> sig;                 // indices of significant tokens
    std::vector<std::ptrdiff_t> chain_of;         // token index -> chain index or -1
    std::vector<std::size_t> seg_of;              // token index -> segment position
    const std::vector<ApiChain>& chains;

    Walker(const std::vector<Token>& toks, const std::vector<ApiChain>& ch)
        : tokens(toks), chains(ch) {
        for (std::size_t i = 0; i < tokens.size(); ++i)
            if (tokens[i].is_significant()) sig.push_back(i);
        chain_of.assign(tokens.size(), -1);
        seg_of.assign(tokens.size(), 0);
        for (std::size_t c = 0; c < chains.size(); ++c)
            for (std::size_t s = 0; s < chains[c].token_indices.size(); ++s) {
                chain_of[chains[c].token_indices[s]] = static_cast<std::ptrdiff_t>(c);
                seg_of[chains[c].token_indices[s]] = s;
            }
    }

    const Token& tok(std::size_t sig_pos) const { return tokens[sig[sig_pos]]; }

    bool is_punct(std::size_t sig_pos, std::string_view text) const {
        return sig_pos < sig.size() && tok(sig_pos).kind == TokenKind::Punctuation &&
               tok(sig_pos).text == text;
    }

    // Significant-token range [open+1, close) of a balanced parenthesis
    // group starting at sig_pos (which must be '('), or nullopt if unclosed.
    std::optional<std::pair<std::size_t, std::size_t>> arg_range(std::size_t sig_pos) const {
        if (!is_punct(sig_pos, "(")) return std::nullopt;
        int depth = 0;
        for (std::size_t p = sig_pos; p < sig.size(); ++p) {
            if (is_punct(p, "(")) ++depth;
            if (is_punct(p, ")")) {
                --depth;
                if (depth == 0) return std::make_pair(sig_pos + 1, p);
            }
        }
        return std::nullopt;
    }

    bool args_contain_string(std::size_t open, std::string_view value, bool ci) const {
        auto range = arg_range(open);
        if (!range) return false;
        for (std::size_t p = range->first; p < range->second; ++p) {
            const Token& t = tok(p);
            if (t.kind != TokenKind::StringLiteral) continue;
            const std::string v = unquote(t.text);
            if (ci ? iequals(v, value) : v == value) return true;
        }
        return false;
    }

    bool args_contain_property(std::size_t open, std::string_view name) const {
        auto range = arg_range(open);
        if (!range) return false;
        for (std::size_t p = range->first; p < range->second; ++p) {
            const Token& t = tok(p);
            const bool key_like =
                (t.kind == TokenKind::Identifier && t.text == name) ||
                (t.kind == TokenKind::StringLiteral && unquote(t.text) == name);
            if (key_like && is_punct(p + 1, ":")) return true;
        }
        return false;
    }
};

}  // namespace

std::string unquote(std::string_view literal) {
    if (literal.size() >= 2 && (literal.front() == '"' || literal.front() == '\'') &&
        literal.back() == literal.front())
        literal = literal.substr(1, literal.size() - 2);
    std::string out;
    out.reserve(literal.size());
    for (std::size_t i = 0; i < literal.size(); ++i) {
        if (literal[i] == '\\' && i + 1 < literal.size()) {
            const char c = literal[++i];
            switch (c) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '0': out += '\0'; break;
                default: out += c; break;
            }
        } else {
            out += literal[i];
        }
    }
    return out;
}

bool starts_with_remote_scheme(std::string_view value) {
    return value.rfind("http://", 0) == 0 || value.rfind("https://", 0) == 0 ||
           value.rfind("//", 0) == 0;
}

bool fragment_has_remote_scheme(std::string_view fragment) {
    return fragment.find("http:") != std::string_view::npos ||
           fragment.find("https:") != std::string_view::npos || fragment.rfind("//", 0) == 0;
}

std::optional<std::pair<std::size_t, std::size_t>> call_arg_span(
    const std::vector<Token>& tokens, std::size_t last_chain_token) {
    const std::size_t open = jslex::next_significant(tokens, last_chain_token);
    if (open >= tokens.size() || tokens[open].kind != TokenKind::Punctuation ||
        tokens[open].text != "(")
        return std::nullopt;
    int depth = 0;
    for (std::size_t i = open; i < tokens.size(); ++i) {
        if (tokens[i].kind != TokenKind::Punctuation) continue;
        if (tokens[i].text == "(") ++depth;
        if (tokens[i].text == ")") {
            --depth;
            if (depth == 0) return std::make_pair(open, i);
        }
    }
    return std::nullopt;
}

bool span_has_property_key(const std::vector<Token>& tokens,
                           std::pair<std::size_t, std::size_t> span, std::string_view name) {
    for (std::size_t i = span.first + 1; i < span.second; ++i) {
        const Token& t = tokens[i];
        const bool key_like = (t.kind == TokenKind::Identifier && t.text == name) ||
                              (t.kind == TokenKind::StringLiteral && unquote(t.text) == name);
        if (!key_like) continue;
        const std::size_t next = jslex::next_significant(tokens, i);
        if (next < tokens.size() && tokens[next].kind == TokenKind::Punctuation &&
            tokens[next].text == ":")
            return true;
    }
    return false;
}

JsFacts analyze_js(std::string_view source) {
    JsFacts facts;
    facts.lex = jslex::tokenize(source);
    facts.chains = jslex::extract_chains(facts.lex.tokens);
    Walker w(facts.lex.tokens, facts.chains);

    // Pass 1: unique literal bindings (`x = "value"` outside member access,
    // with a fully literal right-hand side).
    std::map<std::string, std::optional<std::string>> candidates;
    for (std::size_t p = 0; p < w.sig.size(); ++p) {
        const Token& t = w.tok(p);
        if (t.kind != TokenKind::Identifier) continue;
        if (p > 0 && w.is_punct(p - 1, ".")) continue;  // property, not a variable
        if (!w.is_punct(p + 1, "=") || w.is_punct(p + 2, "=")) continue;
        // RHS must be a pure literal concatenation.
        std::string value;
        bool literal = false;
        std::size_t q = p + 2;
        while (q < w.sig.size()) {
            const Token& rhs = w.tok(q);
            if (rhs.kind != TokenKind::StringLiteral) {
                literal = false;
                break;
            }
            value += unquote(rhs.text);
            literal = true;
            if (w.is_punct(q + 1, "+")) {
                q += 2;
                continue;
            }
            break;
        }
        if (!literal) continue;
        auto it = candidates.find(t.text);
        if (it == candidates.end())
            candidates.emplace(t.text, value);
        else if (!it->second.has_value() || *it->second != value)
            it->second = std::nullopt;  // conflicting bindings: unusable
    }
    for (const auto& [name, value] : candidates)
        if (value.has_value()) facts.bindings.emplace(name, *value);

    // Pass 2: concatenation groups.  An operand is a string literal, a
    // numeric literal, a template literal or a whole member chain; groups
    // are maximal runs joined by '+'.
    auto operand_start = [&](std::size_t p) -> bool {
        if (p >= w.sig.size()) return false;
        const Token& t = w.tok(p);
        if (t.kind == TokenKind::StringLiteral || t.kind == TokenKind::Numeric ||
            t.kind == TokenKind::TemplateLiteral)
            return true;
        if (t.kind == TokenKind::Identifier) {
            const std::ptrdiff_t c = w.chain_of[w.sig[p]];
            return c >= 0 && w.seg_of[w.sig[p]] == 0;
        }
        return false;
    };
    // Consumes one operand at sig position p, returns the next sig position.
    auto read_operand = [&](std::size_t p, ConcatGroup& g, bool& unresolved) -> std::size_t {
        const Token& t = w.tok(p);
        ++g.operand_count;
        if (t.kind == TokenKind::StringLiteral) {
            ++g.literal_count;
            const std::string frag = unquote(t.text);
            if (fragment_has_remote_scheme(frag)) g.has_remote_scheme = true;
            g.value += frag;
            return p + 1;
        }
        if (t.kind == TokenKind::Identifier) {
            const auto& chain = facts.chains[static_cast<std::size_t>(w.chain_of[w.sig[p]])];
            if (chain.segments.size() == 1) {
                auto it = facts.bindings.find(chain.segments[0]);
                if (it != facts.bindings.end()) {
                    if (fragment_has_remote_scheme(it->second)) g.has_remote_scheme = true;
                    g.value += it->second;
                } else {
                    unresolved = true;
                }
            } else {
                unresolved = true;  // member chain: opaque operand
            }
            const std::size_t last = chain.token_indices.back();
            std::size_t q = p;
            while (q < w.sig.size() && w.sig[q] <= last) ++q;
            return q;
        }
        unresolved = true;  // numeric / template literal: opaque
        return p + 1;
    };

    std::vector<char> group_member(w.sig.size(), 0);
    std::vector<ConcatGroup> groups;
    std::vector<std::pair<std::size_t, std::size_t>> group_spans;  // sig range per group
    for (std::size_t p = 0; p < w.sig.size();) {
        if (!operand_start(p) || group_member[p] || (p > 0 && w.is_punct(p - 1, "."))) {
            ++p;
            continue;
        }
        ConcatGroup g;
        g.line = w.tok(p).line;
        g.offset = w.tok(p).begin;
        bool unresolved = false;
        std::size_t q = p;
        const std::size_t span_begin = p;
        while (true) {
            q = read_operand(q, g, unresolved);
            if (w.is_punct(q, "+") && operand_start(q + 1)) {
                q += 1;
                continue;
            }
            break;
        }
        for (std::size_t m = span_begin; m < q && m < w.sig.size(); ++m) group_member[m] = 1;
        g.fully_resolved = !unresolved;
        if (g.literal_count >= 1) {
            group_spans.emplace_back(span_begin, q);
            groups.push_back(g);
        }
        p = q;
    }
    facts.string_groups = groups;

    // Pass 3: `.src =` assignments reuse the group spans.
    for (std::size_t p = 0; p + 2 < w.sig.size(); ++p) {
        if (!w.is_punct(p, ".")) continue;
        const Token& name = w.tok(p + 1);
        if (name.kind != TokenKind::Identifier || name.text != "src") continue;
        if (!w.is_punct(p + 2, "=") || w.is_punct(p + 3, "=")) continue;
        const std::size_t rhs = p + 3;
        bool found = false;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            if (group_spans[gi].first == rhs) {
                facts.src_assignments.push_back(groups[gi]);
                found = true;
                break;
            }
        }
        if (!found) {
            // opaque RHS (call, member chain, ...): keep an empty record so
            // callers still see the assignment site
            ConcatGroup g;
            g.line = name.line;
            g.offset = name.begin;
            facts.src_assignments.push_back(g);
        }
    }

    // Pass 4: chain-driven call-site facts.
    for (const ApiChain& chain : facts.chains) {
        const std::size_t last_tok = chain.token_indices.back();
        // sig position of the token after the chain
        std::size_t after = 0;
        while (after < w.sig.size() && w.sig[after] <= last_tok) ++after;
        const bool called = w.is_punct(after, "(");

        if (chain.segments.size() == 1 && chain.segments[0] == "eval" && called)
            facts.eval_call_lines.push_back(chain.line);

        if (called && std::find(chain.segments.begin(), chain.segments.end(), "webRequest") !=
                          chain.segments.end()) {
            if (w.args_contain_string(after, "blocking", false))
                facts.webrequest_blocking_lines.push_back(chain.line);
        }

        if (called && chain.segments.back() == "createElement" &&
            w.args_contain_string(after, "script", true))
            facts.create_element_script_lines.push_back(chain.line);

        if (called &&
            (chain.segments.back() == "appendChild" || chain.segments.back() == "append"))
            facts.append_lines.push_back(chain.line);

        if (chain.segments.size() >= 2 && chain.segments[0] == "document")
            facts.document_chain_lines.push_back(chain.line);
    }

    // new Function( sites
    for (std::size_t p = 0; p + 2 < w.sig.size(); ++p) {
        const Token& t = w.tok(p);
        if (t.kind == TokenKind::Identifier && t.text == "new" &&
            w.tok(p + 1).kind == TokenKind::Identifier && w.tok(p + 1).text == "Function" &&
            w.is_punct(p + 2, "("))
            facts.new_function_lines.push_back(t.line);
    }

    return facts;
}

}  // namespace mv3::analysis
