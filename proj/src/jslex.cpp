#include "mv3/jslex.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

namespace mv3::jslex {

namespace {

bool is_ident_start(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$' || c >= 0x80;
}

bool is_ident_char(unsigned char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9');
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

// Keywords after which a `/` starts a regex literal rather than division.
const std::unordered_set<std::string_view>& regex_keywords() {
    static const std::unordered_set<std::string_view> kw = {
        "return", "typeof", "instanceof", "in", "of", "new", "delete", "void",
        "throw", "case", "do", "else", "yield", "await",
    };
    return kw;
}

// Decides whether a `/` at the current position opens a regex literal,
// given the previous significant token (or nullptr at start of input).
bool regex_context(const Token* prev) {
    if (prev == nullptr) return true;
    switch (prev->kind) {
        case TokenKind::Identifier:
            return regex_keywords().count(prev->text) > 0;
        case TokenKind::Punctuation:
            // After a closing delimiter a slash is division; `}` is ambiguous
            // (block vs object literal) and we default to division.
            return prev->text != ")" && prev->text != "]" && prev->text != "}";
        case TokenKind::Numeric:
        case TokenKind::StringLiteral:
        case TokenKind::TemplateLiteral:
        case TokenKind::RegexLiteral:
        case TokenKind::Other:
            return false;
        default:
            return true;
    }
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    LexResult run() {
        LexResult result;
        while (pos_ < src_.size()) {
            const std::size_t start = pos_;
            const int start_line = line_;
            unterminated_ = false;
            const TokenKind kind = scan(result.warnings);
            Token tok;
            tok.kind = kind;
            tok.begin = start;
            tok.end = pos_;
            tok.line = start_line;
            tok.unterminated = unterminated_;
            tok.text.assign(src_.substr(start, pos_ - start));
            if (tok.is_significant()) prev_significant_ = tok;
            result.tokens.push_back(std::move(tok));
        }
        return result;
    }

private:
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void advance() {
        if (src_[pos_] == '\n') ++line_;
        ++pos_;
    }

    void warn(Warnings& out, const std::string& code, const std::string& message) {
        unterminated_ = true;
        out.push_back(Warning{code, message, "", line_});
    }

    TokenKind scan(Warnings& warnings) {
        const unsigned char c = static_cast<unsigned char>(src_[pos_]);
        if (is_space(c)) {
            while (pos_ < src_.size() && is_space(static_cast<unsigned char>(src_[pos_]))) advance();
            return TokenKind::Whitespace;
        }
        if (c == '/' && peek(1) == '/') return scan_line_comment();
        if (c == '/' && peek(1) == '*') return scan_block_comment(warnings);
        if (c == '\'' || c == '"') return scan_string(warnings);
        if (c == '`') return scan_template(warnings);
        if (is_digit(c) || (c == '.' && is_digit(static_cast<unsigned char>(peek(1)))))
            return scan_numeric();
        if (is_ident_start(c)) {
            while (pos_ < src_.size() && is_ident_char(static_cast<unsigned char>(src_[pos_]))) advance();
            return TokenKind::Identifier;
        }
        if (c == '/' && regex_context(prev_significant_ ? &*prev_significant_ : nullptr))
            return scan_regex(warnings);
        static const std::string_view punct = "(){}[];,.<>=!+-*/%&|^~?:";
        advance();
        return punct.find(static_cast<char>(c)) != std::string_view::npos ? TokenKind::Punctuation
                                                                          : TokenKind::Other;
    }

    TokenKind scan_line_comment() {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        return TokenKind::Comment;
    }

    TokenKind scan_block_comment(Warnings& warnings) {
        advance();  // '/'
        advance();  // '*'
        while (pos_ < src_.size()) {
            if (src_[pos_] == '*' && peek(1) == '/') {
                advance();
                advance();
                return TokenKind::Comment;
            }
            advance();
        }
        warn(warnings, "unterminated_comment", "block comment closed at end of input");
        return TokenKind::Comment;
    }

    // Single- or double-quoted string.  A raw newline already terminates the
    // literal in real JavaScript, so we close there instead of swallowing
    // the rest of the file.
    TokenKind scan_string(Warnings& warnings) {
        const char quote = src_[pos_];
        advance();
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '\\' && pos_ + 1 < src_.size()) {
                advance();
                advance();
                continue;
            }
            if (c == quote) {
                advance();
                return TokenKind::StringLiteral;
            }
            if (c == '\n') {
                warn(warnings, "unterminated_string", "string literal closed at line break");
                return TokenKind::StringLiteral;
            }
            advance();
        }
        warn(warnings, "unterminated_string", "string literal closed at end of input");
        return TokenKind::StringLiteral;
    }

    // Template literal.  `${...}` substitutions are treated as opaque text
    // tracked only by brace depth; the whole literal is one token.
    TokenKind scan_template(Warnings& warnings) {
        advance();  // '`'
        int brace_depth = 0;
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '\\' && pos_ + 1 < src_.size()) {
                advance();
                advance();
                continue;
            }
            if (c == '$' && peek(1) == '{') {
                ++brace_depth;
                advance();
                advance();
                continue;
            }
            if (c == '}' && brace_depth > 0) {
                --brace_depth;
                advance();
                continue;
            }
            if (c == '`' && brace_depth == 0) {
                advance();
                return TokenKind::TemplateLiteral;
            }
            advance();
        }
        warn(warnings, "unterminated_template", "template literal closed at end of input");
        return TokenKind::TemplateLiteral;
    }

    TokenKind scan_regex(Warnings& warnings) {
        advance();  // '/'
        bool in_class = false;
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '\\' && pos_ + 1 < src_.size()) {
                advance();
                advance();
                continue;
            }
            if (c == '\n') {
                warn(warnings, "unterminated_regex", "regex literal closed at line break");
                return TokenKind::RegexLiteral;
            }
            if (c == '[') in_class = true;
            if (c == ']') in_class = false;
            if (c == '/' && !in_class) {
                advance();
                while (pos_ < src_.size() &&
                       is_ident_char(static_cast<unsigned char>(src_[pos_])))
                    advance();
                return TokenKind::RegexLiteral;
            }
            advance();
        }
        warn(warnings, "unterminated_regex", "regex literal closed at end of input");
        return TokenKind::RegexLiteral;
    }

    TokenKind scan_numeric() {
        const char c0 = src_[pos_];
        if (c0 == '0' && (peek(1) == 'x' || peek(1) == 'X' || peek(1) == 'b' || peek(1) == 'B' ||
                          peek(1) == 'o' || peek(1) == 'O')) {
            advance();
            advance();
            while (pos_ < src_.size()) {
                const unsigned char c = static_cast<unsigned char>(src_[pos_]);
                if (is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F') || c == '_')
                    advance();
                else
                    break;
            }
        } else {
            auto digits = [&] {
                while (pos_ < src_.size() &&
                       (is_digit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    advance();
            };
            digits();
            if (peek() == '.' && peek(1) != '.') {
                advance();  // fraction part, or a trailing dot as in `1.`
                digits();
            }
            if (peek() == 'e' || peek() == 'E') {
                const char sign = peek(1);
                const char after = peek(2);
                if (is_digit(static_cast<unsigned char>(sign)) ||
                    ((sign == '+' || sign == '-') && is_digit(static_cast<unsigned char>(after)))) {
                    advance();
                    if (!is_digit(static_cast<unsigned char>(src_[pos_]))) advance();
                    digits();
                }
            }
        }
        if (peek() == 'n') advance();  // BigInt suffix
        return TokenKind::Numeric;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    bool unterminated_ = false;
    std::optional<Token> prev_significant_;
};

}  // namespace

LexResult tokenize(std::string_view source) { return Lexer(source).run(); }

std::string ApiChain::joined() const {
    std::string out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i) out += '.';
        out += segments[i];
    }
    return out;
}

std::size_t next_significant(const std::vector<Token>& tokens, std::size_t index) {
    for (std::size_t i = index + 1; i < tokens.size(); ++i)
        if (tokens[i].is_significant()) return i;
    return tokens.size();
}

std::vector<ApiChain> extract_chains(const std::vector<Token>& tokens) {
    std::vector<ApiChain> chains;
    ApiChain current;
    bool pending_dot = false;

    auto flush = [&] {
        if (!current.segments.empty()) chains.push_back(std::move(current));
        current = ApiChain{};
        pending_dot = false;
    };

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (!t.is_significant()) continue;
        if (t.kind == TokenKind::Identifier) {
            if (pending_dot && !current.segments.empty()) {
                current.segments.push_back(t.text);
                current.token_indices.push_back(i);
                current.end = t.end;
                pending_dot = false;
            } else {
                flush();
                current.segments.push_back(t.text);
                current.token_indices.push_back(i);
                current.begin = t.begin;
                current.end = t.end;
                current.line = t.line;
            }
        } else if (t.kind == TokenKind::Punctuation && t.text == ".") {
            if (!current.segments.empty() && !pending_dot)
                pending_dot = true;
            else
                flush();
        } else {
            flush();
        }
    }
    flush();
    return chains;
}

namespace {

struct TargetSpec {
    std::string name;
    std::vector<std::string> segments;  // size 1 for plain names
    bool bare_eval = false;             // chain must be exactly [eval] followed by '('
};

std::vector<TargetSpec> build_targets(const std::vector<std::string>& targets) {
    std::vector<TargetSpec> specs;
    specs.reserve(targets.size());
    for (const auto& t : targets) {
        TargetSpec s;
        s.name = t;
        std::size_t start = 0;
        for (std::size_t dot = t.find('.'); dot != std::string::npos; dot = t.find('.', start)) {
            s.segments.push_back(t.substr(start, dot - start));
            start = dot + 1;
        }
        s.segments.push_back(t.substr(start));
        s.bare_eval = (t == "eval");
        specs.push_back(std::move(s));
    }
    return specs;
}

int line_at_offset(const Token& tok, std::size_t offset_in_token) {
    int line = tok.line;
    for (std::size_t i = 0; i < offset_in_token && i < tok.text.size(); ++i)
        if (tok.text[i] == '\n') ++line;
    return line;
}

// Substring occurrences with identifier-boundary checks, used only in
// Permissive mode on string/comment payloads.
void scan_excluded_context(const Token& tok, const TargetSpec& spec, std::vector<ApiHit>& out) {
    const std::string& hay = tok.text;
    const std::string& needle = spec.name;
    if (needle.empty()) return;
    std::size_t pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_ident_char(static_cast<unsigned char>(hay[pos - 1]));
        const std::size_t after = pos + needle.size();
        const bool right_ok =
            after >= hay.size() || !is_ident_char(static_cast<unsigned char>(hay[after]));
        if (left_ok && right_ok) {
            ApiHit hit;
            hit.api = spec.name;
            hit.offset = tok.begin + pos;
            hit.line = line_at_offset(tok, pos);
            hit.excluded_context = true;
            out.push_back(std::move(hit));
        }
        pos += needle.size();
    }
}

}  // namespace

std::vector<ApiHit> find_api_hits(std::string_view source,
                                  const std::vector<std::string>& targets,
                                  CountingMode mode) {
    const LexResult lexed = tokenize(source);
    const std::vector<ApiChain> chains = extract_chains(lexed.tokens);
    const std::vector<TargetSpec> specs = build_targets(targets);
    std::vector<ApiHit> hits;

    for (const ApiChain& chain : chains) {
        for (const TargetSpec& spec : specs) {
            if (spec.bare_eval) {
                if (chain.segments.size() == 1 && chain.segments[0] == "eval") {
                    const std::size_t after =
                        next_significant(lexed.tokens, chain.token_indices.back());
                    if (after < lexed.tokens.size() &&
                        lexed.tokens[after].kind == TokenKind::Punctuation &&
                        lexed.tokens[after].text == "(") {
                        hits.push_back(ApiHit{spec.name, chain.line, chain.begin, false, false});
                    }
                }
            } else if (spec.segments.size() > 1) {
                const std::size_t n = chain.segments.size();
                const std::size_t m = spec.segments.size();
                if (n >= m && std::equal(spec.segments.begin(), spec.segments.end(),
                                         chain.segments.begin() + (n - m))) {
                    const Token& first = lexed.tokens[chain.token_indices[n - m]];
                    const bool alias = n > m && chain.segments[n - m - 1] != "chrome";
                    hits.push_back(ApiHit{spec.name, first.line, first.begin, alias, false});
                }
            } else {
                for (std::size_t i = 0; i < chain.segments.size(); ++i) {
                    if (chain.segments[i] == spec.name) {
                        const Token& tok = lexed.tokens[chain.token_indices[i]];
                        hits.push_back(ApiHit{spec.name, tok.line, tok.begin, i > 0, false});
                    }
                }
            }
        }
    }

    if (mode == CountingMode::Permissive) {
        for (const Token& tok : lexed.tokens) {
            if (tok.kind != TokenKind::StringLiteral && tok.kind != TokenKind::TemplateLiteral &&
                tok.kind != TokenKind::Comment)
                continue;
            for (const TargetSpec& spec : specs) scan_excluded_context(tok, spec, hits);
        }
    }

    std::sort(hits.begin(), hits.end(), [](const ApiHit& a, const ApiHit& b) {
        return a.offset != b.offset ? a.offset < b.offset : a.api < b.api;
    });
    return hits;
}

std::map<std::string, int> count_api_hits(std::string_view source,
                                          const std::vector<std::string>& targets,
                                          CountingMode mode) {
    std::map<std::string, int> counts;
    for (const auto& t : targets) counts[t] = 0;
    for (const ApiHit& hit : find_api_hits(source, targets, mode)) ++counts[hit.api];
    return counts;
}

std::string normalize_lines(std::string_view source) {
    const LexResult lexed = tokenize(source);
    std::string out;
    out.reserve(source.size());
    const Token* prev = nullptr;
    bool separated = false;

    auto is_break = [](const Token& t) {
        return t.kind == TokenKind::Punctuation &&
               (t.text == ";" || t.text == "{" || t.text == "}");
    };

    for (const Token& t : lexed.tokens) {
        if (!t.is_significant()) {
            if (prev != nullptr) separated = true;
            continue;
        }
        if (prev != nullptr) {
            if (is_break(*prev) || prev->unterminated)
                out += '\n';
            else if (separated)
                out += ' ';
        }
        out += t.text;
        prev = &t;
        separated = false;
    }
    if (prev != nullptr && is_break(*prev)) out += '\n';
    return out;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) {
                std::string_view rest = text.substr(start);
                if (!rest.empty() && rest.back() == '\r') rest.remove_suffix(1);
                lines.emplace_back(rest);
            }
            break;
        }
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    return lines;
}

std::size_t line_diff(const std::vector<std::string>& from, const std::vector<std::string>& to) {
    // Intern lines so the inner loop compares ints.
    std::unordered_map<std::string, int> ids;
    auto intern = [&](const std::vector<std::string>& lines) {
        std::vector<int> out;
        out.reserve(lines.size());
        for (const auto& l : lines) {
            auto [it, _] = ids.emplace(l, static_cast<int>(ids.size()));
            out.push_back(it->second);
        }
        return out;
    };
    std::vector<int> a = intern(from);
    std::vector<int> b = intern(to);

    // Trim common prefix and suffix.
    std::size_t lo = 0;
    while (lo < a.size() && lo < b.size() && a[lo] == b[lo]) ++lo;
    std::size_t ahi = a.size(), bhi = b.size();
    while (ahi > lo && bhi > lo && a[ahi - 1] == b[bhi - 1]) {
        --ahi;
        --bhi;
    }
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(ahi - lo);
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(bhi - lo);
    if (n == 0) return static_cast<std::size_t>(m);
    if (m == 0) return static_cast<std::size_t>(n);

    // Myers' greedy shortest edit script, distance only.
    const std::ptrdiff_t max = n + m;
    std::vector<std::ptrdiff_t> v(static_cast<std::size_t>(2 * max + 1), 0);
    auto at = [&](std::ptrdiff_t k) -> std::ptrdiff_t& { return v[static_cast<std::size_t>(k + max)]; };
    for (std::ptrdiff_t d = 0; d <= max; ++d) {
        for (std::ptrdiff_t k = -d; k <= d; k += 2) {
            std::ptrdiff_t x;
            if (k == -d || (k != d && at(k - 1) < at(k + 1)))
                x = at(k + 1);
            else
                x = at(k - 1) + 1;
            std::ptrdiff_t y = x - k;
            while (x < n && y < m && a[lo + static_cast<std::size_t>(x)] == b[lo + static_cast<std::size_t>(y)]) {
                ++x;
                ++y;
            }
            at(k) = x;
            if (x >= n && y >= m) return static_cast<std::size_t>(d);
        }
    }
    return static_cast<std::size_t>(max);
}

std::size_t loc_changed(std::string_view original, std::string_view converted) {
    if (original == converted) return 0;
    return line_diff(split_lines(original), split_lines(normalize_lines(converted)));
}

}  // namespace mv3::jslex
