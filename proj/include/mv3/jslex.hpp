#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mv3/errors.hpp"

namespace mv3::jslex {

// Tokenizing JavaScript without parsing it: the lexer below is lossless
// (concatenating token texts reproduces the input byte-for-byte) and total
// (arbitrary input is accepted; unterminated constructs are closed at
// end-of-input with a Warning).  That is all the downstream passes need:
// they only have to know whether bytes are code or string/comment payload,
// and where dotted identifier chains sit.
//
// The classic pain point is `/`, which is either division or the start of a
// regex literal depending on parse state.  We use the previous-significant-
// token heuristic: `/` is a regex only when the preceding significant token
// cannot end an expression.  Misclassification is possible on exotic input
// (e.g. after `}`), but losslessness holds either way.

enum class TokenKind {
    Identifier,
    Punctuation,
    StringLiteral,
    TemplateLiteral,
    Numeric,
    RegexLiteral,
    Comment,
    Whitespace,
    Other,
};

struct Token {
    TokenKind kind = TokenKind::Other;
    std::string text;
    std::size_t begin = 0;  // byte offset of first byte
    std::size_t end = 0;    // byte offset one past last byte
    int line = 1;           // 1-based line of first byte
    bool unterminated = false;  // construct was force-closed at newline/end of input

    bool is_significant() const {
        return kind != TokenKind::Whitespace && kind != TokenKind::Comment;
    }
};

struct LexResult {
    std::vector<Token> tokens;
    Warnings warnings;
};

// A maximal dotted identifier chain in code context, e.g.
// `chrome.tabs.executeScript`.  Whitespace and comments may sit around the
// dots.  A lone identifier is a chain of length one.
struct ApiChain {
    std::vector<std::string> segments;
    std::vector<std::size_t> token_indices;  // index into LexResult::tokens per segment
    std::size_t begin = 0;                   // byte span covering first..last segment
    std::size_t end = 0;
    int line = 1;                            // line of the first segment

    std::string joined() const;              // "a.b.c"
};

// How occurrences are counted.  CodeOnly (the default) ignores string
// literals, template literals and comments; Permissive also scans their
// payload so the corpus numbers can be re-run without the exclusion.
enum class CountingMode { CodeOnly, Permissive };

// One located API occurrence.
struct ApiHit {
    std::string api;          // the taxonomy name that matched
    int line = 1;
    std::size_t offset = 0;   // byte offset of the first matched token
    bool alias_matched = false;  // matched via trailing segments under a different receiver
    bool excluded_context = false;  // only produced in Permissive mode
};

LexResult tokenize(std::string_view source);

std::vector<ApiChain> extract_chains(const std::vector<Token>& tokens);

// Index of the next significant token after `index`, or tokens.size().
std::size_t next_significant(const std::vector<Token>& tokens, std::size_t index);

// Located hits for the given target names.  Matching rules:
//  - "eval": a bare identifier chain [eval] immediately followed by `(`.
//  - dotted targets ("runtime.sendMessage"): any chain whose trailing
//    segments equal the target; a longer receiver (chrome./browser.) is an
//    alias match.
//  - other single names (fetch, XMLHttpRequest, webRequest, ...): every
//    chain segment equal to the name.
std::vector<ApiHit> find_api_hits(std::string_view source,
                                  const std::vector<std::string>& targets,
                                  CountingMode mode = CountingMode::CodeOnly);

// Counts per target name over one source text.  Targets absent from the
// source map to 0 so the result always has one entry per target.
std::map<std::string, int> count_api_hits(std::string_view source,
                                          const std::vector<std::string>& targets,
                                          CountingMode mode = CountingMode::CodeOnly);

// Re-emits token texts with a line break after every `;`, `{` and `}` in
// code context, comments stripped and whitespace runs collapsed to one
// space.  Idempotent and deterministic.
std::string normalize_lines(std::string_view source);

// Minimal line edit distance (insertions + deletions) between two line
// vectors, via Myers' greedy diff.
std::size_t line_diff(const std::vector<std::string>& from, const std::vector<std::string>& to);

// Lines-of-code-changed metric: 0 when `converted` is byte-identical to
// `original`, otherwise the line diff between the raw original and
// normalize_lines(converted).  Touching a minified one-liner therefore
// counts every statement of it, which is the intended inflation.
std::size_t loc_changed(std::string_view original, std::string_view converted);

// Splits into lines on '\n', dropping a trailing '\r' per line.  A final
// newline does not create an empty trailing line.
std::vector<std::string> split_lines(std::string_view text);

}  // namespace mv3::jslex
