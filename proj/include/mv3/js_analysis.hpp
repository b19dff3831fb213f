#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mv3/jslex.hpp"

namespace mv3::analysis {

// A maximal `+`-concatenation of single-token operands containing at least
// one string literal, e.g. `"https:" + site + "/payload.js"`.  Identifiers
// resolve through unique file-local literal bindings; anything else leaves
// the group partially resolved.
struct ConcatGroup {
    int line = 1;
    std::size_t offset = 0;
    std::size_t operand_count = 0;
    std::size_t literal_count = 0;
    bool fully_resolved = false;
    bool has_remote_scheme = false;  // a fragment carries http:/https: or leads with //
    std::string value;               // resolved fragments concatenated in order
};

// Everything the blocker/injection/request-target passes need to know
// about one JS source, computed in a single walk.
struct JsFacts {
    jslex::LexResult lex;
    std::vector<jslex::ApiChain> chains;
    std::map<std::string, std::string> bindings;  // identifiers with one literal value
    std::vector<ConcatGroup> string_groups;
    std::vector<ConcatGroup> src_assignments;      // RHS of `<expr>.src = ...`
    std::vector<int> eval_call_lines;              // bare eval(
    std::vector<int> new_function_lines;           // new Function(
    std::vector<int> webrequest_blocking_lines;    // webRequest call with "blocking" in args
    std::vector<int> create_element_script_lines;  // createElement("script") call sites
    std::vector<int> append_lines;                 // appendChild(/append( call sites
    std::vector<int> document_chain_lines;         // document.* member chains
};

JsFacts analyze_js(std::string_view source);

// String literal token text -> value: quotes stripped, simple escapes decoded.
std::string unquote(std::string_view literal);

bool starts_with_remote_scheme(std::string_view value);     // http://, https:// or //
bool fragment_has_remote_scheme(std::string_view fragment); // contains http:/https: or leads with //

// Raw-token span (open_paren_index, close_paren_index) of the call argument
// list following the chain whose last segment token sits at `last_chain_token`,
// or nullopt when the chain is not immediately called.
std::optional<std::pair<std::size_t, std::size_t>> call_arg_span(
    const std::vector<jslex::Token>& tokens, std::size_t last_chain_token);

// True when the token span contains `name` used as an object property key
// (identifier or quoted string followed by ':').
bool span_has_property_key(const std::vector<jslex::Token>& tokens,
                           std::pair<std::size_t, std::size_t> span, std::string_view name);

}  // namespace mv3::analysis
