#include <doctest.h>

#include <algorithm>
#include <random>

#include "mv3/filter.hpp"
#include "testutil.hpp"

using namespace mv3::abp;

namespace {

FilterRule parse_one(const std::string& line) {
    auto rule = parse_rule_line(line);
    REQUIRE_MESSAGE(rule.has_value(), "expected a rule from: ", line);
    return *rule;
}

}  // namespace

TEST_CASE("parse_filter_list: comments, headers and element hiding are skipped") {
    const ParsedList parsed = parse_filter_list(
        "[Adblock Plus 2.0]\n"
        "! comment line\n"
        "\n"
        "example.com##.ad-banner\n"
        "example.com#@#.ok\n"
        "||blocked.com^\n");
    CHECK(parsed.rules.block_rules.size() == 1);
    CHECK(parsed.rules.exception_rules.empty());
    CHECK(parsed.rules.plain_domains.empty());
    CHECK(std::count_if(parsed.warnings.begin(), parsed.warnings.end(), [](const auto& w) {
              return w.code == "element_hiding_skipped";
          }) == 2);
}

TEST_CASE("parse_filter_list: plain domain lines and ABP rules partition") {
    const ParsedList parsed = parse_filter_list(
        "malicious-c2.example\n"
        "another.bad.host\n"
        "||rule.com^\n"
        "@@||good.cdn.com^$third-party\n");
    CHECK(parsed.rules.plain_domains ==
          std::set<std::string>{"malicious-c2.example", "another.bad.host"});
    CHECK(parsed.rules.block_rules.size() == 1);
    REQUIRE(parsed.rules.exception_rules.size() == 1);
    const FilterRule& exception = parsed.rules.exception_rules[0];
    CHECK(exception.exception);
    REQUIRE(exception.options.third_party.has_value());
    CHECK(*exception.options.third_party == true);
}

TEST_CASE("parse_rule_line: anchors and atoms") {
    const FilterRule domain = parse_one("||malicious_site.com^");
    CHECK(domain.anchor == FilterRule::Anchor::Domain);
    CHECK(!domain.end_anchor);
    CHECK(domain.atoms.size() == 19);  // 18 literals + separator
    CHECK(domain.atoms.back().kind == FilterRule::Atom::Kind::Separator);

    const FilterRule exact = parse_one("|https://a.b/x|");
    CHECK(exact.anchor == FilterRule::Anchor::Start);
    CHECK(exact.end_anchor);

    const FilterRule wildcard = parse_one("/banner/*/img^");
    CHECK(std::count_if(wildcard.atoms.begin(), wildcard.atoms.end(), [](const auto& a) {
              return a.kind == FilterRule::Atom::Kind::Wildcard;
          }) == 1);
}

TEST_CASE("parse_rule_line: options") {
    const FilterRule r = parse_one("||x.com^$third-party,domain=a.com|~b.com,obscure-opt=3");
    REQUIRE(r.options.third_party.has_value());
    CHECK(*r.options.third_party);
    CHECK(r.options.include_domains == std::vector<std::string>{"a.com"});
    CHECK(r.options.exclude_domains == std::vector<std::string>{"b.com"});
    CHECK(r.options.ignored == std::vector<std::string>{"obscure-opt"});

    const FilterRule neg = parse_one("||x.com^$~third-party");
    CHECK(*neg.options.third_party == false);
}

TEST_CASE("registrable_domain: suffix snapshot") {
    CHECK(registrable_domain("sub.a.example.com") == "example.com");
    CHECK(registrable_domain("example.com") == "example.com");
    CHECK(registrable_domain("b.a.co.uk") == "a.co.uk");
    CHECK(registrable_domain("x.github.io") == "x.github.io");
    CHECK(registrable_domain("deep.x.github.io") == "x.github.io");
    CHECK(registrable_domain("localhost") == "localhost");
    CHECK(registrable_domain("127.0.0.1") == "127.0.0.1");
}

// The frozen oracle suite: every pair is asserted against the expected
// boolean AND against the independent regex-automaton evaluator.
TEST_CASE("matches: frozen rule/url pairs agree with the reference evaluator") {
    struct Pair {
        const char* rule;
        const char* url;
        bool expected;
    };
    const std::vector<Pair> pairs = {
        {"||malicious_site.com^",
         "https://malicious_site.com/js/malicious_3rd_party_payload.js", true},
        {"||malicious_site.com^", "https://notmalicious_site.com/", false},
        {"|https://a.b/x|", "https://a.b/x", true},
        {"|https://a.b/x|", "https://a.b/x/y", false},
        {"|https://a.b/x", "https://a.b/x/y", true},
        {"||x.com^", "https://sub.x.com/p", true},
        {"||x.com^", "https://x.com.evil.net/", false},
        {"||x.com^", "https://x.com", true},
        {"ads", "https://site.com/ads/banner", true},
        {"ads", "https://site.com/AdS/x", true},
        {"ads", "https://site.com/nothing/here", false},
        {"/banner/*/img^", "https://x.com/banner/foo/img?x=1", true},
        {"/banner/*/img^", "https://x.com/banner/foo/imgx", false},
        {"/banner/*/img^", "https://x.com/banner/a/b/img", true},
        {"||ads.example.com", "http://ads.example.com.co/x", true},
        {"|http://x", "https://x.com", false},
        {"swf|", "http://e.com/movie.swf", true},
        {"swf|", "http://e.com/movie.swf?x=1", false},
        {"^ad^", "https://s.com/ad/x", true},
        {"^ad^", "https://s.com/bad/x", false},
        {"*", "https://anything.at/all", true},
        {"||x.com/path", "https://x.com/path/deep", true},
        {"||sub.x.com^", "https://x.com/", false},
    };
    REQUIRE(pairs.size() >= 20);
    for (const Pair& p : pairs) {
        const FilterRule rule = parse_one(p.rule);
        const bool got = matches(rule, p.url);
        const bool oracle = testutil::oracle_matches(rule, p.url);
        REQUIRE_MESSAGE(got == p.expected, "rule ", p.rule, " vs ", p.url);
        REQUIRE_MESSAGE(oracle == p.expected, "oracle disagrees for rule ", p.rule, " vs ",
                        p.url);
    }
}

TEST_CASE("matches: randomized rule/url pairs agree with the reference evaluator") {
    const std::vector<std::string> rule_pool = {
        "||evil.com^",       "|https://start",  "end.js|",      "mid*dle",
        "^sep^",             "||a.b.c^*path",   "plain",        "||x.*^",
        "*.png|",            "||evil.com^%20",  "a^b*c",
    };
    const std::vector<std::string> url_pool = {
        "https://evil.com/x.png",
        "https://start.example/end.js",
        "http://a.b.c/deep/path?q=mid%20dle",
        "https://sub.evil.com:8080/sep/x",
        "https://plain.text/a^b@c",
        "http://x.y/a/b/c.png",
    };
    for (const std::string& r : rule_pool) {
        const FilterRule rule = parse_one(r);
        for (const std::string& u : url_pool) {
            REQUIRE_MESSAGE(matches(rule, u) == testutil::oracle_matches(rule, u),
                            "divergence for rule ", r, " vs ", u);
        }
    }
}

TEST_CASE("matches: third-party option against the origin host") {
    const FilterRule third = parse_one("||tracker.com^$third-party");
    MatchContext same_site;
    same_site.origin_host = "tracker.com";
    CHECK(!matches(third, "https://tracker.com/pixel", same_site));
    MatchContext sub_site;
    sub_site.origin_host = "cdn.tracker.com";  // same registrable domain
    CHECK(!matches(third, "https://tracker.com/pixel", sub_site));
    MatchContext cross_site;
    cross_site.origin_host = "news.example";
    CHECK(matches(third, "https://tracker.com/pixel", cross_site));
    // without context the option is ignored
    CHECK(matches(third, "https://tracker.com/pixel"));

    const FilterRule first = parse_one("||tracker.com^$~third-party");
    CHECK(matches(first, "https://tracker.com/pixel", same_site));
    CHECK(!matches(first, "https://tracker.com/pixel", cross_site));
}

TEST_CASE("matches: malformed urls throw") {
    const FilterRule rule = parse_one("||x.com^");
    CHECK_THROWS_AS(matches(rule, "not a url"), mv3::MalformedUrl);
    CHECK_THROWS_AS(matches(rule, "https:///nohost"), mv3::MalformedUrl);
}

TEST_CASE("classify_url: exceptions dominate, then first matching block rule") {
    const ParsedList parsed = parse_filter_list(
        "||x.com^\n"
        "@@||x.com/safe^\n");
    const Verdict blocked = classify_url(parsed.rules, "https://x.com/a");
    CHECK(blocked.kind == Verdict::Kind::Blocked);
    CHECK(blocked.rule == "||x.com^");
    const Verdict excepted = classify_url(parsed.rules, "https://x.com/safe/r");
    CHECK(excepted.kind == Verdict::Kind::Excepted);
    CHECK(excepted.rule == "@@||x.com/safe^");
}

TEST_CASE("classify_url: plain domains block by registrable domain") {
    const ParsedList parsed = parse_filter_list("badhost.example\n");
    CHECK(classify_url(parsed.rules, "https://cdn.badhost.example/x").kind ==
          Verdict::Kind::Blocked);
    CHECK(classify_url(parsed.rules, "https://goodhost.example/x").kind == Verdict::Kind::Clean);
}

TEST_CASE("classify_url: empty ruleset is clean") {
    CHECK(classify_url(RuleSet{}, "https://anything.example/").kind == Verdict::Kind::Clean);
}

TEST_CASE("classify_url: verdict class is invariant under rule permutation") {
    const std::vector<std::string> lines = {
        "||a.com^", "||b.com^", "banner", "@@||a.com/ok^", "*.gif|", "||c.net^$third-party",
        "@@safe",   "^x^",
    };
    const std::vector<std::string> urls = {
        "https://a.com/banner.gif", "https://a.com/ok/y",    "https://b.com/",
        "https://c.net/x",          "https://safe.place/x",  "https://none.example/",
        "http://sub.a.com/x/y",
    };
    std::mt19937 rng(99);
    std::vector<std::string> shuffled = lines;
    for (int round = 0; round < 30; ++round) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::string base_text, shuffled_text;
        for (const auto& l : lines) base_text += l + "\n";
        for (const auto& l : shuffled) shuffled_text += l + "\n";
        const RuleSet base = parse_filter_list(base_text).rules;
        const RuleSet perm = parse_filter_list(shuffled_text).rules;
        for (const std::string& url : urls) {
            REQUIRE(classify_url(base, url).kind == classify_url(perm, url).kind);
        }
    }
}

TEST_CASE("serialize_rule: reparse is match-equivalent") {
    const std::vector<std::string> lines = {
        "||malicious_site.com^", "|https://a.b/x|",   "/banner/*/img^",
        "@@||good.cdn.com^$third-party", "||x.com^$domain=a.com|~b.com", "swf|",
    };
    const std::vector<std::string> urls = {
        "https://malicious_site.com/js/malicious_3rd_party_payload.js",
        "https://a.b/x",
        "https://x.com/banner/q/img/",
        "https://good.cdn.com/lib.js",
        "http://e.com/movie.swf",
    };
    for (const std::string& line : lines) {
        const FilterRule original = parse_one(line);
        const FilterRule reparsed = parse_one(serialize_rule(original));
        for (const std::string& url : urls) {
            MatchContext ctx;
            ctx.origin_host = "origin.example";
            REQUIRE(matches(original, url, ctx) == matches(reparsed, url, ctx));
        }
    }
}
