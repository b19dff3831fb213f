// Acceptance suite: runs every acceptance criterion and prints one
// PASS/FAIL line per criterion.  Exits non-zero if any criterion fails.
//
// Golden files for the conversion suite live under tests/golden/convert and
// can be regenerated with MV3_UPDATE_GOLDENS=1.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "mv3/classify.hpp"
#include "mv3/convert.hpp"
#include "mv3/filter.hpp"
#include "mv3/jslex.hpp"
#include "mv3/model.hpp"
#include "mv3/scan.hpp"
#include "mv3/stats.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using namespace mv3;

namespace {

struct CheckFailure {
    std::string detail;
};

void expect(bool condition, const std::string& detail) {
    if (!condition) throw CheckFailure{detail};
}

const fs::path kFixtures = FIXTURES_DIR;
const fs::path kGolden = GOLDEN_DIR;

// --- criterion 1 ---------------------------------------------------------

void criterion_percentages() {
    struct Row {
        std::uint64_t num, den;
        const char* expected;
    };
    const std::vector<Row> rows = {
        {454, 517, "87.8"},  {340, 517, "65.8"},  {312, 517, "60.3"}, {112, 517, "21.7"},
        {69, 517, "13.3"},   {88, 517, "17.0"},   {21, 517, "4.1"},   {85, 517, "16.4"},
        {35, 517, "6.8"},    {154, 517, "29.8"},  {363, 517, "70.2"}, {290, 517, "56.1"},
        {227, 517, "43.9"},  {2649, 3128, "84.7"}, {479, 3128, "15.3"},
    };
    for (const Row& r : rows) {
        const std::string got = stats::format_percent(stats::percent_tenths(r.num, r.den));
        expect(got == r.expected, std::to_string(r.num) + "/" + std::to_string(r.den) + " -> " +
                                      got + ", expected " + r.expected);
    }
}

// --- criterion 2 ---------------------------------------------------------

void criterion_poc() {
    const ExtensionPackage pkg = load_package(kFixtures / "poc" /
                                              "pocpocpocpocpocpocpocpocpocpocpo");
    const auto findings = detect_war_injection(pkg);
    expect(findings.size() == 1,
           "expected exactly one WarInjectionFinding, got " + std::to_string(findings.size()));
    expect(findings[0].remote_host_expression.find("//malicious_site.com") != std::string::npos,
           "remote host expression missed //malicious_site.com: " +
               findings[0].remote_host_expression);

    const abp::RuleSet rules = abp::parse_filter_list("||malicious_site.com^\n").rules;
    PackageMetadata metadata;
    metadata.has_prior_report = true;
    metadata.removed_from_store = true;
    metadata.labels = {MaliciousLabel::UserDataAnalytics};
    ConversionReport conversion;
    conversion.status = ConversionReport::Status::Success;
    const ActivityVerdict verdict = classify(pkg, conversion, rules, metadata);
    expect(verdict.criteria.contacts_malicious_url, "PoC target was not blocked by the rule");
    expect(verdict.functionally_active, "PoC fixture must classify as functionally active");
}

// --- criterion 3 ---------------------------------------------------------

void compare_or_update(const fs::path& golden_path, const std::string& actual,
                       bool update, std::vector<std::string>& mismatches) {
    if (update) {
        testutil::write_file(golden_path, actual);
        return;
    }
    if (!fs::exists(golden_path)) {
        mismatches.push_back("missing golden file: " + golden_path.string());
        return;
    }
    if (testutil::read_file(golden_path) != actual)
        mismatches.push_back("golden mismatch: " + golden_path.string());
}

void criterion_conversion_goldens() {
    const bool update = std::getenv("MV3_UPDATE_GOLDENS") != nullptr;
    std::vector<fs::path> fixtures;
    for (const auto& entry : fs::directory_iterator(kFixtures / "convert"))
        if (entry.is_directory()) fixtures.push_back(entry.path());
    std::sort(fixtures.begin(), fixtures.end());
    expect(fixtures.size() >= 10,
           "need at least 10 conversion fixtures, found " + std::to_string(fixtures.size()));

    std::vector<std::string> mismatches;
    for (const fs::path& fixture : fixtures) {
        const std::string name = fixture.filename().string();
        const ExtensionPackage pkg = load_package(fixture);
        const ConvertedPackage converted = convert_package(pkg);

        if (converted.report.blockers.empty()) {
            expect(validate_v3(converted.package.manifest).empty(),
                   name + ": blocker-free conversion must pass validate_v3");
            expect(converted.report.status == ConversionReport::Status::Success,
                   name + ": blocker-free conversion must be a Success");
        } else {
            expect(converted.report.status == ConversionReport::Status::Fail,
                   name + ": blockers must force Fail");
        }

        const fs::path golden_dir = kGolden / name;
        compare_or_update(golden_dir / "conversion_report.json",
                          conversion_report_to_json(converted.report).dump(2) + "\n", update,
                          mismatches);
        for (const auto& [path, content] : converted.package.files)
            compare_or_update(golden_dir / "pkg" / path, content, update, mismatches);
        if (!update && fs::exists(golden_dir / "pkg")) {
            // no stray files beyond what the converter produced
            for (const auto& entry : fs::recursive_directory_iterator(golden_dir / "pkg")) {
                if (!entry.is_regular_file()) continue;
                const std::string rel =
                    entry.path().lexically_relative(golden_dir / "pkg").generic_string();
                if (converted.package.files.count(rel) == 0)
                    mismatches.push_back(name + ": stale golden file " + rel);
            }
        }
    }
    std::string all;
    for (const std::string& m : mismatches) all += "\n    " + m;
    expect(mismatches.empty(), "golden comparison failed:" + all);
}

// --- criterion 4 ---------------------------------------------------------

void criterion_lexer_properties() {
    testutil::JsFuzzer fuzz(20240301);
    for (int i = 0; i < 10000; ++i) {
        const std::string input = fuzz.next();
        const jslex::LexResult lexed = jslex::tokenize(input);
        std::string joined;
        for (const jslex::Token& t : lexed.tokens) joined += t.text;
        expect(joined == input, "lossless round-trip failed on fuzz case " + std::to_string(i));
        if (i % 4 == 0) {
            const std::string once = jslex::normalize_lines(input);
            expect(jslex::normalize_lines(once) == once,
                   "normalize_lines not idempotent on fuzz case " + std::to_string(i));
        }
    }

    const std::vector<std::string> adversarial = {
        "var a = \"eval(x); fetch(y)\";",
        "/* eval(a) XMLHttpRequest fetch(b) webRequest */",
        "// chrome.runtime.sendMessage(m); webRequestBlocking",
        "`eval(${zzz}) fetch(1) runtime.connect(x)`",
        "'webRequest' + \"webRequestBlocking\" + 'XMLHttpRequest'",
        "re = /eval\\(x\\)/; s = 'runtime.onMessage.addListener';",
    };
    const std::vector<std::string> targets = {
        "runtime.sendMessage",           "runtime.connect",
        "runtime.onMessage.addListener", "runtime.onConnect.addListener",
        "webRequest",                    "webRequestBlocking",
        "XMLHttpRequest",                "fetch",
        "eval",
    };
    for (const std::string& source : adversarial) {
        for (const auto& [api, count] : jslex::count_api_hits(source, targets))
            expect(count == 0, "hit for " + api + " inside excluded context: " + source);
    }
}

// --- criterion 5 ---------------------------------------------------------

void criterion_filter_oracle() {
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
        {"ads", "https://site.com/nothing", false},
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
    expect(pairs.size() >= 20, "frozen suite must hold at least 20 pairs");
    for (const Pair& p : pairs) {
        const auto rule = abp::parse_rule_line(p.rule);
        expect(rule.has_value(), std::string("rule failed to parse: ") + p.rule);
        const bool got = abp::matches(*rule, p.url);
        const bool oracle = testutil::oracle_matches(*rule, p.url);
        expect(got == p.expected,
               std::string(p.rule) + " vs " + p.url + ": implementation disagrees");
        expect(oracle == p.expected,
               std::string(p.rule) + " vs " + p.url + ": oracle disagrees");
    }

    // verdict-class invariance under permutation of randomized rule sets
    std::mt19937 rng(31337);
    const std::vector<std::string> pool = {
        "||a.com^",  "||b.com^",     "banner", "@@||a.com/ok^", "*.gif|",
        "||c.net^",  "@@safe",       "^x^",    "||d.org/p*q^",  "plain",
    };
    const std::vector<std::string> urls = {
        "https://a.com/banner.gif", "https://a.com/ok/y",   "https://b.com/",
        "https://c.net/x",          "https://safe.place/x", "https://none.example/",
        "https://d.org/pXYZq/t",    "http://plain.example/p",
    };
    for (int round = 0; round < 50; ++round) {
        std::vector<std::string> lines;
        for (const std::string& rule : pool)
            if (rng() % 2) lines.push_back(rule);
        std::string base_text;
        for (const std::string& l : lines) base_text += l + "\n";
        std::vector<std::string> shuffled = lines;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::string perm_text;
        for (const std::string& l : shuffled) perm_text += l + "\n";
        const abp::RuleSet base = abp::parse_filter_list(base_text).rules;
        const abp::RuleSet perm = abp::parse_filter_list(perm_text).rules;
        for (const std::string& url : urls)
            expect(abp::classify_url(base, url).kind == abp::classify_url(perm, url).kind,
                   "verdict class changed under permutation for " + url);
    }
}

// --- criterion 6 ---------------------------------------------------------

void criterion_loc_metric() {
    std::string original = "chrome.browserAction.setBadgeText({text:\"x\"});";
    for (int i = 0; i < 9999; ++i) original += "s" + std::to_string(i) + "();";
    const RewriteResult rewritten = rewrite_api_calls(original);
    expect(rewritten.substitutions.size() == 1, "exactly one substitution expected");
    const std::size_t loc = jslex::loc_changed(original, rewritten.text);
    expect(loc >= 10000, "one-line 10,000-statement file must count >= 10000, got " +
                             std::to_string(loc));
    expect(jslex::loc_changed(original, original) == 0, "untouched file must count 0");
}

// --- criterion 7 ---------------------------------------------------------

void criterion_stats_pipeline() {
    // synthetic metadata: January 2021 at 2.0%, a later month at 40.0%
    std::string csv = "id,version,timestamp,manifest_version,online\n";
    const std::string id_a(32, 'a');
    for (int i = 0; i < 50; ++i)
        csv += id_a + ",1." + std::to_string(i) + ",2021-01-10," + (i < 1 ? "3" : "2") + ",1\n";
    for (int i = 0; i < 50; ++i)
        csv += id_a + ",2." + std::to_string(i) + ",2022-06-10," + (i < 20 ? "3" : "2") + ",1\n";
    const stats::ParsedMetadata meta = stats::parse_metadata_csv(csv);
    expect(meta.bad_rows == 0, "synthetic metadata must parse cleanly");
    const auto series = stats::adoption_series(meta.records);
    expect(series.size() == 2, "two months expected");
    expect(series[0].first == "2021-01" && stats::format_percent(series[0].second) == "2.0",
           "first month must be exactly 2.0");
    expect(series[1].first == "2022-06" && stats::format_percent(series[1].second) == "40.0",
           "second month must be exactly 40.0");

    // rollback definition fixture
    const stats::ParsedMetadata rb =
        stats::load_metadata_csv(kFixtures / "metadata.csv");
    const stats::RollbackReport report = stats::rollback_report(rb.records);
    expect(report.rolled_back_ids ==
               std::vector<std::string>{std::string(32, 'a'), std::string(32, 'c')},
           "rollback ids mismatch");
    expect(report.online == 1 && report.offline == 1, "online/offline split mismatch");
}

// --- criterion 8 ---------------------------------------------------------

int run_command(const std::string& command) {
    const int rc = std::system(command.c_str());
    return rc < 0 ? rc : WEXITSTATUS(rc);
}

void criterion_determinism() {
    const testutil::TempDir tmp("determinism");
    const fs::path out1 = tmp.path() / "jobs1";
    const fs::path out8 = tmp.path() / "jobs8";
    const std::string corpus = (kFixtures / "convert").string();
    const std::string bin = MV3KIT_BIN;
    const std::string log = (tmp.path() / "log.txt").string();

    const int rc1 = run_command(bin + " scan " + corpus + " --jobs 1 --out " + out1.string() +
                                " >> " + log + " 2>&1");
    const int rc8 = run_command(bin + " scan " + corpus + " --jobs 8 --out " + out8.string() +
                                " >> " + log + " 2>&1");
    expect(rc1 == 0 && rc8 == 0,
           "scan exits: jobs1=" + std::to_string(rc1) + " jobs8=" + std::to_string(rc8));

    const std::string a = testutil::read_file(out1 / "aggregate.json");
    const std::string b = testutil::read_file(out8 / "aggregate.json");
    expect(!a.empty(), "aggregate.json must not be empty");
    expect(a == b, "aggregate.json differs between --jobs 1 and --jobs 8");

    // per-package reports byte-match as well
    for (const auto& entry : fs::directory_iterator(out1)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        expect(testutil::read_file(out8 / name) == testutil::read_file(entry.path()),
               "report differs between job counts: " + name);
    }
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        std::function<void()> body;
    };
    const std::vector<Criterion> criteria = {
        {1, "percentage arithmetic reproduction", criterion_percentages},
        {2, "PoC detection and classification", criterion_poc},
        {3, "conversion golden suite", criterion_conversion_goldens},
        {4, "lexer properties", criterion_lexer_properties},
        {5, "filter-engine oracle equivalence", criterion_filter_oracle},
        {6, "LoC metric thresholds", criterion_loc_metric},
        {7, "stats pipeline", criterion_stats_pipeline},
        {8, "scan determinism across --jobs", criterion_determinism},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        try {
            c.body();
        } catch (const CheckFailure& f) {
            detail = f.detail;
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
        if (detail.empty()) {
            std::cout << "PASS criterion " << c.number << ": " << c.name << " (" << elapsed
                      << " ms)\n";
        } else {
            ++failures;
            std::cout << "FAIL criterion " << c.number << ": " << c.name << " (" << elapsed
                      << " ms)\n      " << detail << "\n";
        }
    }
    return failures == 0 ? 0 : 1;
}
