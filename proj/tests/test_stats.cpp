#include <doctest.h>

#include <random>

#include "mv3/stats.hpp"
#include "testutil.hpp"

using namespace mv3;
using namespace mv3::stats;

namespace {

ReportBundle bundle_with_hits(const std::map<std::string, int>& hits,
                              std::optional<ConversionReport::Status> status = std::nullopt,
                              std::size_t loc = 0) {
    ReportBundle bundle;
    for (const TaxonomyEntry& row : api_taxonomy()) {
        ApiUsage usage;
        const auto it = hits.find(row.api);
        usage.hits = it == hits.end() ? 0 : it->second;
        for (int i = 0; i < usage.hits; ++i) usage.locations.emplace_back("f.js", i + 1);
        bundle.risk.per_api[row.api] = usage;
    }
    if (status.has_value()) {
        ConversionReport report;
        report.status = *status;
        report.loc_changed = loc;
        if (*status == ConversionReport::Status::Fail) {
            report.blockers.push_back(Blocker{Blocker::Kind::DomInBackground, "bg.js", 1, "x"});
            report.manifest_valid = true;
        }
        bundle.conversion = report;
    }
    return bundle;
}

MetadataRecord record(const std::string& id, const std::string& version,
                      const std::string& timestamp, int mv, bool online) {
    ParsedMetadata parsed = parse_metadata_csv("id,version,timestamp,manifest_version,online\n" +
                                               id + "," + version + "," + timestamp + "," +
                                               std::to_string(mv) + "," +
                                               (online ? "1" : "0") + "\n");
    REQUIRE(parsed.records.size() == 1);
    return parsed.records[0];
}

const std::string kIdA = "aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa";
const std::string kIdB = "bbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbb";
const std::string kIdC = "cccccccccccccccccccccccccccccccc";

}  // namespace

TEST_CASE("percent_tenths reproduces every published table percentage exactly") {
    struct Row {
        std::uint64_t num, den;
        std::int64_t tenths;
    };
    const std::vector<Row> rows = {
        // API table
        {454, 517, 878}, {340, 517, 658}, {312, 517, 603}, {112, 517, 217}, {69, 517, 133},
        {88, 517, 170},  {21, 517, 41},   {85, 517, 164},  {35, 517, 68},
        // conversion outcome table
        {154, 517, 298}, {363, 517, 702}, {290, 517, 561}, {227, 517, 439},
        // rollback table
        {2649, 3128, 847}, {479, 3128, 153},
    };
    for (const Row& r : rows) CHECK(percent_tenths(r.num, r.den) == r.tenths);
    CHECK(format_percent(878) == "87.8");
    CHECK(format_percent(170) == "17.0");
    CHECK(format_percent(41) == "4.1");
    CHECK(percent_tenths(0, 0) == 0);  // empty corpus convention
    CHECK(percent_tenths(1, 1) == 1000);
    // half-up at the boundary: 0.05% -> 0.1%
    CHECK(percent_tenths(1, 2000) == 1);
    CHECK(percent_tenths(1, 2001) == 0);
}

TEST_CASE("aggregate: unique extensions vs total hits") {
    std::vector<ReportBundle> bundles;
    bundles.push_back(bundle_with_hits({{"eval", 3}, {"fetch", 1}}));
    bundles.push_back(bundle_with_hits({{"eval", 2}}));
    bundles.push_back(bundle_with_hits({}));
    const CorpusAggregate agg = aggregate(bundles);
    CHECK(agg.total_extensions == 3);
    CHECK(agg.per_api.at("eval").total_hits == 5);
    CHECK(agg.per_api.at("eval").unique_extensions == 2);
    CHECK(agg.per_api.at("fetch").unique_extensions == 1);
    CHECK(agg.per_api.at("webRequest").total_hits == 0);
}

TEST_CASE("aggregate: conversion outcome partition") {
    std::vector<ReportBundle> bundles;
    for (int i = 0; i < 3; ++i)
        bundles.push_back(bundle_with_hits({}, ConversionReport::Status::Success, 25));
    for (int i = 0; i < 2; ++i)
        bundles.push_back(bundle_with_hits({}, ConversionReport::Status::Fail, 5));
    const CorpusAggregate agg = aggregate(bundles);
    CHECK(agg.success_initial == 3);
    CHECK(agg.fail_initial == 2);
    CHECK(agg.success_initial + agg.fail_initial == agg.total_extensions);
    CHECK(agg.success_after_war + agg.fail_final == agg.total_extensions);
    CHECK(agg.loc_histogram[0] == 2);
    CHECK(agg.loc_histogram[1] == 3);
}

TEST_CASE("aggregate: war modifications rescue remote-code-only failures") {
    ReportBundle remote_only = bundle_with_hits({}, ConversionReport::Status::Fail);
    remote_only.conversion->blockers = {
        Blocker{Blocker::Kind::RemoteCodeReference, "inject.js", 2, "remote"}};
    ReportBundle dom_fail = bundle_with_hits({}, ConversionReport::Status::Fail);
    const CorpusAggregate agg = aggregate({remote_only, dom_fail});
    CHECK(agg.success_initial == 0);
    CHECK(agg.success_after_war == 1);  // the remote-code-only package
    CHECK(agg.fail_final == 1);
}

TEST_CASE("aggregate: label counts reproduce the labeling table") {
    // 517 unique extensions carrying the table's multi-label distribution
    const std::vector<std::pair<MaliciousLabel, int>> distribution = {
        {MaliciousLabel::ClickScam, 33},          {MaliciousLabel::AdReplacement, 112},
        {MaliciousLabel::UserDataAnalytics, 356}, {MaliciousLabel::CredentialsStealing, 3},
        {MaliciousLabel::BrowserModification, 111}, {MaliciousLabel::Other, 90},
    };
    std::vector<ReportBundle> bundles(517);
    std::size_t cursor = 0;
    for (const auto& [label, count] : distribution)
        for (int i = 0; i < count; ++i)
            bundles[cursor++ % bundles.size()].labels.push_back(label);
    const CorpusAggregate agg = aggregate(bundles);
    CHECK(agg.total_extensions == 517);
    CHECK(agg.label_counts[static_cast<int>(MaliciousLabel::ClickScam)] == 33);
    CHECK(agg.label_counts[static_cast<int>(MaliciousLabel::AdReplacement)] == 112);
    CHECK(agg.label_counts[static_cast<int>(MaliciousLabel::UserDataAnalytics)] == 356);
    CHECK(agg.label_counts[static_cast<int>(MaliciousLabel::CredentialsStealing)] == 3);
    CHECK(agg.label_counts[static_cast<int>(MaliciousLabel::BrowserModification)] == 111);
    CHECK(agg.label_counts[static_cast<int>(MaliciousLabel::Other)] == 90);
}

TEST_CASE("aggregate: engineered 517-extension corpus reproduces the hit table") {
    // unique-extension counts from the published table
    const std::vector<std::pair<std::string, int>> unique_counts = {
        {"runtime.sendMessage", 112}, {"runtime.connect", 69},
        {"runtime.onMessage.addListener", 88}, {"runtime.onConnect.addListener", 21},
        {"webRequest", 85}, {"webRequestBlocking", 35},
        {"XMLHttpRequest", 340}, {"fetch", 312}, {"eval", 454},
    };
    std::vector<ReportBundle> bundles;
    for (int i = 0; i < 517; ++i) {
        std::map<std::string, int> hits;
        for (const auto& [api, count] : unique_counts)
            if (i < count) hits[api] = 1;
        bundles.push_back(bundle_with_hits(hits));
    }
    const json j = aggregate_to_json(aggregate(bundles));
    CHECK(j["total_extensions"] == 517);
    const std::map<std::string, std::string> expected = {
        {"eval", "87.8"},           {"XMLHttpRequest", "65.8"},
        {"fetch", "60.3"},          {"runtime.sendMessage", "21.7"},
        {"runtime.connect", "13.3"}, {"runtime.onMessage.addListener", "17.0"},
        {"runtime.onConnect.addListener", "4.1"}, {"webRequest", "16.4"},
        {"webRequestBlocking", "6.8"},
    };
    for (const auto& [api, percent] : expected) {
        CHECK(j["per_api"][api]["percent"] == percent);
    }
}

TEST_CASE("aggregate: merge associativity over random splits") {
    std::mt19937 rng(4242);
    std::vector<ReportBundle> bundles;
    for (int i = 0; i < 40; ++i) {
        std::map<std::string, int> hits;
        if (rng() % 2) hits["eval"] = static_cast<int>(rng() % 5);
        if (rng() % 2) hits["fetch"] = static_cast<int>(rng() % 3);
        std::optional<ConversionReport::Status> status;
        if (rng() % 3)
            status = rng() % 2 ? ConversionReport::Status::Success
                               : ConversionReport::Status::Fail;
        bundles.push_back(bundle_with_hits(hits, status, rng() % 400));
    }
    const json whole = aggregate_to_json(aggregate(bundles));
    for (int round = 0; round < 10; ++round) {
        const std::size_t cut = rng() % (bundles.size() + 1);
        const std::vector<ReportBundle> left(bundles.begin(), bundles.begin() + cut);
        const std::vector<ReportBundle> right(bundles.begin() + cut, bundles.end());
        const CorpusAggregate merged = merge(aggregate(left), aggregate(right));
        REQUIRE(aggregate_to_json(merged) == whole);
    }
}

TEST_CASE("aggregate: empty corpus is all zeros with 0.0 percents") {
    const CorpusAggregate agg = aggregate({});
    const json j = aggregate_to_json(agg);
    CHECK(j["total_extensions"] == 0);
    CHECK(j["per_api"].empty());
    CHECK(!j.contains("conversion"));
}

TEST_CASE("metadata csv parsing and validation") {
    const ParsedMetadata good = parse_metadata_csv(
        "id,version,timestamp,manifest_version,online\n" +
        kIdA + ",1.0,2021-01-05,2,1\n" +
        kIdA + ",1.1,2021-02-05T12:30:00Z,3,1\n");
    CHECK(good.records.size() == 2);
    CHECK(good.bad_rows == 0);
    CHECK(good.records[0].time_key < good.records[1].time_key);

    const ParsedMetadata bad = parse_metadata_csv(
        kIdA + ",1.0,2021-13-05,2,1\n" +      // month 13
        kIdA + ",1.0,2021-01-05,4,1\n" +      // manifest_version 4
        kIdA + ",1.0,2021-01-05,2,maybe\n" +  // bad bool
        "shortid,1.0,2021-01-05,2,1\n");
    CHECK(bad.records.empty());
    CHECK(bad.bad_rows == 4);
    CHECK(bad.warnings.size() == 4);
}

TEST_CASE("adoption_series: monthly fractions with 1-decimal rounding") {
    std::vector<MetadataRecord> records;
    // month one: 1 of 50 updates in V3 -> 2.0
    records.push_back(record(kIdA, "1.0", "2021-01-02", 3, true));
    for (int i = 0; i < 49; ++i)
        records.push_back(record(kIdB, "1." + std::to_string(i), "2021-01-03", 2, true));
    // month two: [3,3,2,3] -> 75.0
    records.push_back(record(kIdA, "2.0", "2021-02-01", 3, true));
    records.push_back(record(kIdB, "2.1", "2021-02-02", 3, true));
    records.push_back(record(kIdC, "2.2", "2021-02-03", 2, true));
    records.push_back(record(kIdA, "2.3", "2021-02-04", 3, true));
    const auto series = adoption_series(records);
    REQUIRE(series.size() == 2);
    CHECK(series[0] == std::pair<std::string, std::int64_t>{"2021-01", 20});
    CHECK(series[1] == std::pair<std::string, std::int64_t>{"2021-02", 750});
}

TEST_CASE("adoption_series: synthetic rising curve stays monotone") {
    std::vector<MetadataRecord> records;
    // fractions 2% .. 40% over 20 months
    for (int month = 1; month <= 20; ++month) {
        const int v3 = month;            // of 50 -> 2%, 4%, ..., 40%
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%02d", ((month - 1) % 12) + 1);
        const std::string ym = (month <= 12 ? "2021-" : "2022-") + std::string(buf);
        for (int i = 0; i < 50; ++i)
            records.push_back(record(kIdA, "1.0", ym + "-15", i < v3 ? 3 : 2, true));
    }
    const auto series = adoption_series(records);
    REQUIRE(series.size() == 20);
    CHECK(series.front().second == 20);   // 2.0
    CHECK(series.back().second == 400);   // 40.0
    for (std::size_t i = 1; i < series.size(); ++i)
        CHECK(series[i].second >= series[i - 1].second);
}

TEST_CASE("rollback_report: the definition on a version sequence") {
    // [(1.0,v2),(1.1,v3),(1.2,v2)] -> rolled back
    std::vector<MetadataRecord> rolled = {
        record(kIdA, "1.0", "2021-01-01", 2, true),
        record(kIdA, "1.1", "2021-02-01", 3, true),
        record(kIdA, "1.2", "2021-03-01", 2, true),
    };
    const RollbackReport r1 = rollback_report(rolled);
    CHECK(r1.rolled_back_ids == std::vector<std::string>{kIdA});
    CHECK(r1.online == 1);
    CHECK(r1.offline == 0);

    // monotone upgrade history: not rolled back
    std::vector<MetadataRecord> upgraded = {
        record(kIdB, "1.0", "2021-01-01", 2, true),
        record(kIdB, "2.0", "2021-05-01", 3, true),
    };
    CHECK(rollback_report(upgraded).rolled_back_ids.empty());

    // all-V3 history: not rolled back
    std::vector<MetadataRecord> all_v3 = {
        record(kIdC, "1.0", "2021-01-01", 3, true),
        record(kIdC, "1.1", "2021-02-01", 3, true),
    };
    CHECK(rollback_report(all_v3).rolled_back_ids.empty());

    // input order does not matter, time order does
    std::vector<MetadataRecord> shuffled = {rolled[2], rolled[0], rolled[1]};
    CHECK(rollback_report(shuffled).rolled_back_ids == std::vector<std::string>{kIdA});
}

TEST_CASE("rollback_report: online/offline split uses the latest record") {
    std::vector<MetadataRecord> records = {
        record(kIdA, "1.0", "2021-01-01", 3, true),
        record(kIdA, "1.1", "2021-02-01", 2, false),  // latest: offline
        record(kIdB, "1.0", "2021-01-01", 3, true),
        record(kIdB, "1.1", "2021-02-01", 2, true),   // latest: online
    };
    const RollbackReport report = rollback_report(records);
    CHECK(report.online == 1);
    CHECK(report.offline == 1);
    const json j = rollback_to_json(report);
    CHECK(j["online"]["percent"] == "50.0");
    CHECK(j["offline"]["percent"] == "50.0");
}

TEST_CASE("markdown rendering carries the paper table layout") {
    std::vector<ReportBundle> bundles;
    bundles.push_back(bundle_with_hits({{"eval", 2}}, ConversionReport::Status::Success, 30));
    const std::string md = render_markdown_tables(aggregate(bundles));
    CHECK(md.find("| API Category | API Name |") != std::string::npos);
    CHECK(md.find("Remotely Hosted Code | eval") != std::string::npos);
    CHECK(md.find("Success (Initial)") != std::string::npos);
    const RollbackReport rollback{{kIdA}, 1, 0};
    const std::string rb = render_rollback_markdown(rollback);
    CHECK(rb.find("| Online | 1 (100.0%) |") != std::string::npos);
}
