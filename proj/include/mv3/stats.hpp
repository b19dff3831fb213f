#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mv3/classify.hpp"
#include "mv3/convert.hpp"
#include "mv3/scan.hpp"

namespace mv3::stats {

// Half-up rounding to one decimal, in exact integer arithmetic: returns
// tenths of a percent (87.8% -> 878).  All published table percentages
// reproduce through this one function.
std::int64_t percent_tenths(std::uint64_t numerator, std::uint64_t denominator);
std::string format_percent(std::int64_t tenths);  // "87.8"

// LoC-changed histogram bucket edges.
inline constexpr std::array<const char*, 4> kLocBucketNames = {"0-19", "20-200", "201-10000",
                                                               ">10000"};
std::size_t loc_bucket(std::size_t loc);

struct ApiAggregate {
    std::uint64_t total_hits = 0;
    std::uint64_t unique_extensions = 0;
};

struct CorpusAggregate {
    std::uint64_t total_extensions = 0;
    std::map<std::string, ApiAggregate> per_api;
    bool has_conversions = false;
    std::uint64_t success_initial = 0;
    std::uint64_t fail_initial = 0;
    std::uint64_t success_after_war = 0;
    std::uint64_t fail_final = 0;
    std::array<std::uint64_t, kMaliciousLabelCount> label_counts{};
    std::array<std::uint64_t, 4> loc_histogram{};
};

// One extension's analysis results.  conversion/labels are optional so the
// scan-only pipeline aggregates cleanly.
struct ReportBundle {
    RiskReport risk;
    std::optional<ConversionReport> conversion;
    std::vector<MaliciousLabel> labels;
};

CorpusAggregate aggregate_one(const ReportBundle& bundle);
CorpusAggregate merge(CorpusAggregate left, const CorpusAggregate& right);
CorpusAggregate aggregate(const std::vector<ReportBundle>& bundles);

json aggregate_to_json(const CorpusAggregate& agg);
std::string aggregate_to_csv(const CorpusAggregate& agg);
std::string render_markdown_tables(const CorpusAggregate& agg);

struct MetadataRecord {
    ExtensionId id;
    std::string version;
    std::string timestamp;       // ISO-8601 date or datetime
    std::int64_t time_key = 0;   // sortable composite of the timestamp digits
    int manifest_version = 2;
    bool online = false;
};

struct ParsedMetadata {
    std::vector<MetadataRecord> records;
    Warnings warnings;
    std::size_t total_rows = 0;
    std::size_t bad_rows = 0;
};

// metadata.csv: id,version,timestamp,manifest_version,online
ParsedMetadata parse_metadata_csv(std::string_view text);
ParsedMetadata load_metadata_csv(const std::filesystem::path& path);

// Per calendar month: percent of update records with manifest_version 3,
// tenths, months with no records omitted, chronological order.
std::vector<std::pair<std::string, std::int64_t>> adoption_series(
    const std::vector<MetadataRecord>& records);

struct RollbackReport {
    std::vector<std::string> rolled_back_ids;  // sorted
    std::uint64_t online = 0;
    std::uint64_t offline = 0;
};

// An id rolled back iff its time-ordered history has some V3 record
// strictly before some V2 record; online/offline split by the latest record.
RollbackReport rollback_report(const std::vector<MetadataRecord>& records);

std::string adoption_to_csv(const std::vector<std::pair<std::string, std::int64_t>>& series);
json rollback_to_json(const RollbackReport& report);
std::string render_rollback_markdown(const RollbackReport& report);

}  // namespace mv3::stats
