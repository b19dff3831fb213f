#include "mv3/stats.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace mv3::stats {

std::int64_t percent_tenths(std::uint64_t numerator, std::uint64_t denominator) {
    if (denominator == 0) return 0;
    // floor(numerator/denominator*1000 + 0.5) without floating point
    return static_cast<std::int64_t>((numerator * 2000 + denominator) / (2 * denominator));
}

std::string format_percent(std::int64_t tenths) {
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

std::size_t loc_bucket(std::size_t loc) {
    if (loc <= 19) return 0;
    if (loc <= 200) return 1;
    if (loc <= 10000) return 2;
    return 3;
}

namespace {

std::string format_count(std::uint64_t n) {
    std::string digits = std::to_string(n);
    std::string out;
    int k = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (k != 0 && k % 3 == 0) out += ',';
        out += *it;
        ++k;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

// Fail(Initial) packages whose only blockers are remote code references
// become loadable once resources move behind a WAR declaration; every other
// blocker kind survives that modification.
bool success_after_war_modifications(const ConversionReport& report) {
    if (report.status == ConversionReport::Status::Success) return true;
    if (report.blockers.empty() || !report.manifest_valid) return false;
    return std::all_of(report.blockers.begin(), report.blockers.end(), [](const Blocker& b) {
        return b.kind == Blocker::Kind::RemoteCodeReference;
    });
}

}  // namespace

CorpusAggregate aggregate_one(const ReportBundle& bundle) {
    CorpusAggregate agg;
    agg.total_extensions = 1;
    for (const auto& [api, usage] : bundle.risk.per_api) {
        ApiAggregate& a = agg.per_api[api];
        a.total_hits += static_cast<std::uint64_t>(usage.hits);
        if (usage.hits > 0) a.unique_extensions += 1;
    }
    if (bundle.conversion.has_value()) {
        agg.has_conversions = true;
        const ConversionReport& report = *bundle.conversion;
        if (report.status == ConversionReport::Status::Success)
            ++agg.success_initial;
        else
            ++agg.fail_initial;
        if (success_after_war_modifications(report))
            ++agg.success_after_war;
        else
            ++agg.fail_final;
        ++agg.loc_histogram[loc_bucket(report.loc_changed)];
    }
    for (MaliciousLabel label : bundle.labels)
        ++agg.label_counts[static_cast<std::size_t>(label)];
    return agg;
}

CorpusAggregate merge(CorpusAggregate left, const CorpusAggregate& right) {
    left.total_extensions += right.total_extensions;
    for (const auto& [api, usage] : right.per_api) {
        ApiAggregate& a = left.per_api[api];
        a.total_hits += usage.total_hits;
        a.unique_extensions += usage.unique_extensions;
    }
    left.has_conversions = left.has_conversions || right.has_conversions;
    left.success_initial += right.success_initial;
    left.fail_initial += right.fail_initial;
    left.success_after_war += right.success_after_war;
    left.fail_final += right.fail_final;
    for (std::size_t i = 0; i < left.label_counts.size(); ++i)
        left.label_counts[i] += right.label_counts[i];
    for (std::size_t i = 0; i < left.loc_histogram.size(); ++i)
        left.loc_histogram[i] += right.loc_histogram[i];
    return left;
}

CorpusAggregate aggregate(const std::vector<ReportBundle>& bundles) {
    CorpusAggregate agg;
    for (const ReportBundle& bundle : bundles) agg = merge(std::move(agg), aggregate_one(bundle));
    return agg;
}

json aggregate_to_json(const CorpusAggregate& agg) {
    json j = json::object();
    j["schema_version"] = 1;
    j["total_extensions"] = agg.total_extensions;

    json per_api = json::object();
    for (const auto& [api, usage] : agg.per_api) {
        per_api[api] =
            json{{"total_hits", usage.total_hits},
                 {"unique_extensions", usage.unique_extensions},
                 {"percent", format_percent(
                                 percent_tenths(usage.unique_extensions, agg.total_extensions))}};
    }
    j["per_api"] = std::move(per_api);

    if (agg.has_conversions) {
        const std::uint64_t total = agg.total_extensions;
        j["conversion"] =
            json{{"success_initial", agg.success_initial},
                 {"success_initial_percent",
                  format_percent(percent_tenths(agg.success_initial, total))},
                 {"fail_initial", agg.fail_initial},
                 {"fail_initial_percent",
                  format_percent(percent_tenths(agg.fail_initial, total))},
                 {"success_after_war", agg.success_after_war},
                 {"success_after_war_percent",
                  format_percent(percent_tenths(agg.success_after_war, total))},
                 {"fail_final", agg.fail_final},
                 {"fail_final_percent", format_percent(percent_tenths(agg.fail_final, total))}};

        json histogram = json::object();
        for (std::size_t i = 0; i < agg.loc_histogram.size(); ++i)
            histogram[kLocBucketNames[i]] = agg.loc_histogram[i];
        j["loc_changed_histogram"] = std::move(histogram);
    }

    json labels = json::object();
    for (int i = 0; i < kMaliciousLabelCount; ++i)
        labels[std::string(to_string(static_cast<MaliciousLabel>(i)))] =
            agg.label_counts[static_cast<std::size_t>(i)];
    j["label_counts"] = std::move(labels);
    return j;
}

std::string aggregate_to_csv(const CorpusAggregate& agg) {
    std::string out = "api,total_hits,unique_extensions,percent\n";
    for (const auto& [api, usage] : agg.per_api) {
        out += api;
        out += ',';
        out += std::to_string(usage.total_hits);
        out += ',';
        out += std::to_string(usage.unique_extensions);
        out += ',';
        out += format_percent(percent_tenths(usage.unique_extensions, agg.total_extensions));
        out += '\n';
    }
    return out;
}

std::string render_markdown_tables(const CorpusAggregate& agg) {
    std::string md;

    md += "## API hits in scanned extensions\n\n";
    md += "| API Category | API Name | Total API Hits | Unique Extension Hits | API exists (%) |\n";
    md += "|---|---|---|---|---|\n";
    for (const TaxonomyEntry& row : api_taxonomy()) {
        const auto it = agg.per_api.find(row.api);
        const ApiAggregate usage = it == agg.per_api.end() ? ApiAggregate{} : it->second;
        md += "| " + std::string(to_string(row.category)) + " | " + row.api + " | " +
              format_count(usage.total_hits) + " | " + format_count(usage.unique_extensions) +
              " | " +
              format_percent(percent_tenths(usage.unique_extensions, agg.total_extensions)) +
              " |\n";
    }
    md += "| Total Extensions | N/A | N/A | " + format_count(agg.total_extensions) + " | 100 |\n";

    if (agg.has_conversions) {
        md += "\n## Conversion outcomes\n\n";
        md += "| Result | Number of extensions (%) |\n|---|---|\n";
        auto row = [&](const char* name, std::uint64_t n) {
            md += "| " + std::string(name) + " | " + format_count(n) + " (" +
                  format_percent(percent_tenths(n, agg.total_extensions)) + "%) |\n";
        };
        row("Success (Initial)", agg.success_initial);
        row("Fail (Initial)", agg.fail_initial);
        row("Success (after war modifications)", agg.success_after_war);
        row("Fail (Final)", agg.fail_final);
        md += "| Executed | " + format_count(agg.total_extensions) + " (100%) |\n";

        md += "\n## Lines of code changed\n\n| LoC changed | Extensions |\n|---|---|\n";
        for (std::size_t i = 0; i < agg.loc_histogram.size(); ++i)
            md += "| " + std::string(kLocBucketNames[i]) + " | " +
                  format_count(agg.loc_histogram[i]) + " |\n";
    }

    const bool any_labels =
        std::any_of(agg.label_counts.begin(), agg.label_counts.end(),
                    [](std::uint64_t n) { return n > 0; });
    if (any_labels) {
        md += "\n## Malicious categories\n\n| Malicious category | Extensions |\n|---|---|\n";
        for (int i = 0; i < kMaliciousLabelCount; ++i)
            md += "| " + std::string(to_string(static_cast<MaliciousLabel>(i))) + " | " +
                  format_count(agg.label_counts[static_cast<std::size_t>(i)]) + " |\n";
        md += "| Total (unique) | " + format_count(agg.total_extensions) + " |\n";
    }
    return md;
}

namespace {

std::vector<std::string> split_row(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isdigit(c) != 0;
    });
}

// "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SS[Z]" -> sortable composite, or
// nullopt when malformed.
std::optional<std::int64_t> parse_time_key(std::string_view ts) {
    if (ts.size() < 10 || ts[4] != '-' || ts[7] != '-') return std::nullopt;
    const std::string_view y = ts.substr(0, 4), mo = ts.substr(5, 2), d = ts.substr(8, 2);
    if (!all_digits(y) || !all_digits(mo) || !all_digits(d)) return std::nullopt;
    const int year = std::stoi(std::string(y));
    const int month = std::stoi(std::string(mo));
    const int day = std::stoi(std::string(d));
    if (month < 1 || month > 12 || day < 1 || day > 31) return std::nullopt;

    int hour = 0, minute = 0, second = 0;
    if (ts.size() > 10) {
        if ((ts[10] != 'T' && ts[10] != ' ') || ts.size() < 19 || ts[13] != ':' || ts[16] != ':')
            return std::nullopt;
        const std::string_view h = ts.substr(11, 2), mi = ts.substr(14, 2), s = ts.substr(17, 2);
        if (!all_digits(h) || !all_digits(mi) || !all_digits(s)) return std::nullopt;
        hour = std::stoi(std::string(h));
        minute = std::stoi(std::string(mi));
        second = std::stoi(std::string(s));
        if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
    }
    return static_cast<std::int64_t>(year) * 10000000000LL + month * 100000000LL +
           day * 1000000LL + hour * 10000LL + minute * 100LL + second;
}

std::optional<bool> parse_bool_field(std::string_view v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    return std::nullopt;
}

}  // namespace

ParsedMetadata parse_metadata_csv(std::string_view text) {
    ParsedMetadata out;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string_view line =
            nl == std::string_view::npos ? text.substr(start) : text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const bool last = nl == std::string_view::npos;
        start = last ? text.size() + 1 : nl + 1;
        ++line_no;

        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("id,", 0) == 0) continue;  // header

        ++out.total_rows;
        const std::vector<std::string> fields = split_row(line);
        auto bad = [&](const std::string& why) {
            ++out.bad_rows;
            out.warnings.push_back(Warning{"malformed_row", why, "", line_no});
        };
        if (fields.size() != 5) {
            bad("metadata row needs 5 fields");
            continue;
        }
        const auto time_key = parse_time_key(fields[2]);
        const auto online = parse_bool_field(fields[4]);
        if (!ExtensionId::is_valid(fields[0])) {
            bad("invalid extension id: " + fields[0]);
            continue;
        }
        if (!time_key.has_value()) {
            bad("invalid timestamp: " + fields[2]);
            continue;
        }
        if (fields[3] != "2" && fields[3] != "3") {
            bad("manifest_version must be 2 or 3: " + fields[3]);
            continue;
        }
        if (!online.has_value()) {
            bad("online flag must be boolean: " + fields[4]);
            continue;
        }
        MetadataRecord rec;
        rec.id = ExtensionId{fields[0]};
        rec.version = fields[1];
        rec.timestamp = fields[2];
        rec.time_key = *time_key;
        rec.manifest_version = fields[3] == "2" ? 2 : 3;
        rec.online = *online;
        out.records.push_back(std::move(rec));
    }
    return out;
}

ParsedMetadata load_metadata_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read metadata file: " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    return parse_metadata_csv(text);
}

std::vector<std::pair<std::string, std::int64_t>> adoption_series(
    const std::vector<MetadataRecord>& records) {
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> months;  // total, v3
    for (const MetadataRecord& rec : records) {
        auto& [total, v3] = months[rec.timestamp.substr(0, 7)];
        ++total;
        if (rec.manifest_version == 3) ++v3;
    }
    std::vector<std::pair<std::string, std::int64_t>> series;
    for (const auto& [month, counts] : months)
        series.emplace_back(month, percent_tenths(counts.second, counts.first));
    return series;  // map iteration is already chronological for ISO months
}

RollbackReport rollback_report(const std::vector<MetadataRecord>& records) {
    struct History {
        std::vector<std::pair<std::int64_t, std::size_t>> order;  // (time_key, input index)
    };
    std::map<std::string, History> by_id;
    for (std::size_t i = 0; i < records.size(); ++i)
        by_id[records[i].id.value].order.emplace_back(records[i].time_key, i);

    RollbackReport report;
    for (auto& [id, history] : by_id) {
        std::stable_sort(history.order.begin(), history.order.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        bool seen_v3 = false;
        bool rolled_back = false;
        for (const auto& [key, index] : history.order) {
            const int mv = records[index].manifest_version;
            if (mv == 3) seen_v3 = true;
            if (mv == 2 && seen_v3) rolled_back = true;
        }
        if (!rolled_back) continue;
        report.rolled_back_ids.push_back(id);
        if (records[history.order.back().second].online)
            ++report.online;
        else
            ++report.offline;
    }
    return report;  // ids sorted by map order
}

std::string adoption_to_csv(const std::vector<std::pair<std::string, std::int64_t>>& series) {
    std::string out = "month,percent_v3\n";
    for (const auto& [month, tenths] : series) out += month + "," + format_percent(tenths) + "\n";
    return out;
}

json rollback_to_json(const RollbackReport& report) {
    const std::uint64_t total = report.online + report.offline;
    json j = json::object();
    j["schema_version"] = 1;
    j["rolled_back_total"] = total;
    j["online"] = json{{"count", report.online},
                       {"percent", format_percent(percent_tenths(report.online, total))}};
    j["offline"] = json{{"count", report.offline},
                        {"percent", format_percent(percent_tenths(report.offline, total))}};
    j["rolled_back_ids"] = report.rolled_back_ids;
    return j;
}

std::string render_rollback_markdown(const RollbackReport& report) {
    const std::uint64_t total = report.online + report.offline;
    std::string md = "## Rolled back from V3 to V2\n\n| webstore ID | # Extensions (%) |\n|---|---|\n";
    md += "| Online | " + format_count(report.online) + " (" +
          format_percent(percent_tenths(report.online, total)) + "%) |\n";
    md += "| Offline | " + format_count(report.offline) + " (" +
          format_percent(percent_tenths(report.offline, total)) + "%) |\n";
    md += "| Total | " + format_count(total) + " (100%) |\n";
    return md;
}

}  // namespace mv3::stats
