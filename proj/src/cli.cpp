#include "mv3/cli.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "mv3/classify.hpp"
#include "mv3/convert.hpp"
#include "mv3/model.hpp"
#include "mv3/scan.hpp"
#include "mv3/stats.hpp"

namespace fs = std::filesystem;

namespace mv3::cli {

namespace {

std::mutex log_mutex;

void log_event(std::string_view level, std::string_view event, json fields = json::object()) {
    json record = json::object();
    record["level"] = std::string(level);
    record["event"] = std::string(event);
    for (auto& [k, v] : fields.items()) record[k] = v;
    const std::lock_guard<std::mutex> lock(log_mutex);
    std::cerr << record.dump() << '\n';
}

void write_text_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

void write_json_file(const fs::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

// Stable display names for package roots; collisions get a numeric suffix
// in discovery order so outputs stay deterministic across --jobs settings.
std::vector<std::string> package_names(const std::vector<fs::path>& packages) {
    std::vector<std::string> names;
    std::map<std::string, int> used;
    for (const fs::path& p : packages) {
        fs::path base = p;
        if (base.filename().empty()) base = base.parent_path();
        std::string name =
            fs::is_directory(p) ? base.filename().string() : base.stem().string();
        if (name.empty()) name = "package";
        const int n = used[name]++;
        if (n > 0) name += "-" + std::to_string(n + 1);
        names.push_back(std::move(name));
    }
    return names;
}

// Per-item errors are captured, not propagated: one bad package must only
// affect its own slot.
template <typename Fn>
std::vector<std::exception_ptr> for_each_parallel(std::size_t count, int jobs, bool fail_fast,
                                                  Fn&& fn) {
    std::vector<std::exception_ptr> errors(count);
    if (count == 0) return errors;
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};

    auto body = [&] {
        while (!stop.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                if (fail_fast) stop.store(true, std::memory_order_relaxed);
            }
        }
    };

    if (workers == 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(body);
        for (std::thread& t : pool) t.join();
    }
    return errors;
}

bool is_io_category(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const MalformedArchive&) {
        return true;
    } catch (const MissingManifest&) {
        return true;
    } catch (const IoError&) {
        return true;
    } catch (...) {
        return false;
    }
}

std::string error_text(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

int config_check(const RunConfig& config) {
    if (config.parallelism < 1) {
        log_event("error", "config_error", json{{"detail", "--jobs must be >= 1"}});
        return kExitConfigError;
    }
    const fs::path out = fs::weakly_canonical(fs::absolute(config.output_dir));
    for (const fs::path& input : config.inputs) {
        std::error_code ec;
        const fs::path in = fs::weakly_canonical(fs::absolute(input), ec);
        if (!ec && in == out) {
            log_event("error", "config_error",
                      json{{"detail", "output directory overlaps an input path"},
                           {"path", input.string()}});
            return kExitConfigError;
        }
    }
    return kExitOk;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read: " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string_view label_display_name(MaliciousLabel label) {
    switch (label) {
        case MaliciousLabel::ClickScam: return "Click scam";
        case MaliciousLabel::AdReplacement: return "Ad replacement";
        case MaliciousLabel::UserDataAnalytics: return "User data analytics";
        case MaliciousLabel::CredentialsStealing: return "Credentials stealing";
        case MaliciousLabel::BrowserModification: return "Browser modification";
        case MaliciousLabel::Other: return "Other";
    }
    return "";
}

}  // namespace

std::vector<fs::path> discover_packages(const std::vector<fs::path>& inputs) {
    std::vector<fs::path> packages;
    std::set<std::string> seen;
    auto add = [&](const fs::path& p) {
        const std::string key = fs::weakly_canonical(fs::absolute(p)).string();
        if (seen.insert(key).second) packages.push_back(p);
    };

    for (const fs::path& input : inputs) {
        if (fs::is_directory(input)) {
            if (fs::exists(input / "manifest.json")) {
                add(input);
                continue;
            }
            // corpus directory: immediate children only
            std::vector<fs::path> children;
            for (const auto& entry : fs::directory_iterator(input)) {
                if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
                    children.push_back(entry.path());
                else if (entry.is_regular_file() && entry.path().extension() == ".zip")
                    children.push_back(entry.path());
            }
            std::sort(children.begin(), children.end());
            for (const fs::path& c : children) add(c);
        } else if (fs::is_regular_file(input)) {
            if (input.extension() != ".zip")
                throw IoError("input is neither a package directory nor a .zip: " +
                              input.string());
            add(input);
        } else {
            throw IoError("input path does not exist: " + input.string());
        }
    }
    return packages;
}

int cmd_convert(const RunConfig& config) {
    if (const int rc = config_check(config); rc != kExitOk) return rc;
    std::vector<fs::path> packages;
    try {
        packages = discover_packages(config.inputs);
    } catch (const IoError& e) {
        log_event("error", "io_error", json{{"detail", e.what()}});
        return kExitIoError;
    }
    const std::vector<std::string> names = package_names(packages);

    std::vector<std::optional<ConvertedPackage>> results(packages.size());
    const auto errors = for_each_parallel(
        packages.size(), config.parallelism, config.fail_fast, [&](std::size_t i) {
            const ExtensionPackage pkg = load_package(packages[i]);
            results[i] = convert_package(pkg);
        });

    bool any_fail = false;
    bool any_io = false;
    fs::create_directories(config.output_dir);
    for (std::size_t i = 0; i < packages.size(); ++i) {
        if (errors[i]) {
            any_io = any_io || is_io_category(errors[i]);
            any_fail = true;
            log_event("error", "package_error",
                      json{{"package", packages[i].string()}, {"detail", error_text(errors[i])}});
            continue;
        }
        if (!results[i].has_value()) continue;  // fail-fast skipped slot
        const ConvertedPackage& converted = *results[i];
        const fs::path package_dir = config.output_dir / (names[i] + ".v3");
        const fs::path report_path = config.output_dir / (names[i] + ".conversion_report.json");
        try {
            write_package_files(converted.package, package_dir);
            write_json_file(report_path, conversion_report_to_json(converted.report));
        } catch (const IoError& e) {
            any_io = true;
            log_event("error", "io_error", json{{"detail", e.what()}});
            continue;
        }
        const bool failed = converted.report.status == ConversionReport::Status::Fail;
        any_fail = any_fail || failed;
        log_event("info", "converted",
                  json{{"package", packages[i].string()},
                       {"status", failed ? "Fail" : "Success"},
                       {"blockers", converted.report.blockers.size()},
                       {"loc_changed", converted.report.loc_changed}});
        std::cout << report_path.string() << '\n';
    }
    if (any_io) return kExitIoError;
    return any_fail ? kExitConversionFailures : kExitOk;
}

int cmd_scan(const RunConfig& config) {
    if (const int rc = config_check(config); rc != kExitOk) return rc;
    std::vector<fs::path> packages;
    try {
        packages = discover_packages(config.inputs);
    } catch (const IoError& e) {
        log_event("error", "io_error", json{{"detail", e.what()}});
        return kExitIoError;
    }
    const std::vector<std::string> names = package_names(packages);

    struct Slot {
        RiskReport risk;
        std::vector<WarInjectionFinding> findings;
        bool ok = false;
    };
    std::vector<Slot> slots(packages.size());
    ScanOptions options;
    options.mode = config.counting_mode;

    const auto errors = for_each_parallel(
        packages.size(), config.parallelism, config.fail_fast, [&](std::size_t i) {
            const ExtensionPackage pkg = load_package(packages[i]);
            slots[i].risk = scan_package(pkg, options);
            slots[i].findings = detect_war_injection(pkg);
            slots[i].ok = true;
        });

    bool any_io = false;
    fs::create_directories(config.output_dir);
    std::vector<stats::ReportBundle> bundles;
    for (std::size_t i = 0; i < packages.size(); ++i) {
        if (errors[i]) {
            any_io = any_io || is_io_category(errors[i]);
            log_event("error", "package_error",
                      json{{"package", packages[i].string()}, {"detail", error_text(errors[i])}});
            continue;
        }
        if (!slots[i].ok) continue;
        const fs::path report_path = config.output_dir / (names[i] + ".risk_report.json");
        write_json_file(report_path, risk_report_to_json(slots[i].risk, slots[i].findings));
        std::cout << report_path.string() << '\n';
        stats::ReportBundle bundle;
        bundle.risk = slots[i].risk;
        bundles.push_back(std::move(bundle));
        log_event("info", "scanned",
                  json{{"package", packages[i].string()},
                       {"war_injection_findings", slots[i].findings.size()}});
    }

    const stats::CorpusAggregate agg = stats::aggregate(bundles);
    const fs::path agg_path = config.output_dir / "aggregate.json";
    write_json_file(agg_path, stats::aggregate_to_json(agg));
    write_text_file(config.output_dir / "aggregate.csv", stats::aggregate_to_csv(agg));
    write_text_file(config.output_dir / "aggregate.md", stats::render_markdown_tables(agg));
    std::cout << agg_path.string() << '\n';
    return any_io ? kExitIoError : kExitOk;
}

int cmd_classify(const RunConfig& config) {
    if (const int rc = config_check(config); rc != kExitOk) return rc;
    if (config.blocklists.empty() || !config.labels_file.has_value()) {
        log_event("error", "config_error",
                  json{{"detail", "classify needs --blocklist and --labels"}});
        return kExitConfigError;
    }

    abp::RuleSet rules;
    LabelsFile labels;
    try {
        for (const fs::path& path : config.blocklists) {
            abp::ParsedList parsed = abp::parse_filter_list(read_text_file(path));
            for (const Warning& w : parsed.warnings)
                log_event("warning", "blocklist_warning",
                          json{{"file", path.string()}, {"code", w.code}, {"detail", w.message}});
            std::move(parsed.rules.block_rules.begin(), parsed.rules.block_rules.end(),
                      std::back_inserter(rules.block_rules));
            std::move(parsed.rules.exception_rules.begin(), parsed.rules.exception_rules.end(),
                      std::back_inserter(rules.exception_rules));
            rules.plain_domains.insert(parsed.rules.plain_domains.begin(),
                                       parsed.rules.plain_domains.end());
        }
        labels = load_labels_csv(*config.labels_file);
    } catch (const IoError& e) {
        log_event("error", "io_error", json{{"detail", e.what()}});
        return kExitIoError;
    }
    for (const Warning& w : labels.warnings)
        log_event("warning", "labels_warning",
                  json{{"code", w.code}, {"detail", w.message}, {"line", w.line.value_or(0)}});

    std::vector<fs::path> packages;
    try {
        packages = discover_packages(config.inputs);
    } catch (const IoError& e) {
        log_event("error", "io_error", json{{"detail", e.what()}});
        return kExitIoError;
    }
    const std::vector<std::string> names = package_names(packages);

    struct Slot {
        std::optional<ActivityVerdict> verdict;
        std::vector<MaliciousLabel> package_labels;
        bool missing_metadata = false;
        std::string id;
    };
    std::vector<Slot> slots(packages.size());

    const auto errors = for_each_parallel(
        packages.size(), config.parallelism, config.fail_fast, [&](std::size_t i) {
            const ExtensionPackage pkg = load_package(packages[i]);
            slots[i].id = pkg.id.value;
            const auto meta_it = labels.by_id.find(pkg.id.value);
            if (meta_it == labels.by_id.end()) {
                slots[i].missing_metadata = true;
                return;
            }
            // V2 inputs go through the converter; V3 inputs (already
            // converted, e.g. by an earlier `convert` run) get a synthesized
            // report driven by validate_v3.
            ConversionReport report;
            if (pkg.manifest.manifest_version == 2) {
                report = convert_package(pkg).report;
            } else {
                report.manifest_valid = validate_v3(pkg.manifest).empty();
                report.status = report.manifest_valid ? ConversionReport::Status::Success
                                                      : ConversionReport::Status::Fail;
            }
            slots[i].package_labels = meta_it->second.labels;
            slots[i].verdict = classify(pkg, report, rules, meta_it->second);
        });

    bool any_io = false;
    bool any_data_error = false;
    fs::create_directories(config.output_dir);
    std::array<std::uint64_t, kMaliciousLabelCount> active_per_label{};
    std::uint64_t active_total = 0;

    for (std::size_t i = 0; i < packages.size(); ++i) {
        if (errors[i]) {
            any_io = any_io || is_io_category(errors[i]);
            any_data_error = any_data_error || !is_io_category(errors[i]);
            log_event("error", "package_error",
                      json{{"package", packages[i].string()}, {"detail", error_text(errors[i])}});
            continue;
        }
        if (slots[i].missing_metadata) {
            any_data_error = true;
            log_event("error", "missing_labels",
                      json{{"package", packages[i].string()}, {"id", slots[i].id}});
            continue;
        }
        if (!slots[i].verdict.has_value()) continue;
        const fs::path verdict_path = config.output_dir / (names[i] + ".verdict.json");
        write_json_file(verdict_path, verdict_to_json(*slots[i].verdict));
        std::cout << verdict_path.string() << '\n';
        if (slots[i].verdict->functionally_active) {
            ++active_total;
            for (MaliciousLabel label : slots[i].package_labels)
                ++active_per_label[static_cast<std::size_t>(label)];
        }
    }

    json summary = json::object();
    summary["schema_version"] = 1;
    summary["functionally_active_total"] = active_total;
    json per_label = json::object();
    std::string rows;
    for (int i = 0; i < kMaliciousLabelCount; ++i) {
        const auto label = static_cast<MaliciousLabel>(i);
        per_label[std::string(to_string(label))] = active_per_label[static_cast<std::size_t>(i)];
        rows += std::string(label_display_name(label)) + ": " +
                std::to_string(active_per_label[static_cast<std::size_t>(i)]) + "\n";
    }
    summary["functionally_active_per_label"] = std::move(per_label);
    const fs::path summary_path = config.output_dir / "classify_summary.json";
    write_json_file(summary_path, summary);
    write_text_file(config.output_dir / "classify_summary.txt", rows);
    std::cout << summary_path.string() << '\n';

    if (any_io) return kExitIoError;
    return any_data_error ? kExitConfigError : kExitOk;
}

int cmd_stats(const RunConfig& config) {
    if (const int rc = config_check(config); rc != kExitOk) return rc;
    if (!config.metadata_file.has_value()) {
        log_event("error", "config_error", json{{"detail", "stats needs --metadata"}});
        return kExitConfigError;
    }
    stats::ParsedMetadata metadata;
    try {
        metadata = stats::load_metadata_csv(*config.metadata_file);
    } catch (const IoError& e) {
        log_event("error", "io_error", json{{"detail", e.what()}});
        return kExitIoError;
    }
    for (const Warning& w : metadata.warnings)
        log_event("warning", "metadata_warning",
                  json{{"code", w.code}, {"detail", w.message}, {"line", w.line.value_or(0)}});
    if (metadata.total_rows == 0) {
        log_event("error", "config_error", json{{"detail", "metadata file has no data rows"}});
        return kExitConfigError;
    }
    if (metadata.bad_rows * 100 > metadata.total_rows) {
        log_event("error", "config_error",
                  json{{"detail", "malformed metadata rows exceed the 1% tolerance"},
                       {"bad_rows", metadata.bad_rows},
                       {"total_rows", metadata.total_rows}});
        return kExitConfigError;
    }

    const auto series = stats::adoption_series(metadata.records);
    const stats::RollbackReport rollback = stats::rollback_report(metadata.records);

    fs::create_directories(config.output_dir);
    const fs::path adoption_path = config.output_dir / "adoption.csv";
    const fs::path rollback_path = config.output_dir / "rollback.json";
    write_text_file(adoption_path, stats::adoption_to_csv(series));
    write_json_file(rollback_path, stats::rollback_to_json(rollback));

    std::string md = "## Monthly V3 update rate\n\n| Month | % of updates in V3 |\n|---|---|\n";
    for (const auto& [month, tenths] : series)
        md += "| " + month + " | " + stats::format_percent(tenths) + " |\n";
    md += "\n" + stats::render_rollback_markdown(rollback);
    write_text_file(config.output_dir / "stats.md", md);

    std::cout << adoption_path.string() << '\n' << rollback_path.string() << '\n';
    log_event("info", "stats_done",
              json{{"months", series.size()},
                   {"rolled_back", rollback.rolled_back_ids.size()}});
    return kExitOk;
}

}  // namespace mv3::cli
