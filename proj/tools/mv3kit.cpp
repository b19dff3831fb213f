#include <string>

#include <CLI11.hpp>

#include "mv3/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mv3kit: Manifest V2 to V3 migration and extension analysis toolkit"};
    app.require_subcommand(1);

    mv3::cli::RunConfig config;
    std::string counting_mode = "code_only";
    std::string labels_file;
    std::string metadata_file;

    auto add_common = [&](CLI::App* cmd, bool inputs_required) {
        auto* inputs = cmd->add_option("inputs", config.inputs,
                                       "package directories, .zip archives or corpus directories");
        if (inputs_required) inputs->required();
        cmd->add_option("--out", config.output_dir, "output directory")
            ->capture_default_str();
        cmd->add_option("--jobs", config.parallelism, "worker threads")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--counting-mode", counting_mode,
                        "API hit counting: code_only or permissive")
            ->check(CLI::IsMember({"code_only", "permissive"}))
            ->capture_default_str();
        cmd->add_flag("--fail-fast", config.fail_fast, "stop the batch on the first error");
        cmd->add_option("--blocklist", config.blocklists,
                        "filter list (.txt ABP syntax or .domains plain list); repeatable");
        cmd->add_option("--labels", labels_file, "labels.csv with review metadata");
        cmd->add_option("--metadata", metadata_file, "metadata.csv with version history");
    };

    CLI::App* convert = app.add_subcommand("convert", "convert V2 packages to V3");
    add_common(convert, true);
    CLI::App* scan = app.add_subcommand("scan", "scan packages for risky API usage");
    add_common(scan, true);
    CLI::App* classify =
        app.add_subcommand("classify", "decide the functionally-active criteria per package");
    add_common(classify, true);
    CLI::App* stats = app.add_subcommand("stats", "adoption and rollback statistics");
    add_common(stats, false);

    CLI11_PARSE(app, argc, argv);

    config.counting_mode = counting_mode == "permissive"
                               ? mv3::jslex::CountingMode::Permissive
                               : mv3::jslex::CountingMode::CodeOnly;
    if (!labels_file.empty()) config.labels_file = labels_file;
    if (!metadata_file.empty()) config.metadata_file = metadata_file;

    if (convert->parsed()) return mv3::cli::cmd_convert(config);
    if (scan->parsed()) return mv3::cli::cmd_scan(config);
    if (classify->parsed()) return mv3::cli::cmd_classify(config);
    if (stats->parsed()) return mv3::cli::cmd_stats(config);
    return mv3::cli::kExitConfigError;
}
