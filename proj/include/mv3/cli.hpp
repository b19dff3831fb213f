#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "mv3/jslex.hpp"

namespace mv3::cli {

struct RunConfig {
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> blocklists;
    std::optional<std::filesystem::path> labels_file;
    std::optional<std::filesystem::path> metadata_file;
    std::filesystem::path output_dir = "mv3kit-out";
    int parallelism = 1;
    jslex::CountingMode counting_mode = jslex::CountingMode::CodeOnly;
    bool fail_fast = false;
};

// Exit code vocabulary, fixed for CI scripting.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIoError = 2;
inline constexpr int kExitConversionFailures = 3;
inline constexpr int kExitConfigError = 4;

int cmd_convert(const RunConfig& config);
int cmd_scan(const RunConfig& config);
int cmd_classify(const RunConfig& config);
int cmd_stats(const RunConfig& config);

// Resolves inputs to package roots: a directory with a root manifest.json or
// a .zip file is one package; any other directory is a corpus whose
// immediate children are packages.  Missing paths throw IoError.
std::vector<std::filesystem::path> discover_packages(
    const std::vector<std::filesystem::path>& inputs);

}  // namespace mv3::cli
