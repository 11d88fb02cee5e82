#pragma once

#include "kolmo/config.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace kolmo {

inline constexpr const char* kVersion = "0.1.0";

struct RunOverrides {
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
};

/// Executes one subcommand and writes its artifacts, manifest.json and
/// run_info.json into the output directory. Throws Error on failure.
void run_command(const std::string& subcommand, RunConfig config, const RunOverrides& overrides = {});

/// Maps an exception to the CLI exit code and, for numerical failures,
/// writes diagnostic.json into `output_dir` when it is writable.
int report_failure(const std::exception& e, const std::string& subcommand,
                   const std::filesystem::path& output_dir);

bool is_subcommand(const std::string& name);

}  // namespace kolmo
