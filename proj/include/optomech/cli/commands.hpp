#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "optomech/cli/config.hpp"
#include "optomech/cli/io.hpp"

namespace optomech::cli {

enum class OutputFormat { csv, svg, both };

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  OutputFormat format = OutputFormat::csv;
  bool verbose = false;
  std::optional<std::filesystem::path> input;
  std::optional<std::string> procedure;
};

struct CommandResult {
  std::vector<OutputFile> files;  // CSV and SVG outputs, in emission order
  std::string summary;            // human-readable lines for stdout
};

const std::vector<std::string>& command_names();

/// Runs one command against an already loaded config. Reads every key it
/// needs, rejects unknown keys and returns the outputs without touching disk.
CommandResult run_command(const std::string& name, Config& config, const CommandOptions& options);

/// 0 success, 2 configuration or input error, 3 numeric divergence, 4 fit
/// non-convergence, 1 anything else.
int exit_code(const std::exception& error);

/// Full command-line entry point.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace optomech::cli
