#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sddectl {

/// One CLI invocation: a command, the JSON configuration text, dotted-path
/// overrides ("scenario.params.gain=15") and the common flag overrides.
struct RunRequest {
  std::string command;  // simulate | verify | identities | sweep
  std::string config_text = "{}";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> paths;
  std::optional<std::string> out_dir;
};

/// Exit codes keyed to error categories.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfigParse = 2,
  kExitUnknownName = 3,
  kExitInvariant = 4,
  kExitRuntime = 5,
  kExitInternal = 10,
};

/// Executes a request end to end: resolves the scenario against the
/// registries, runs the command and writes its output files (atomically:
/// temp file + rename). Errors are reported on stderr with a machine
/// readable `category=` tag; the return value is the exit code.
int run(const RunRequest& request);

/// Registry listings (for --help style output and tests).
std::vector<std::string> registered_models();
std::vector<std::string> registered_controllers();
std::vector<std::string> registered_sclkfs();
std::vector<std::string> registered_scbkfs();

}  // namespace sddectl
