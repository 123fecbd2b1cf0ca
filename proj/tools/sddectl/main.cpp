#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sddectl/scenario.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error category=config_parse: cannot read config file '" << path
              << "'\n";
    std::exit(sddectl::kExitConfigParse);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void add_common_flags(CLI::App* cmd, std::string& config_path,
                      std::vector<std::string>& overrides,
                      std::optional<std::uint64_t>& seed,
                      std::optional<std::int64_t>& paths,
                      std::optional<std::string>& out_dir) {
  cmd->add_option("--config", config_path, "JSON scenario configuration file");
  cmd->add_option("--set", overrides,
                  "Override a configuration entry, e.g. --set scenario.params.gain=15")
      ->take_all();
  cmd->add_option("--seed", seed, "Base seed for simulation paths");
  cmd->add_option("--paths", paths, "Number of Monte Carlo paths");
  cmd->add_option("--out", out_dir, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "sddectl - simulate, verify and analyze safe stochastic time-delay "
      "control scenarios"};
  app.require_subcommand(1);

  struct SubcommandState {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> paths;
    std::optional<std::string> out_dir;
  };

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "Run one closed-loop sample path and write the trace CSV"},
      {"verify", "Monte Carlo safety/stability estimation with reports"},
      {"identities", "Run the pointwise controller-algebra identity suite"},
      {"sweep", "Run every member of a scenario preset family"},
  };

  std::map<std::string, SubcommandState> state;
  for (const auto& [name, description] : commands) {
    CLI::App* cmd = app.add_subcommand(name, description);
    SubcommandState& s = state[name];
    add_common_flags(cmd, s.config_path, s.overrides, s.seed, s.paths, s.out_dir);
  }

  CLI11_PARSE(app, argc, argv);

  for (const auto& [name, description] : commands) {
    if (app.got_subcommand(name)) {
      const SubcommandState& s = state[name];
      sddectl::RunRequest request;
      request.command = name;
      request.config_text = s.config_path.empty() ? "{}" : read_file(s.config_path);
      request.overrides = s.overrides;
      request.seed = s.seed;
      request.paths = s.paths;
      request.out_dir = s.out_dir;
      return sddectl::run(request);
    }
  }
  return sddectl::kExitConfigParse;
}
