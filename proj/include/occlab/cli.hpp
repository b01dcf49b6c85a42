#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace occlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// One parsed command line.
struct CliInvocation {
    std::string subcommand;  ///< occupancy, sweep, gcrl, stitch, shortcut, ablate, interp or oracle
    std::string config_path;
    std::vector<std::string> overrides;  ///< dotted key=value
    std::string output_dir;
    std::optional<std::vector<std::uint64_t>> seeds;
    std::optional<int> workers;
    bool force = false;
    bool dry_run = false;
    bool plots = true;
};

const std::vector<std::string>& cli_subcommands();

/// Runs one invocation and returns the exit status. Errors are reported on `err` as one JSON line.
int dispatch(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

/// Parses argv (with CLI11) and dispatches. OCCLAB_OUTDIR supplies the default output directory.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace occlab
