#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace cloc {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNumerical = 3, kExitInfeasible = 4 };

struct CommandOptions {
    std::filesystem::path config;
    std::filesystem::path out_dir = ".";
    std::optional<double> dt;           // s
    std::optional<std::string> grid;    // "lo,hi[,points_per_decade]" with unit-suffixed bounds
    std::optional<int> harmonics;       // highest odd harmonic
};

// Runs bode, design, step, track or sensitivity. Errors are reported on err
// and mapped to the exit-code contract.
int run_command(const std::string& name, const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace cloc
