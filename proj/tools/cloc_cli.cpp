#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cloc/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Reset-based complex-order controller toolkit"};
    app.set_version_flag("--version", cloc::kToolVersion);
    app.require_subcommand(1);

    cloc::CommandOptions opt;
    double dt = 0.0;
    std::string grid;
    int harmonics = 0;

    const std::pair<const char*, const char*> commands[] = {
        {"bode", "describing-function sweep of a reset element, CgLp or stored design"},
        {"design", "run the CLOC tuning procedure and write design.txt and report.txt"},
        {"step", "closed-loop step responses and metrics for PID and CLOC"},
        {"track", "closed-loop sinusoidal tracking run"},
        {"sensitivity", "simulated |e|/|r| over a frequency sweep"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "flat key = value configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
        sub->add_option("--dt", dt, "integration step in seconds (simulation commands)");
        sub->add_option("--grid", grid, "frequency grid 'lo,hi[,points_per_decade]' with unit-suffixed bounds");
        sub->add_option("--harmonics", harmonics, "highest odd harmonic (bode)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cloc::kExitConfig;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--dt")) opt.dt = dt;
    if (chosen->count("--grid")) opt.grid = grid;
    if (chosen->count("--harmonics")) opt.harmonics = harmonics;
    return cloc::run_command(chosen->get_name(), opt, std::cout, std::cerr);
}
