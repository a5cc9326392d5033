#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "doctest.h"

#include "cloc/commands.hpp"
#include "cloc/config.hpp"
#include "cloc/design_io.hpp"
#include "cloc/errors.hpp"

using namespace cloc;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

Config parse(const std::string& text) {
    std::istringstream in(text);
    return Config::parse(in);
}

// Fresh scratch directory per test.
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("cloc_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
    std::ofstream(path) << text;
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string out, err;
};

Run run(const std::string& command, const fs::path& config, const fs::path& out_dir) {
    CommandOptions opt;
    opt.config = config;
    opt.out_dir = out_dir;
    std::ostringstream out, err;
    const int code = run_command(command, opt, out, err);
    return {code, out.str(), err.str()};
}

const char* kDesignConfig =
    "omega_c = 100 Hz\n"
    "beta = 0.3\n"
    "band_half_decades = 0.5\n"
    "gamma = 0\n"
    "plant_gain = 1\n";

}  // namespace

TEST_CASE("unit suffixes") {
    const Config c = parse(
        "# comment line\n"
        "f1 = 100 Hz\n"
        "f2 = 5 rad/s   # trailing comment\n"
        "f3 = 2kHz\n"
        "t1 = 3 ms\n"
        "t2 = 10 us\n"
        "t3 = 1.5 s\n"
        "a1 = 90 deg\n"
        "a2 = 0.5 rad\n"
        "n = 0.25\n"
        "k = 7\n"
        "b = true\n"
        "list = 50 Hz, 100 Hz, 200 Hz\n");
    CHECK(c.frequency("f1") == doctest::Approx(2 * pi * 100));
    CHECK(c.frequency("f2") == 5.0);
    CHECK(c.duration("t1") == doctest::Approx(3e-3));
    CHECK(c.duration("t2") == doctest::Approx(1e-5));
    CHECK(c.duration("t3") == 1.5);
    CHECK(c.angle_deg("a1") == 90.0);
    CHECK(c.angle_deg("a2") == doctest::Approx(0.5 * 180 / pi));
    CHECK(c.number("n") == 0.25);
    CHECK(c.integer("k") == 7);
    CHECK(c.boolean("b"));
    const auto l = c.frequency_list("list");
    REQUIRE(l.size() == 3);
    CHECK(l[2] == doctest::Approx(2 * pi * 200));
    CHECK(parse_frequency("1 Hz") == doctest::Approx(2 * pi));
    CHECK(parse_duration("250 ms") == doctest::Approx(0.25));
    // kHz is not a documented unit
    CHECK_THROWS_AS(c.frequency("f3"), ConfigError);
}

TEST_CASE("missing or wrong units are rejected") {
    const Config c = parse("f = 100\nt = 3 Hz\nx = abc\nk = 2.5\n");
    CHECK_THROWS_AS(c.frequency("f"), ConfigError);
    CHECK_THROWS_AS(c.duration("t"), ConfigError);
    CHECK_THROWS_AS(c.number("x"), ConfigError);
    CHECK_THROWS_AS(c.integer("k"), ConfigError);
    CHECK_THROWS_AS(c.number("absent"), ConfigError);
}

TEST_CASE("strict keys") {
    CHECK_THROWS_AS(parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("just text\n"), ConfigError);
    const Config c = parse("a = 1\nb = 2\n");
    CHECK_NOTHROW(c.restrict_to({"a", "b"}));
    try {
        c.restrict_to({"a"});
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
}

TEST_CASE("design files round trip exactly") {
    DesignInputs in;
    in.omega_c = 2 * pi * 100;
    in.beta = 0.3;
    in.gamma = 0.0;
    in.pm_target_deg = 40.0;
    const ClocDesign d = design_cloc(in);
    std::stringstream ss;
    write_design(ss, d, "# test");
    const ClocDesign back = read_design(Config::parse(ss));
    CHECK(back.omega_c == d.omega_c);
    CHECK(back.omega_crossover == d.omega_crossover);
    CHECK(back.zeta == d.zeta);
    CHECK(back.eta == d.eta);
    CHECK(back.kappa == d.kappa);
    CHECK(back.k_p == d.k_p);
    CHECK(back.M == d.M);
    CHECK(back.N == d.N);
    CHECK(back.pm_target_deg == d.pm_target_deg);
    CHECK(double_integrator_gain(back.plant) == 1.0);
    const double w = 1.7 * d.omega_c;
    CHECK(back.chain.linear_response(w) == d.chain.linear_response(w));

    std::stringstream bad(ss.str() + "mystery = 1\n");
    CHECK_THROWS_AS(read_design(Config::parse(bad)), ConfigError);
}

TEST_CASE("command exit codes") {
    const fs::path dir = scratch("exit_codes");
    SUBCASE("unknown command and missing config") {
        const fs::path cfg = write_file(dir / "d.cfg", kDesignConfig);
        CHECK(run("plot", cfg, dir).code == kExitConfig);
        CHECK(run("design", dir / "absent.cfg", dir).code == kExitConfig);
    }
    SUBCASE("unknown key") {
        const fs::path cfg = write_file(dir / "d.cfg", std::string(kDesignConfig) + "colour = blue\n");
        const Run r = run("design", cfg, dir);
        CHECK(r.code == kExitConfig);
        CHECK(r.err.find("colour") != std::string::npos);
    }
    SUBCASE("empty grid") {
        const fs::path cfg = write_file(dir / "b.cfg",
                                        "system = fore\nomega_r = 1 rad/s\ngamma = 0\n"
                                        "grid_min = 10 rad/s\ngrid_max = 10 rad/s\n");
        CHECK(run("bode", cfg, dir).code == kExitConfig);
    }
    SUBCASE("unstable base linear system") {
        std::string text = kDesignConfig;
        text.replace(text.find("plant_gain = 1"), 14, "plant_gain = -1");
        const Run r = run("design", write_file(dir / "d.cfg", text), dir);
        CHECK(r.code == kExitInfeasible);
        CHECK_FALSE(r.err.empty());
    }
    SUBCASE("diverging simulation") {
        REQUIRE(run("design", write_file(dir / "d.cfg", kDesignConfig), dir).code == kExitOk);
        std::string design = slurp(dir / "design.txt");
        const auto at = design.find("k_p = ");
        design.insert(at + 6, "-");
        write_file(dir / "flipped.txt", design);
        const fs::path cfg = write_file(dir / "s.cfg",
                                        "design_file = flipped.txt\nbandwidths = 100 Hz\n"
                                        "duration = 0.5 s\ncontrollers = cloc\nrecord_stride = 100\n");
        CHECK(run("step", cfg, dir).code == kExitNumerical);
    }
}

TEST_CASE("design command reports") {
    const fs::path dir = scratch("reports");
    SUBCASE("linear fallback") {
        const fs::path cfg = write_file(dir / "d.cfg",
                                        "omega_c = 100 Hz\nbeta = 0\nband_half_decades = 0.5\ngamma = 1\nplant_gain = 1\n");
        const Run r = run("design", cfg, dir);
        REQUIRE(r.code == kExitOk);
        CHECK(slurp(dir / "report.txt").find("linear fallback") != std::string::npos);
    }
    SUBCASE("unreachable margin") {
        const fs::path cfg = write_file(dir / "d.cfg", std::string(kDesignConfig) + "pm_target = 85 deg\n");
        REQUIRE(run("design", cfg, dir).code == kExitOk);
        const std::string report = slurp(dir / "report.txt");
        CHECK(report.find("raise beta") != std::string::npos);
        for (const char* step : {"1.", "2.", "3.", "4.", "5.", "6.", "7.", "8."}) CHECK(report.find(step) != std::string::npos);
    }
}

TEST_CASE("outputs are deterministic and carry a header") {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const std::string bode =
        "system = cglp\nomega_r = 1 rad/s\nomega_f = 100 rad/s\ngamma = 0\nkappa = auto\n"
        "omega_l = 1 rad/s\nomega_h = 10 rad/s\nfit_beta = 0.4\ntarget_beta = 0.4\n"
        "grid_min = 0.1 rad/s\ngrid_max = 100 rad/s\npoints_per_decade = 50\nharmonics = 5\n";
    for (const fs::path& dir : {a, b}) {
        REQUIRE(run("bode", write_file(dir / "bode.cfg", bode), dir).code == kExitOk);
        REQUIRE(run("design", write_file(dir / "d.cfg", kDesignConfig), dir).code == kExitOk);
        const fs::path cfg = write_file(dir / "sens.cfg",
                                        "design_file = design.txt\nfrequencies = 5 Hz, 50 Hz\ncycles = 20\n");
        REQUIRE(run("sensitivity", cfg, dir).code == kExitOk);
    }
    for (const char* name : {"hosidf.csv", "design.txt", "sensitivity.csv"}) {
        const std::string x = slurp(a / name), y = slurp(b / name);
        CHECK(x == y);
        CHECK(x.rfind(std::string("# cloc ") + kToolVersion, 0) == 0);
    }
    const std::string csv = slurp(a / "hosidf.csv");
    CHECK(csv.find("fit_beta=0.4") != std::string::npos);
    CHECK(csv.find("omega_rad_s,harmonic_n,re,im,mag_db,phase_deg_unwrapped,target_mag_db,target_phase_deg") !=
          std::string::npos);
}

TEST_CASE("identity-reset CgLp gives a flat first harmonic") {
    const fs::path dir = scratch("flat");
    const fs::path cfg = write_file(dir / "b.cfg",
                                    "system = cglp\nomega_r = 10 rad/s\nomega_f = 1e9 rad/s\ngamma = 1\nkappa = 1\n"
                                    "grid_min = 1 rad/s\ngrid_max = 1000 rad/s\npoints_per_decade = 20\nharmonics = 3\n");
    REQUIRE(run("bode", cfg, dir).code == kExitOk);
    std::istringstream csv(slurp(dir / "hosidf.csv"));
    std::string line;
    std::getline(csv, line);
    std::getline(csv, line);
    int rows = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string s; std::getline(ls, s, ',');) f.push_back(s);
        if (f[1] != "1") continue;
        CHECK(std::abs(std::stod(f[4])) < 1e-6);
        ++rows;
    }
    CHECK(rows == 61);
}

TEST_CASE("step suite writes six metric rows") {
    const fs::path dir = scratch("steps");
    REQUIRE(run("design", write_file(dir / "d.cfg", kDesignConfig), dir).code == kExitOk);
    const fs::path cfg = write_file(dir / "s.cfg",
                                    "design_file = design.txt\nbandwidths = 50 Hz, 100 Hz, 200 Hz\n"
                                    "duration = 20 ms\nrecord_stride = 50\n");
    const Run r = run("step", cfg, dir);
    REQUIRE(r.code == kExitOk);
    std::istringstream csv(slurp(dir / "step_metrics.csv"));
    int rows = 0;
    for (std::string line; std::getline(csv, line);)
        if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 7);  // column header plus six runs
    CHECK(fs::exists(dir / "step_cloc_200Hz.csv"));
    CHECK(fs::exists(dir / "resets_step_pid_50Hz.csv"));
}
