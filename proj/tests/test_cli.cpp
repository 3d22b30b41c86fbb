// End-to-end checks of the command-line tool: output schemas, the degenerate
// zero-torque evaluation, exit codes, and strict config handling.

#include <catch2/catch.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("metagrip_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(METAGRIP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("eval-forces with all torques zeroed reports zero forces and zero deviation") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "zero.json";
    {
        std::ofstream out(cfg);
        out << R"({"springs": {"k1": 0, "k2": 0, "tau_s1": 0, "tau_s2": 0},
                   "objective": {"tau1": 0}})";
    }
    REQUIRE(run_cli("eval-forces --config " + cfg.string() + " --out " + tmp.path.string()) == 0);
    const json j = json::parse(slurp(tmp.path / "forces.json"));
    CHECK(j["closed_form"]["f1_N"].get<double>() == 0.0);
    CHECK(j["closed_form"]["f2_N"].get<double>() == 0.0);
    CHECK(j["closed_form"]["f3_N"].get<double>() == 0.0);
    CHECK(j["max_relative_deviation"].get<double>() == 0.0);
}

TEST_CASE("simulate-arm writes the fixed csv header and a manifest") {
    TempDir tmp;
    REQUIRE(run_cli("simulate-arm --out " + tmp.path.string()) == 0);
    std::ifstream csv(tmp.path / "arm_trajectory.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "time_s,phase,theta1_rad,theta0_rad,theta2_rad,theta4_rad,omega0_rad_s,"
          "omega2_rad_s,omega4_rad_s,beta0_rad_s2,beta2_rad_s2,beta4_rad_s2,l6_mm,"
          "l6_rate_mm_s,l6_accel_mm_s2");

    const json m = json::parse(slurp(tmp.path / "manifest.json"));
    CHECK(m.contains("config_digest"));
    CHECK(m.contains("started_at"));
    CHECK(m.contains("finished_at"));
    REQUIRE(m["outputs"].is_array());
    CHECK(m["outputs"][0].get<std::string>() == "arm_trajectory.csv");
}

TEST_CASE("optimize emits a per-run history and a result summary") {
    TempDir tmp;
    REQUIRE(run_cli("optimize --runs 2 --particles 20 --iters 15 --seed 3 --out " +
                    tmp.path.string()) == 0);
    std::ifstream csv(tmp.path / "optimize_history.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "run,iteration,best_phi_N");
    int rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == 2 * 16);  // two runs, init plus 15 iterations each

    const json j = json::parse(slurp(tmp.path / "optimize_result.json"));
    CHECK(j["runs"].get<int>() == 2);
    CHECK(j["best_phi_N"].get<double>() >= 0.0);
    CHECK(j["best_x"].contains("l16"));
    CHECK(j["phi_min_N"].get<double>() <= j["phi_max_N"].get<double>());
}

TEST_CASE("a 20-run synthesis batch reaches the expected spread floor") {
    TempDir tmp;
    REQUIRE(run_cli("optimize --runs 20 --particles 200 --iters 300 --seed 7 --out " +
                    tmp.path.string()) == 0);
    const json j = json::parse(slurp(tmp.path / "optimize_result.json"));
    CHECK(j["phi_min_N"].get<double>() <= 1e-6);
}

TEST_CASE("force-surface covers the configured grid") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "surf.json";
    {
        std::ofstream out(cfg);
        out << R"({"surface": {"n2": 4, "n3": 3}})";
    }
    REQUIRE(run_cli("force-surface --config " + cfg.string() + " --out " + tmp.path.string()) ==
            0);
    std::ifstream csv(tmp.path / "force_surface.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "d2_mm,d3_mm,f1_N,f2_N,f3_N");
    int rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == 12);
    CHECK(fs::exists(tmp.path / "force_surface_trends.json"));
}

TEST_CASE("check subcommand passes on the shipped force model") {
    TempDir tmp;
    CHECK(run_cli("check --out " + tmp.path.string()) == 0);
    const json j = json::parse(slurp(tmp.path / "check.json"));
    CHECK(j["max_relative_deviation"].get<double>() <= 1e-8);
}

TEST_CASE("config errors exit with status 2") {
    TempDir tmp;
    const fs::path bad = tmp.path / "bad.json";
    {
        std::ofstream out(bad);
        out << R"({"arm": {"l4": -1}})";
    }
    CHECK(run_cli("eval-forces --config " + bad.string() + " --out " + tmp.path.string()) == 2);

    const fs::path typo = tmp.path / "typo.json";
    {
        std::ofstream out(typo);
        out << R"({"arm": {"l99": 10}})";
    }
    CHECK(run_cli("eval-forces --config " + typo.string() + " --out " + tmp.path.string()) == 2);
    CHECK(run_cli("eval-forces --config " + (tmp.path / "missing.json").string() + " --out " +
                  tmp.path.string()) == 2);
}

TEST_CASE("solver failures exit with status 3") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "unreachable.json";
    {
        // Drive the replay outside the assemblable window.
        std::ofstream out(cfg);
        out << R"({"trajectory": {"theta1_final_deg": 0.0}})";
    }
    CHECK(run_cli("simulate-arm --config " + cfg.string() + " --out " + tmp.path.string()) == 3);
}

TEST_CASE("byte-identical reruns for the same seed and command") {
    TempDir tmp;
    const fs::path a = tmp.path / "a", b = tmp.path / "b";
    fs::create_directories(a);
    fs::create_directories(b);
    REQUIRE(run_cli("optimize --particles 25 --iters 20 --seed 11 --out " + a.string()) == 0);
    REQUIRE(run_cli("optimize --particles 25 --iters 20 --seed 11 --out " + b.string()) == 0);
    CHECK(slurp(a / "optimize_history.csv") == slurp(b / "optimize_history.csv"));
    CHECK(slurp(a / "optimize_result.json") == slurp(b / "optimize_result.json"));
}
