// Batch front-end for the loading-manipulator toolkit: arm trajectory export,
// contact-force evaluation and surfaces, gripper dimensional optimization,
// vehicle coordination, and the closed-form-vs-virtual-work check suite.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "metagrip/arm.hpp"
#include "metagrip/config.hpp"
#include "metagrip/coordination.hpp"
#include "metagrip/csvio.hpp"
#include "metagrip/gripper.hpp"
#include "metagrip/kinetostatics.hpp"
#include "metagrip/pso.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace metagrip;

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr double kCheckTolerance = 1e-8;

std::string iso_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunContext {
    ToolConfig config;
    fs::path out_dir;
    std::string started_at;
    std::vector<std::string> outputs;

    fs::path out_path(const std::string& name) {
        outputs.push_back(name);
        return out_dir / name;
    }

    void write_json(const std::string& name, const json& j) {
        std::ofstream out(out_path(name), std::ios::binary);
        if (!out) throw ConfigError("cannot open output file " + name);
        out << j.dump(2) << '\n';
    }

    void write_manifest() {
        json m;
        m["config_digest"] = config_digest(config);
        m["finished_at"] = iso_utc_now();
        m["outputs"] = outputs;
        m["seed"] = config.pso.seed;
        m["started_at"] = started_at;
        m["tool_version"] = kToolVersion;
        std::ofstream out(out_dir / "manifest.json", std::ios::binary);
        out << m.dump(2) << '\n';
    }
};

json forces_json(const ContactForces& f) {
    return json{{"f1_N", f.f1}, {"f2_N", f.f2}, {"f3_N", f.f3}};
}

double force_deviation(const ContactForces& a, const ContactForces& b) {
    const double scale =
        std::max({std::abs(a.f1), std::abs(a.f2), std::abs(a.f3), 1e-3});
    return std::max({std::abs(a.f1 - b.f1), std::abs(a.f2 - b.f2), std::abs(a.f3 - b.f3)}) /
           scale;
}

void run_simulate_arm(RunContext& rc) {
    const ToolConfig& c = rc.config;
    const auto profile = build_replay_profile(c.trajectory);
    const auto traj = simulate_trajectory(
        c.arm, profile, c.trajectory.omega1, deg2rad(c.trajectory.theta4_deg),
        {deg2rad(c.trajectory.guess_theta0_deg), deg2rad(c.trajectory.guess_theta2_deg)});

    CsvWriter csv(rc.out_path("arm_trajectory.csv"),
                  {"time_s", "phase", "theta1_rad", "theta0_rad", "theta2_rad", "theta4_rad",
                   "omega0_rad_s", "omega2_rad_s", "omega4_rad_s", "beta0_rad_s2",
                   "beta2_rad_s2", "beta4_rad_s2", "l6_mm", "l6_rate_mm_s", "l6_accel_mm_s2"});
    for (const auto& sample : traj) {
        const ArmState& s = sample.state;
        csv.write_row_strings({format_double(sample.time), phase_name(sample.phase),
                               format_double(s.theta1), format_double(s.theta0),
                               format_double(s.theta2), format_double(s.theta4),
                               format_double(s.omega0), format_double(s.omega2),
                               format_double(s.omega4), format_double(s.beta0),
                               format_double(s.beta2), format_double(s.beta4),
                               format_double(s.l6), format_double(s.l6_rate),
                               format_double(s.l6_accel)});
    }
    std::cout << "simulate-arm: wrote " << traj.size() << " samples\n";
}

void run_eval_forces(RunContext& rc) {
    const ToolConfig& c = rc.config;
    const JointTorques tau = c.grasp_torques();
    const ContactForces closed = contact_forces(tau, c.segments(), c.knuckles, c.contacts);
    const ContactForces oracle = virtual_work_oracle(tau, c.segments(), c.knuckles, c.contacts);
    json j;
    j["closed_form"] = forces_json(closed);
    j["contacts_mm"] = {{"d1", c.contacts.d1}, {"d2", c.contacts.d2}, {"d3", c.contacts.d3}};
    j["knuckles_deg"] = {{"alpha1", rad2deg(c.knuckles.alpha1)},
                         {"alpha2", rad2deg(c.knuckles.alpha2)},
                         {"alpha3", rad2deg(c.knuckles.alpha3)}};
    j["max_relative_deviation"] = force_deviation(closed, oracle);
    j["oracle"] = forces_json(oracle);
    j["torques_Nmm"] = {{"tau1", tau.tau1}, {"tau2", tau.tau2}, {"tau3", tau.tau3}};
    rc.write_json("forces.json", j);
    std::cout << "eval-forces: closed form (" << closed.f1 << ", " << closed.f2 << ", "
              << closed.f3 << ") N, deviation " << force_deviation(closed, oracle) << "\n";
}

void run_force_surface(RunContext& rc) {
    const ToolConfig& c = rc.config;
    const SurfaceConfig& sc = c.surface;
    const JointTorques tau = c.grasp_torques();
    const auto cells = force_surface(tau, c.segments(), c.knuckles, sc.d1, sc.d2_min,
                                     sc.d2_max, sc.n2, sc.d3_min, sc.d3_max, sc.n3);

    CsvWriter csv(rc.out_path("force_surface.csv"),
                  {"d2_mm", "d3_mm", "f1_N", "f2_N", "f3_N"});
    for (const auto& cell : cells)
        csv.write_row({cell.d2, cell.d3, cell.forces.f1, cell.forces.f2, cell.forces.f3});

    // Sign census of the grid-level partials: a trend diagnostic, not an
    // assertion; the direction of each slope depends on the torque set.
    long f1_d2_pos = 0, f1_d2_neg = 0, f1_d3_pos = 0, f1_d3_neg = 0;
    long f2_d2_pos = 0, f2_d2_neg = 0, f2_d3_pos = 0, f2_d3_neg = 0;
    auto at = [&](int i, int j) -> const ForceSurfaceCell& { return cells[i * sc.n3 + j]; };
    for (int i = 0; i < sc.n2; ++i) {
        for (int j = 0; j < sc.n3; ++j) {
            if (i + 1 < sc.n2) {
                const double df1 = at(i + 1, j).forces.f1 - at(i, j).forces.f1;
                const double df2 = at(i + 1, j).forces.f2 - at(i, j).forces.f2;
                (df1 >= 0 ? f1_d2_pos : f1_d2_neg)++;
                (df2 >= 0 ? f2_d2_pos : f2_d2_neg)++;
            }
            if (j + 1 < sc.n3) {
                const double df1 = at(i, j + 1).forces.f1 - at(i, j).forces.f1;
                const double df2 = at(i, j + 1).forces.f2 - at(i, j).forces.f2;
                (df1 >= 0 ? f1_d3_pos : f1_d3_neg)++;
                (df2 >= 0 ? f2_d3_pos : f2_d3_neg)++;
            }
        }
    }
    json trends;
    trends["f1_vs_d2"] = {{"increasing", f1_d2_pos}, {"decreasing", f1_d2_neg}};
    trends["f1_vs_d3"] = {{"increasing", f1_d3_pos}, {"decreasing", f1_d3_neg}};
    trends["f2_vs_d2"] = {{"increasing", f2_d2_pos}, {"decreasing", f2_d2_neg}};
    trends["f2_vs_d3"] = {{"increasing", f2_d3_pos}, {"decreasing", f2_d3_neg}};
    rc.write_json("force_surface_trends.json", trends);
    std::cout << "force-surface: " << cells.size() << " cells, trends written\n";
}

struct OptimizeOptions {
    int runs = 1;
    std::optional<int> particles;
    std::optional<int> iters;
    std::optional<int> threads;
};

void run_optimize(RunContext& rc, const OptimizeOptions& opt) {
    ToolConfig& c = rc.config;
    if (opt.particles) c.pso.swarm_size = *opt.particles;
    if (opt.iters) c.pso.max_iterations = *opt.iters;
    if (opt.threads) c.pso.threads = *opt.threads;
    c.pso.validate();

    const ObjectiveContext ctx = c.objective_context();
    const auto objective = make_phi_objective(ctx);
    const auto runs = multi_run(objective, c.bounds, c.pso, opt.runs);

    CsvWriter csv(rc.out_path("optimize_history.csv"), {"run", "iteration", "best_phi_N"});
    for (int r = 0; r < static_cast<int>(runs.size()); ++r) {
        for (std::size_t it = 0; it < runs[r].history.size(); ++it) {
            csv.write_row_strings({std::to_string(r), std::to_string(it),
                                   format_double(runs[r].history[it])});
        }
    }

    std::vector<double> bests;
    int winner = 0;
    for (int r = 0; r < static_cast<int>(runs.size()); ++r) {
        bests.push_back(runs[r].best_phi);
        if (runs[r].best_phi < runs[winner].best_phi) winner = r;
    }
    std::vector<double> sorted = bests;
    std::sort(sorted.begin(), sorted.end());
    const DesignVector best = DesignVector::from_vector(runs[winner].best_x);

    json j;
    j["best_phi_N"] = runs[winner].best_phi;
    j["best_run"] = winner;
    j["best_x"] = {{"l16", best.l16}, {"l21", best.l21}, {"l22", best.l22},
                   {"k1", best.k1}, {"k2", best.k2},
                   {"tau_s1", best.tau_s1}, {"tau_s2", best.tau_s2}};
    j["evaluations_per_run"] = runs[0].evaluations;
    j["iterations"] = c.pso.max_iterations;
    j["particles"] = c.pso.swarm_size;
    j["phi_max_N"] = sorted.back();
    j["phi_median_N"] = sorted[sorted.size() / 2];
    j["phi_min_N"] = sorted.front();
    j["runs"] = opt.runs;
    j["seed"] = c.pso.seed;
    j["threads"] = c.pso.threads;
    rc.write_json("optimize_result.json", j);
    std::cout << "optimize: " << opt.runs << " run(s), best phi " << runs[winner].best_phi
              << " N\n";
}

void run_coordinate(RunContext& rc, double target_x, double target_y) {
    const CoordinationSetup& su = rc.config.coordination;
    const GraspPlan plan = plan_grasp(su, {target_x, target_y});
    const EePosition back = ee_position(su, plan.theta0, plan.x_veh);
    json j;
    j["delta_h_mm"] = plan.delta_h;
    j["pregrasp_theta0_deg"] = rad2deg(su.theta0_pregrasp);
    j["roundtrip_error_mm"] =
        std::max(std::abs(back.x - target_x), std::abs(back.y - target_y));
    j["target"] = {{"x_mm", target_x}, {"y_mm", target_y}};
    j["theta0_deg"] = rad2deg(plan.theta0);
    j["theta0_rad"] = plan.theta0;
    j["x_veh_mm"] = plan.x_veh;
    rc.write_json("grasp_plan.json", j);
    std::cout << "coordinate: theta0 " << rad2deg(plan.theta0) << " deg, vehicle travel "
              << plan.x_veh << " mm\n";
}

// Seeded sweep comparing the closed-form forces against the virtual-work
// route; fails (exit 4) when any sample deviates beyond tolerance.
int run_check(RunContext& rc) {
    const ToolConfig& c = rc.config;
    const SegmentLengths seg = c.segments();
    std::mt19937_64 rng(20240801ULL);
    std::uniform_real_distribution<double> angle(0.1, 1.4);
    std::uniform_real_distribution<double> frac(0.0, 1.0);
    std::uniform_real_distribution<double> stiff(10.0, 1000.0);
    std::uniform_real_distribution<double> preload(0.0, 200.0);

    double worst = 0.0;
    const int samples = 1000;
    for (int i = 0; i < samples; ++i) {
        const KnuckleAngles a{angle(rng), angle(rng), angle(rng)};
        const ContactDistances d{2.0 + frac(rng) * (seg.l18 - 2.0),
                                 2.0 + frac(rng) * (seg.l19 - 2.0),
                                 2.0 + frac(rng) * (seg.l20 - 2.0)};
        const auto [tau2, tau3] =
            spring_torques({stiff(rng), stiff(rng), preload(rng), preload(rng)}, a.alpha2,
                           a.alpha3);
        const JointTorques tau{c.tau1, tau2, tau3};
        worst = std::max(worst, force_deviation(contact_forces(tau, seg, a, d),
                                                virtual_work_oracle(tau, seg, a, d)));
    }
    json j;
    j["max_relative_deviation"] = worst;
    j["samples"] = samples;
    j["tolerance"] = kCheckTolerance;
    rc.write_json("check.json", j);
    std::cout << "check: max relative deviation " << worst << " over " << samples
              << " samples (tolerance " << kCheckTolerance << ")\n";
    return worst <= kCheckTolerance ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kinetostatics and dimensional-synthesis toolkit for an underactuated "
                 "loading manipulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    app.add_option("--config", config_path, "Configuration file (JSON)");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", seed_override, "Override the optimizer seed");

    app.fallthrough();
    auto* sim = app.add_subcommand("simulate-arm", "Export the loading-sequence arm trajectory");
    auto* surface = app.add_subcommand("force-surface", "Sweep contact forces over (d2, d3)");
    auto* eval = app.add_subcommand("eval-forces", "Evaluate contact forces once, both routes");
    auto* optimize = app.add_subcommand("optimize", "Particle-swarm gripper dimensional synthesis");
    OptimizeOptions opt;
    optimize->add_option("--runs", opt.runs, "Independent seeded runs")->capture_default_str();
    optimize->add_option("--particles", opt.particles, "Swarm size");
    optimize->add_option("--iters", opt.iters, "Iteration budget");
    optimize->add_option("--threads", opt.threads, "Evaluation threads");
    auto* coordinate = app.add_subcommand("coordinate", "Plan vehicle travel and joint angle");
    double target_x = 0.0, target_y = 0.0;
    coordinate->add_option("--x", target_x, "Target x, mm")->required();
    coordinate->add_option("--y", target_y, "Target y, mm")->required();
    auto* check = app.add_subcommand("check", "Closed-form vs virtual-work agreement sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        RunContext rc;
        rc.config = config_path.empty() ? ToolConfig{} : load_config(config_path);
        rc.config.validate();
        if (seed_override) rc.config.pso.seed = *seed_override;
        rc.out_dir = out_dir;
        std::error_code ec;
        fs::create_directories(rc.out_dir, ec);
        rc.started_at = iso_utc_now();

        int status = 0;
        if (sim->parsed()) run_simulate_arm(rc);
        else if (surface->parsed()) run_force_surface(rc);
        else if (eval->parsed()) run_eval_forces(rc);
        else if (optimize->parsed()) run_optimize(rc, opt);
        else if (coordinate->parsed()) run_coordinate(rc, target_x, target_y);
        else if (check->parsed()) status = run_check(rc);

        rc.write_manifest();
        return status;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
