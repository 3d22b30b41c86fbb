#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "metagrip/arm.hpp"
#include "oracles.hpp"

using namespace metagrip;

namespace {

const NewtonSettings kTight = [] {
    NewtonSettings s;
    s.tolerance = 1e-13;
    return s;
}();

// Operating-branch pose at the approach latch angle.
ArmState lifted_state(const ArmGeometry& g, double theta1) {
    return solve_arm_position(g, theta1, Phase::Lifting, 0.35, {0.54, -1.29}, kTight);
}

}  // namespace

TEST_CASE("position solve matches the dense grid oracle on the operating branch") {
    const ArmGeometry g;
    auto residual2 = [&](double th0, double th2) {
        return arm_loop_residual(g, th0, 1.047, th2, 0.35);
    };
    const Eigen::Vector2d oracle =
        oracles::grid_polish(residual2, {0.0, 1.0, -2.0, -0.8}, 2000);
    // Frozen from the oracle; guards against silent branch changes.
    CHECK(oracle(0) == Approx(0.439886767422).epsilon(1e-9));
    CHECK(oracle(1) == Approx(-1.323355737947).epsilon(1e-9));

    const ArmState s = lifted_state(g, 1.047);
    CHECK(std::abs(s.theta0 - oracle(0)) < 1e-8);
    CHECK(std::abs(s.theta2 - oracle(1)) < 1e-8);
    CHECK(arm_loop_residual(g, s.theta0, s.theta1, s.theta2, s.theta4).norm() <= 1e-8);
}

TEST_CASE("held angles pass through bitwise") {
    const ArmGeometry g;
    const double held4 = 0.3517;
    const ArmState lift = solve_arm_position(g, 1.1, Phase::Lifting, held4, {0.5, -1.3}, kTight);
    CHECK(lift.theta4 == held4);

    const double held0 = lift.theta0;
    const ArmState grasp =
        solve_arm_position(g, 1.05, Phase::Grasping, held0, {lift.theta2, lift.theta4}, kTight);
    CHECK(grasp.theta0 == held0);
}

TEST_CASE("grasping sweep closes the gripper as the drive angle backs off") {
    const ArmGeometry g;
    const ArmState start = solve_arm_position(g, 1.30, Phase::Lifting, 0.35, {0.30, -1.46}, kTight);
    Eigen::Vector2d guess{start.theta2, start.theta4};
    double prev = start.theta4 + 1.0;
    for (double t1 = 1.30; t1 >= 1.049; t1 -= 0.01) {
        const ArmState s = solve_arm_position(g, t1, Phase::Grasping, start.theta0, guess, kTight);
        CHECK(s.theta4 < prev);
        prev = s.theta4;
        guess = {s.theta2, s.theta4};
    }
}

TEST_CASE("zero drive speed gives zero rates, scaling is exact") {
    const ArmGeometry g;
    ArmState s = lifted_state(g, 1.1);
    const ArmState still = arm_rates(g, s, 0.0, Phase::Lifting);
    CHECK(still.omega0 == 0.0);
    CHECK(still.omega2 == 0.0);

    const ArmState w1 = arm_rates(g, s, 0.17, Phase::Lifting);
    const ArmState w2 = arm_rates(g, s, 0.34, Phase::Lifting);
    CHECK(w2.omega0 == 2.0 * w1.omega0);
    CHECK(w2.omega2 == 2.0 * w1.omega2);
}

TEST_CASE("stationary mechanism has zero accelerations, quadratic scaling is exact") {
    const ArmGeometry g;
    ArmState s = lifted_state(g, 1.1);
    const ArmState still = arm_accels(g, arm_rates(g, s, 0.0, Phase::Lifting), 0.0, Phase::Lifting);
    CHECK(still.beta0 == 0.0);
    CHECK(still.beta2 == 0.0);

    const ArmState a1 = arm_accels(g, arm_rates(g, s, 0.15, Phase::Lifting), 0.15, Phase::Lifting);
    const ArmState a2 = arm_accels(g, arm_rates(g, s, 0.30, Phase::Lifting), 0.30, Phase::Lifting);
    CHECK(a2.beta0 == 4.0 * a1.beta0);
    CHECK(a2.beta2 == 4.0 * a1.beta2);
}

TEST_CASE("rates and accelerations match finite differences of the position solver") {
    const ArmGeometry g;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ut1(0.92, 1.28), uw(-0.3, 0.3);
    const double h = 1e-6;

    SECTION("lifting") {
        Eigen::Vector2d guess{0.54, -1.29};
        for (int i = 0; i < 100; ++i) {
            const double t1 = ut1(rng), w1 = uw(rng);
            ArmState s = solve_arm_position(g, t1, Phase::Lifting, 0.35, guess, kTight);
            guess = {s.theta0, s.theta2};
            s = arm_accels(g, arm_rates(g, s, w1, Phase::Lifting), w1, Phase::Lifting);
            auto at = [&](double dt) {
                const ArmState q = solve_arm_position(g, t1 + w1 * dt, Phase::Lifting, 0.35,
                                                      {s.theta0, s.theta2}, kTight);
                return arm_rates(g, q, w1, Phase::Lifting);
            };
            const ArmState p = at(h), m = at(-h);
            CHECK(oracles::rel_err((p.theta0 - m.theta0) / (2 * h), s.omega0) < 1e-6);
            CHECK(oracles::rel_err((p.theta2 - m.theta2) / (2 * h), s.omega2) < 1e-6);
            CHECK(oracles::rel_err((p.omega0 - m.omega0) / (2 * h), s.beta0) < 1e-5);
            CHECK(oracles::rel_err((p.omega2 - m.omega2) / (2 * h), s.beta2) < 1e-5);
        }
    }

    SECTION("grasping") {
        const ArmState s0 = solve_arm_position(g, 1.30, Phase::Lifting, 0.35, {0.30, -1.46}, kTight);
        std::uniform_real_distribution<double> ut1g(1.06, 1.30);
        for (int i = 0; i < 100; ++i) {
            const double t1 = ut1g(rng), w1 = uw(rng);
            ArmState s =
                solve_arm_position(g, t1, Phase::Grasping, s0.theta0, {s0.theta2, s0.theta4}, kTight);
            s = arm_accels(g, arm_rates(g, s, w1, Phase::Grasping), w1, Phase::Grasping);
            auto at = [&](double dt) {
                const ArmState q = solve_arm_position(g, t1 + w1 * dt, Phase::Grasping, s0.theta0,
                                                      {s.theta2, s.theta4}, kTight);
                return arm_rates(g, q, w1, Phase::Grasping);
            };
            const ArmState p = at(h), m = at(-h);
            CHECK(oracles::rel_err((p.theta2 - m.theta2) / (2 * h), s.omega2) < 1e-6);
            CHECK(oracles::rel_err((p.theta4 - m.theta4) / (2 * h), s.omega4) < 1e-6);
            CHECK(oracles::rel_err((p.omega2 - m.omega2) / (2 * h), s.beta2) < 1e-5);
            CHECK(oracles::rel_err((p.omega4 - m.omega4) / (2 * h), s.beta4) < 1e-5);
        }
    }
}

TEST_CASE("slider map evaluates the latch geometry") {
    const ArmGeometry g;  // l7 = 100, l4 = 160, l5 = 58
    const double theta4 = std::asin(0.58);  // puts the arccos argument at zero
    const SliderMotion m = slider_map(g, theta4);
    CHECK(m.l6 == Approx(241.4616).margin(1e-4));
    CHECK(m.l6 == Approx(100.0 * std::cos(theta4) + 160.0).margin(1e-9));
}

TEST_CASE("slider rates vanish with the joint at rest") {
    const ArmGeometry g;
    const SliderMotion m = slider_map(g, 0.4, 0.0, 0.0);
    CHECK(m.l6_rate == 0.0);
    CHECK(m.l6_accel == 0.0);
}

TEST_CASE("slider derivatives match finite differences") {
    const ArmGeometry g;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ut(-0.3, 0.9), uw(-1.0, 1.0);
    const double h = 1e-6;
    for (int i = 0; i < 100; ++i) {
        const double t4 = ut(rng), w4 = uw(rng), b4 = uw(rng);
        const SliderMotion m = slider_map(g, t4, w4, b4);
        auto theta_at = [&](double dt) { return t4 + w4 * dt + 0.5 * b4 * dt * dt; };
        const double fd_rate =
            (slider_map(g, theta_at(h)).l6 - slider_map(g, theta_at(-h)).l6) / (2 * h);
        const double fd_accel = (slider_map(g, theta_at(h), w4 + b4 * h).l6_rate -
                                 slider_map(g, theta_at(-h), w4 - b4 * h).l6_rate) /
                                (2 * h);
        CHECK(oracles::rel_err(fd_rate, m.l6_rate) < 1e-5);
        CHECK(oracles::rel_err(fd_accel, m.l6_accel) < 1e-5);
    }
}

TEST_CASE("slider map rejects poses beyond the mechanical limit") {
    ArmGeometry g;
    g.l7 = 300.0;  // reaches sin(theta4) values that break the arccos domain
    CHECK_THROWS_AS(slider_map(g, 1.2), DomainError);
}

TEST_CASE("trajectory replay keeps the held angles bitwise and stays on branch") {
    const ArmGeometry g;
    std::vector<ProfilePoint> prof;
    double t = 0.0;
    auto seg = [&](double a, double b, int n, Phase ph, bool skip) {
        for (int i = skip ? 1 : 0; i <= n; ++i) {
            prof.push_back({t, a + (b - a) * i / n, ph});
            t += 0.05;
        }
    };
    seg(0.90, 1.30, 80, Phase::Lifting, false);
    seg(1.30, 1.05, 50, Phase::Grasping, true);
    seg(1.05, 0.85, 40, Phase::Lifting, true);

    const auto traj = simulate_trajectory(g, prof, 0.1, 0.35, {0.54, -1.29});
    REQUIRE(traj.size() == prof.size());

    for (std::size_t i = 1; i < traj.size(); ++i) {
        const ArmState& prev = traj[i - 1].state;
        const ArmState& cur = traj[i].state;
        if (traj[i].phase == traj[i - 1].phase) {
            if (traj[i].phase == Phase::Lifting) CHECK(cur.theta4 == prev.theta4);
            else CHECK(cur.theta0 == prev.theta0);
        }
        // Warm-started steps must not hop to the mirror branch.
        CHECK(std::abs(cur.theta0 - prev.theta0) <= 0.1);
        CHECK(std::abs(cur.theta2 - prev.theta2) <= 0.1);
        CHECK(std::abs(cur.theta4 - prev.theta4) <= 0.1);
    }
    for (const auto& sample : traj) {
        const ArmState& s = sample.state;
        CHECK(arm_loop_residual(g, s.theta0, s.theta1, s.theta2, s.theta4).norm() <= 1e-8);
    }
}

TEST_CASE("constant drive profile repeats the same sample") {
    const ArmGeometry g;
    std::vector<ProfilePoint> prof;
    for (int i = 0; i < 10; ++i) prof.push_back({0.1 * i, 1.1, Phase::Lifting});
    const auto traj = simulate_trajectory(g, prof, 0.1, 0.35, {0.54, -1.29});
    for (const auto& sample : traj) {
        CHECK(sample.state.theta0 == traj.front().state.theta0);
        CHECK(sample.state.theta2 == traj.front().state.theta2);
        CHECK(sample.state.omega0 == 0.0);
    }
}

TEST_CASE("trajectory propagates solver failures with the sample index") {
    // theta1 = 0 puts the drive-side chord beyond the reach of the held loop,
    // so no assembly exists there.
    ArmGeometry g;
    std::vector<ProfilePoint> prof{{0.0, 1.1, Phase::Lifting}, {0.1, 0.0, Phase::Lifting}};
    try {
        simulate_trajectory(g, prof, 0.1, 0.35, {0.54, -1.29});
        FAIL("expected a solver error");
    } catch (const SolverError& e) {
        CHECK(std::string(e.what()).find("sample 1") != std::string::npos);
    }
}
