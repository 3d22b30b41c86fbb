#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "metagrip/errors.hpp"
#include "metagrip/numerics.hpp"

namespace metagrip {

// Link lengths of the loading arm, mm. The slider displacement l6 is a state
// variable and lives in ArmState.
struct ArmGeometry {
    double l0 = 397.0;
    double l1 = 181.0;
    double l2 = 130.0;
    double l3 = 180.0;
    double l4 = 160.0;
    double l5 = 58.0;
    double l7 = 100.0;
    double l8 = 150.0;

    void validate() const {
        const std::pair<double, const char*> lengths[] = {
            {l0, "l0"}, {l1, "l1"}, {l2, "l2"}, {l3, "l3"},
            {l4, "l4"}, {l5, "l5"}, {l7, "l7"}, {l8, "l8"}};
        for (const auto& [value, name] : lengths) {
            if (!(value > 0.0))
                throw ValidationError(std::string("arm: ") + name + " must be positive");
        }
        if (!(l5 < l7 + l4)) throw ValidationError("arm: l5 must be below l7 + l4 for the slider map");
    }
};

// Which angle the topology phase freezes: the slider latch holds theta4 while
// the arm lifts or descends, the main joint holds theta0 while the gripper
// closes or opens.
enum class Phase { Lifting, Grasping };

inline const char* phase_name(Phase p) { return p == Phase::Lifting ? "lifting" : "grasping"; }

struct ArmState {
    double theta0 = 0.0;  // rad, between arm rod and vertical rod
    double theta1 = 0.0;  // rad, drive angle
    double theta2 = 0.0;  // rad, between l2 and l3
    double theta4 = 0.0;  // rad, between l6 and l7
    double omega0 = 0.0, omega1 = 0.0, omega2 = 0.0, omega4 = 0.0;  // rad/s
    double beta0 = 0.0, beta2 = 0.0, beta4 = 0.0;                   // rad/s^2
    double l6 = 0.0;       // slider displacement, mm
    double l6_rate = 0.0;  // mm/s
    double l6_accel = 0.0; // mm/s^2
};

/// Planar closure residual of the arm loop, mm. Zero iff the four angles
/// describe an assembled mechanism.
inline Eigen::Vector2d arm_loop_residual(const ArmGeometry& g, double theta0, double theta1,
                                         double theta2, double theta4) {
    const double c1 = std::cos(theta1), s1 = std::sin(theta1);
    const double c12 = std::cos(theta1 + theta2), s12 = std::sin(theta1 + theta2);
    const double c04 = std::cos(theta0 - theta4), s04 = std::sin(theta0 - theta4);
    const double c0 = std::cos(theta0), s0 = std::sin(theta0);
    return {g.l2 * c1 - g.l3 * c12 - g.l7 * s04 + g.l1 - g.l8 * s0,
            g.l2 * s1 - g.l3 * s12 + g.l7 * c04 - g.l0 + g.l8 * c0};
}

/// Position solve of the arm loop for a given drive angle.
///
/// In Lifting the pair (theta0, theta2) is free and theta4 is held; in
/// Grasping the pair (theta2, theta4) is free and theta0 is held. The guess
/// selects the assembly branch; rates in the returned state are zero.
inline ArmState solve_arm_position(const ArmGeometry& g, double theta1, Phase phase,
                                   double held_angle, Eigen::Vector2d guess,
                                   const NewtonSettings& settings = {}) {
    auto residual = [&](const Vector& u) -> Vector {
        Eigen::Vector2d r;
        if (phase == Phase::Lifting)
            r = arm_loop_residual(g, u(0), theta1, u(1), held_angle);
        else
            r = arm_loop_residual(g, held_angle, theta1, u(0), u(1));
        return r;
    };
    const SolveReport rep = solve_newton(residual, Vector(guess), settings);
    if (!rep.converged) {
        throw NoConvergence("arm position solve failed at theta1=" + std::to_string(theta1) +
                            " (" + std::string(phase_name(phase)) + ")");
    }
    ArmState s;
    s.theta1 = theta1;
    if (phase == Phase::Lifting) {
        s.theta0 = rep.solution(0);
        s.theta2 = rep.solution(1);
        s.theta4 = held_angle;
    } else {
        s.theta0 = held_angle;
        s.theta2 = rep.solution(0);
        s.theta4 = rep.solution(1);
    }
    return s;
}

namespace detail {

inline Eigen::Matrix2d lifting_velocity_matrix(const ArmGeometry& g, const ArmState& s) {
    const double c12 = std::cos(s.theta1 + s.theta2), s12 = std::sin(s.theta1 + s.theta2);
    const double c04 = std::cos(s.theta0 - s.theta4), s04 = std::sin(s.theta0 - s.theta4);
    const double c0 = std::cos(s.theta0), s0 = std::sin(s.theta0);
    Eigen::Matrix2d m;
    m << g.l7 * c04 + g.l8 * c0, -g.l3 * s12,
         g.l7 * s04 + g.l8 * s0,  g.l3 * c12;
    return m;
}

inline Eigen::Matrix2d grasping_velocity_matrix(const ArmGeometry& g, const ArmState& s) {
    const double c12 = std::cos(s.theta1 + s.theta2), s12 = std::sin(s.theta1 + s.theta2);
    const double c04 = std::cos(s.theta0 - s.theta4), s04 = std::sin(s.theta0 - s.theta4);
    Eigen::Matrix2d m;
    m << -g.l3 * s12, -g.l7 * c04,
          g.l3 * c12, -g.l7 * s04;
    return m;
}

// Right-hand side shared by both phases: derivative of the loop with respect
// to the drive angle.
inline Eigen::Vector2d drive_column(const ArmGeometry& g, const ArmState& s) {
    const double c1 = std::cos(s.theta1), s1 = std::sin(s.theta1);
    const double c12 = std::cos(s.theta1 + s.theta2), s12 = std::sin(s.theta1 + s.theta2);
    return {-g.l2 * s1 + g.l3 * s12, g.l2 * c1 - g.l3 * c12};
}

// Time derivative of drive_column along the current motion (drive speed held
// constant).
inline Eigen::Vector2d drive_column_rate(const ArmGeometry& g, const ArmState& s) {
    const double c1 = std::cos(s.theta1), s1 = std::sin(s.theta1);
    const double c12 = std::cos(s.theta1 + s.theta2), s12 = std::sin(s.theta1 + s.theta2);
    const double w12 = s.omega1 + s.omega2;
    return {-g.l2 * c1 * s.omega1 + g.l3 * c12 * w12,
            -g.l2 * s1 * s.omega1 + g.l3 * s12 * w12};
}

}  // namespace detail

/// Angular velocities for a loop-consistent state at drive speed omega1.
/// Lifting fills (omega0, omega2) with omega4 = 0; Grasping fills
/// (omega2, omega4) with omega0 = 0.
inline ArmState arm_rates(const ArmGeometry& g, ArmState s, double omega1, Phase phase) {
    s.omega1 = omega1;
    const Eigen::Vector2d rhs = detail::drive_column(g, s) * omega1;
    if (phase == Phase::Lifting) {
        const Eigen::Vector2d w = detail::solve2(detail::lifting_velocity_matrix(g, s), rhs, "arm rates");
        s.omega0 = w(0);
        s.omega2 = w(1);
        s.omega4 = 0.0;
    } else {
        const Eigen::Vector2d w = detail::solve2(detail::grasping_velocity_matrix(g, s), rhs, "arm rates");
        s.omega0 = 0.0;
        s.omega2 = w(0);
        s.omega4 = w(1);
    }
    return s;
}

/// Angular accelerations for a state that already carries rates. The drive
/// runs at constant speed, so every term is quadratic in the rates.
inline ArmState arm_accels(const ArmGeometry& g, ArmState s, double omega1, Phase phase) {
    s.omega1 = omega1;
    const double c12 = std::cos(s.theta1 + s.theta2), s12 = std::sin(s.theta1 + s.theta2);
    const double c04 = std::cos(s.theta0 - s.theta4), s04 = std::sin(s.theta0 - s.theta4);
    const double w12 = s.omega1 + s.omega2;
    const Eigen::Vector2d bdot = detail::drive_column_rate(g, s);
    if (phase == Phase::Grasping) {
        Eigen::Matrix2d mdot;  // holds theta0; the loop matrix drifts with omega2, omega4
        mdot << -g.l3 * c12 * w12, -g.l7 * s04 * s.omega4,
                -g.l3 * s12 * w12,  g.l7 * c04 * s.omega4;
        const Eigen::Vector2d rhs =
            bdot * omega1 - mdot * Eigen::Vector2d(s.omega2, s.omega4);
        const Eigen::Vector2d b =
            detail::solve2(detail::grasping_velocity_matrix(g, s), rhs, "arm accels");
        s.beta0 = 0.0;
        s.beta2 = b(0);
        s.beta4 = b(1);
    } else {
        const double c0 = std::cos(s.theta0), s0 = std::sin(s.theta0);
        Eigen::Matrix2d mdot;  // holds theta4
        mdot << -(g.l7 * s04 + g.l8 * s0) * s.omega0, -g.l3 * c12 * w12,
                 (g.l7 * c04 + g.l8 * c0) * s.omega0, -g.l3 * s12 * w12;
        const Eigen::Vector2d rhs =
            bdot * omega1 - mdot * Eigen::Vector2d(s.omega0, s.omega2);
        const Eigen::Vector2d b =
            detail::solve2(detail::lifting_velocity_matrix(g, s), rhs, "arm accels");
        s.beta0 = b(0);
        s.beta2 = b(1);
        s.beta4 = 0.0;
    }
    return s;
}

struct SliderMotion {
    double l6 = 0.0;
    double l6_rate = 0.0;
    double l6_accel = 0.0;
};

/// Slider displacement and its time derivatives as a function of theta4.
/// Throws DomainError when the arccos argument leaves (-1, 1), i.e. the
/// slider is at or beyond its mechanical limit.
inline SliderMotion slider_map(const ArmGeometry& g, double theta4, double omega4 = 0.0,
                               double beta4 = 0.0) {
    const double st = std::sin(theta4), ct = std::cos(theta4);
    const double u = (g.l7 * st - g.l5) / g.l4;
    if (!(std::abs(u) < 1.0)) {
        throw DomainError("slider_map: arccos argument " + std::to_string(u) +
                          " outside (-1, 1)");
    }
    const double c = g.l5 - g.l7 * st;   // = -u * l4
    const double b = 1.0 - (c * c) / (g.l4 * g.l4);
    const double a = ct * ct;
    const double sqrt_b = std::sqrt(b);

    SliderMotion m;
    m.l6 = g.l7 * ct + g.l4 * std::sin(std::acos(u));
    m.l6_rate = -g.l7 * omega4 * st + (g.l7 * omega4 * ct) * c / (g.l4 * sqrt_b);
    m.l6_accel = -g.l7 * (beta4 * st + omega4 * omega4 * ct) +
                 (c / sqrt_b) * g.l7 * (beta4 * ct - omega4 * omega4 * st) / g.l4 -
                 (a / sqrt_b) * (g.l7 * g.l7 * omega4 * omega4 / g.l4) *
                     (1.0 + (c * c) / (b * g.l4 * g.l4));
    return m;
}

struct ProfilePoint {
    double time = 0.0;    // s
    double theta1 = 0.0;  // rad
    Phase phase = Phase::Lifting;
};

struct TrajectorySample {
    double time = 0.0;
    Phase phase = Phase::Lifting;
    ArmState state;
};

/// Sweeps the arm through a time-stamped drive profile with warm-started
/// guesses, carrying the held angle across phase changes. omega1 sets the
/// constant drive speed magnitude; its sign follows the profile slope.
///
/// The caller supplies the pose at the first sample: held theta4 for a
/// profile that starts in Lifting (plus a (theta0, theta2) guess), or held
/// theta0 for one that starts in Grasping (plus a (theta2, theta4) guess).
inline std::vector<TrajectorySample> simulate_trajectory(
    const ArmGeometry& g, const std::vector<ProfilePoint>& profile, double omega1,
    double initial_held, Eigen::Vector2d initial_guess, const NewtonSettings& settings = {}) {
    std::vector<TrajectorySample> out;
    out.reserve(profile.size());
    double held_theta0 = 0.0, held_theta4 = 0.0;
    if (!profile.empty()) {
        if (profile.front().phase == Phase::Lifting)
            held_theta4 = initial_held;
        else
            held_theta0 = initial_held;
    }
    Eigen::Vector2d guess = initial_guess;
    Phase prev_phase = profile.empty() ? Phase::Lifting : profile.front().phase;

    for (std::size_t i = 0; i < profile.size(); ++i) {
        const ProfilePoint& p = profile[i];
        if (i > 0 && !(p.time >= profile[i - 1].time))
            throw ValidationError("trajectory profile must be monotone in time");

        if (p.phase != prev_phase) {
            // Phase change freezes the other angle at its last solved value.
            const ArmState& last = out.back().state;
            if (p.phase == Phase::Lifting) {
                held_theta4 = last.theta4;
                guess = {last.theta0, last.theta2};
            } else {
                held_theta0 = last.theta0;
                guess = {last.theta2, last.theta4};
            }
            prev_phase = p.phase;
        }

        const double held = (p.phase == Phase::Lifting) ? held_theta4 : held_theta0;
        double w1 = 0.0;
        if (i > 0) {
            const double dtheta = p.theta1 - profile[i - 1].theta1;
            if (dtheta > 0.0) w1 = std::abs(omega1);
            else if (dtheta < 0.0) w1 = -std::abs(omega1);
        } else if (profile.size() > 1) {
            const double dtheta = profile[1].theta1 - p.theta1;
            if (dtheta > 0.0) w1 = std::abs(omega1);
            else if (dtheta < 0.0) w1 = -std::abs(omega1);
        }

        ArmState s;
        const std::string where =
            "trajectory sample " + std::to_string(i) + " at t=" + std::to_string(p.time) + ": ";
        try {
            s = solve_arm_position(g, p.theta1, p.phase, held, guess, settings);
            s = arm_rates(g, s, w1, p.phase);
            s = arm_accels(g, s, w1, p.phase);
            const SliderMotion sm = slider_map(g, s.theta4, s.omega4, s.beta4);
            s.l6 = sm.l6;
            s.l6_rate = sm.l6_rate;
            s.l6_accel = sm.l6_accel;
        } catch (const NoConvergence& e) {
            throw NoConvergence(where + e.what());
        } catch (const SingularJacobian& e) {
            throw SingularJacobian(where + e.what());
        } catch (const DomainError& e) {
            throw DomainError(where + e.what());
        }

        guess = (p.phase == Phase::Lifting) ? Eigen::Vector2d(s.theta0, s.theta2)
                                            : Eigen::Vector2d(s.theta2, s.theta4);
        out.push_back({p.time, p.phase, s});
    }
    return out;
}

}  // namespace metagrip
