#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "metagrip/errors.hpp"

namespace metagrip {

// Mounting and reach data for the arm on its carrier vehicle, mm. The reach
// links are snapshots of the arm state at the grasp pose.
struct CoordinationSetup {
    double x_ofs = 200.0;   // mounting offset along the travel axis
    double l_ofs = 80.0;    // end-effector offset beyond the last link
    double h_base = 500.0;  // height of the arm base above the vehicle datum
    double y_veh = 300.0;   // height of the target vehicle
    double l8 = 150.0;
    double l6 = 241.46;
    double l9 = 120.0;
    double l0 = 397.0;
    double theta0_pregrasp = 100.0 * std::numbers::pi / 180.0;

    double reach() const { return l8 + l6 + l9 + l_ofs; }

    void validate() const {
        if (!(reach() > 0.0)) throw ValidationError("coordination: reach sum must be positive");
    }
};

struct EePosition {
    double x = 0.0;  // mm
    double y = 0.0;  // mm
};

struct GraspPlan {
    double theta0 = 0.0;   // rad
    double delta_h = 0.0;  // mm, lift-mechanism height change from the pre-grasp pose
    double x_veh = 0.0;    // mm, vehicle travel
};

/// End-effector position for a main-joint angle and vehicle travel.
inline EePosition ee_position(const CoordinationSetup& su, double theta0, double x_veh) {
    const double r = su.reach();
    const double half_pi = std::numbers::pi / 2.0;
    return {-x_veh - su.x_ofs + r * std::cos(theta0 - half_pi),
            -su.y_veh + su.h_base + su.l0 + r * std::sin(theta0 - half_pi)};
}

/// Inverse of ee_position: main-joint angle from the target height on the
/// principal arcsine branch, then the vehicle travel from the target abscissa.
/// Throws OutOfReach when the height asks for an arcsine argument beyond 1 in
/// magnitude; the boundary itself is accepted.
inline GraspPlan plan_grasp(const CoordinationSetup& su, const EePosition& target) {
    const double r = su.reach();
    const double half_pi = std::numbers::pi / 2.0;
    const double arg = (target.y + su.y_veh - su.h_base - su.l0) / r;
    if (std::abs(arg) > 1.0)
        throw OutOfReach("plan_grasp: height target needs arcsine argument " +
                         std::to_string(arg));
    GraspPlan plan;
    plan.theta0 = std::asin(arg) + half_pi;
    plan.x_veh = -target.x - su.x_ofs + r * std::cos(plan.theta0 - half_pi);
    plan.delta_h = target.y - ee_position(su, su.theta0_pregrasp, 0.0).y;
    return plan;
}

}  // namespace metagrip
