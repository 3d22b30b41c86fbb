#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "metagrip/errors.hpp"
#include "metagrip/numerics.hpp"

namespace metagrip {

// ---------------------------------------------------------------------------
// Slider-to-gripper coupling chain
// ---------------------------------------------------------------------------

// Four-bar chain that turns the horizontal slider displacement l9 into the
// vertical gripper input. Lengths in mm, angles in rad. l9 and the joint
// angles are state; the rest is geometry.
struct CouplingGeometry {
    double l10 = 40.0;
    double l11 = 50.0;
    double l12 = 60.0;
    double l13 = 70.0;                       // lever arm feeding the palm
    double alpha = 15.0 * std::numbers::pi / 180.0;  // fixed offset of the lever

    double l9 = 0.0;
    double theta5 = 0.0, theta6 = 0.0;
    double omega5 = 0.0, omega6 = 0.0;
    double beta5 = 0.0, beta6 = 0.0;

    void validate() const {
        for (double l : {l10, l11, l12, l13})
            if (!(l > 0.0)) throw ValidationError("coupling link lengths must be positive");
    }
};

/// Closure residual of the coupling loop, mm.
inline Eigen::Vector2d coupling_loop_residual(const CouplingGeometry& g, double l9,
                                              double theta5, double theta6) {
    return {g.l11 * std::sin(theta5) - l9 + g.l12 * std::cos(theta6),
            g.l10 - g.l11 * std::cos(theta5) - g.l12 * std::sin(theta6)};
}

/// Position, velocity and acceleration solve of the coupling loop, driven by
/// the slider displacement l9 and its time derivatives.
inline CouplingGeometry solve_coupling(CouplingGeometry g, double l9, double l9_rate,
                                       double l9_accel, Eigen::Vector2d guess,
                                       const NewtonSettings& settings = {}) {
    auto residual = [&](const Vector& u) -> Vector {
        return coupling_loop_residual(g, l9, u(0), u(1));
    };
    const SolveReport rep = solve_newton(residual, Vector(guess), settings);
    if (!rep.converged)
        throw NoConvergence("coupling loop not assemblable at l9=" + std::to_string(l9));
    g.l9 = l9;
    g.theta5 = rep.solution(0);
    g.theta6 = rep.solution(1);

    const double c5 = std::cos(g.theta5), s5 = std::sin(g.theta5);
    const double c6 = std::cos(g.theta6), s6 = std::sin(g.theta6);
    Eigen::Matrix2d m;
    m << g.l11 * c5, -g.l12 * s6,
         g.l11 * s5, -g.l12 * c6;
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    if (std::abs(det) < 1e-12) throw SingularJacobian("coupling: singular velocity system");
    const Eigen::Matrix2d minv = m.inverse();

    const Eigen::Vector2d w = minv * Eigen::Vector2d(l9_rate, 0.0);
    g.omega5 = w(0);
    g.omega6 = w(1);

    Eigen::Matrix2d mdot;
    mdot << -g.l11 * g.omega5 * s5, -g.l12 * g.omega6 * c6,
             g.l11 * g.omega5 * c5,  g.l12 * g.omega6 * s6;
    const Eigen::Vector2d b = minv * (Eigen::Vector2d(l9_accel, 0.0) - mdot * w);
    g.beta5 = b(0);
    g.beta6 = b(1);
    return g;
}

struct HeightMotion {
    double h = 0.0;        // mm
    double h_rate = 0.0;   // mm/s
    double h_accel = 0.0;  // mm/s^2
};

/// Vertical gripper input height driven by theta6.
inline HeightMotion gripper_input_height(const CouplingGeometry& g) {
    const double psi = std::numbers::pi - g.theta6 - g.alpha;
    HeightMotion hm;
    hm.h = g.l13 * std::sin(psi);
    hm.h_rate = -g.l13 * g.omega6 * std::cos(psi);
    hm.h_accel = -g.l13 * g.omega6 * g.omega6 * std::sin(g.theta6 + g.alpha) +
                 g.l13 * g.beta6 * std::cos(g.theta6 + g.alpha);
    return hm;
}

// ---------------------------------------------------------------------------
// Palm cross-section loop
// ---------------------------------------------------------------------------

// Five-angle loop through the palm cross-section. Two scalar equations close
// it, so exactly three of the angles {theta6..theta10} must be pinned before
// the remaining two can be solved.
struct CrossSectionState {
    double l13 = 70.0, l14 = 45.0, l15 = 45.0, l16 = 28.02, l17 = 47.2;
    double alpha = 15.0 * std::numbers::pi / 180.0;
    // Index 0..4 maps to theta6..theta10.
    std::array<double, 5> theta{};
    std::array<double, 5> omega{};
    std::array<double, 5> beta{};
    std::array<int, 3> pinned{0, 3, 4};

    void validate() const {
        for (double l : {l13, l14, l15, l16, l17})
            if (!(l > 0.0)) throw ValidationError("cross-section lengths must be positive");
        std::array<bool, 5> seen{};
        for (int idx : pinned) {
            if (idx < 0 || idx > 4 || seen[idx])
                throw ValidationError("cross-section pin set must name three distinct angles");
            seen[idx] = true;
        }
    }
};

struct CrossSectionResiduals {
    Eigen::Vector2d position;  // mm
    Eigen::Vector2d velocity;  // mm/s
    Eigen::Vector2d accel;     // mm/s^2
};

namespace detail {

// Gradient rows of the cross-section closure with respect to theta6..theta10.
inline Eigen::Matrix<double, 2, 5> cross_section_jacobian(const CrossSectionState& s) {
    const double psi = std::numbers::pi - s.theta[0] - s.alpha;
    Eigen::Matrix<double, 2, 5> j;
    j << s.l13 * std::sin(psi), -s.l14 * std::cos(s.theta[1]), -s.l15 * std::cos(s.theta[2]),
        -0.5 * s.l16 * std::sin(s.theta[3]), s.l17 * std::sin(s.theta[4]),
        -s.l13 * std::cos(psi), s.l14 * std::sin(s.theta[1]), s.l15 * std::sin(s.theta[2]),
        -0.5 * s.l16 * std::cos(s.theta[3]), s.l17 * std::cos(s.theta[4]);
    return j;
}

// Coefficients of the squared rates in the acceleration relation.
inline Eigen::Matrix<double, 2, 5> cross_section_curvature(const CrossSectionState& s) {
    const double psi = std::numbers::pi - s.theta[0] - s.alpha;
    Eigen::Matrix<double, 2, 5> k;
    k << s.l13 * std::cos(psi), -s.l14 * std::sin(s.theta[1]), -s.l15 * std::sin(s.theta[2]),
        0.5 * s.l16 * std::cos(s.theta[3]), -s.l17 * std::cos(s.theta[4]),
        s.l13 * std::sin(psi), -s.l14 * std::cos(s.theta[1]), -s.l15 * std::cos(s.theta[2]),
        -0.5 * s.l16 * std::sin(s.theta[3]), s.l17 * std::sin(s.theta[4]);
    return k;
}

}  // namespace detail

/// Raw closure residuals of a cross-section state: position, velocity and
/// acceleration levels. All three vanish iff the state is kinematically
/// consistent. Pure evaluator, never solves.
inline CrossSectionResiduals cross_section_constraints(const CrossSectionState& s) {
    const double psi = std::numbers::pi - s.theta[0] - s.alpha;
    CrossSectionResiduals r;
    r.position = {s.l13 * std::cos(psi) - s.l14 * std::sin(s.theta[1]) -
                      s.l15 * std::sin(s.theta[2]) + 0.5 * s.l16 * std::cos(s.theta[3]) -
                      s.l17 * std::cos(s.theta[4]),
                  s.l13 * std::sin(psi) - s.l14 * std::cos(s.theta[1]) -
                      s.l15 * std::cos(s.theta[2]) - 0.5 * s.l16 * std::sin(s.theta[3]) +
                      s.l17 * std::sin(s.theta[4])};
    const auto j = detail::cross_section_jacobian(s);
    const auto k = detail::cross_section_curvature(s);
    Eigen::Matrix<double, 5, 1> w, w2, b;
    for (int i = 0; i < 5; ++i) {
        w(i) = s.omega[i];
        w2(i) = s.omega[i] * s.omega[i];
        b(i) = s.beta[i];
    }
    r.velocity = j * w;
    r.accel = j * b - k * w2;
    return r;
}

/// Solves the two free angles of the cross-section loop under the state's
/// three pins, then the free rates and accelerations given the pinned ones.
/// The state's current angles seed the Newton iteration.
inline CrossSectionState solve_cross_section(CrossSectionState s,
                                             const std::array<double, 3>& pinned_values,
                                             const NewtonSettings& settings = {}) {
    s.validate();
    std::array<bool, 5> is_pinned{};
    for (int k = 0; k < 3; ++k) {
        s.theta[s.pinned[k]] = pinned_values[k];
        is_pinned[s.pinned[k]] = true;
    }
    std::array<int, 2> free{};
    int nf = 0;
    for (int i = 0; i < 5; ++i)
        if (!is_pinned[i]) free[nf++] = i;

    auto residual = [&](const Vector& u) -> Vector {
        CrossSectionState probe = s;
        probe.theta[free[0]] = u(0);
        probe.theta[free[1]] = u(1);
        return Vector(cross_section_constraints(probe).position);
    };
    const SolveReport rep =
        solve_newton(residual, Vector(Eigen::Vector2d(s.theta[free[0]], s.theta[free[1]])),
                     settings);
    if (!rep.converged)
        throw OverconstrainedPin("cross-section loop unsolvable under the given pins");
    s.theta[free[0]] = rep.solution(0);
    s.theta[free[1]] = rep.solution(1);

    const auto j = detail::cross_section_jacobian(s);
    Eigen::Matrix2d jf;
    jf << j(0, free[0]), j(0, free[1]), j(1, free[0]), j(1, free[1]);
    const double det = jf(0, 0) * jf(1, 1) - jf(0, 1) * jf(1, 0);
    if (std::abs(det) < 1e-12)
        throw SingularJacobian("cross-section: singular velocity system");
    const Eigen::Matrix2d jf_inv = jf.inverse();

    Eigen::Vector2d rhs_w = Eigen::Vector2d::Zero();
    for (int idx : s.pinned) rhs_w -= j.col(idx) * s.omega[idx];
    const Eigen::Vector2d wf = jf_inv * rhs_w;
    s.omega[free[0]] = wf(0);
    s.omega[free[1]] = wf(1);

    const auto k = detail::cross_section_curvature(s);
    Eigen::Vector2d rhs_b = Eigen::Vector2d::Zero();
    for (int i = 0; i < 5; ++i) rhs_b += k.col(i) * (s.omega[i] * s.omega[i]);
    for (int idx : s.pinned) rhs_b -= j.col(idx) * s.beta[idx];
    const Eigen::Vector2d bf = jf_inv * rhs_b;
    s.beta[free[0]] = bf(0);
    s.beta[free[1]] = bf(1);
    return s;
}

// ---------------------------------------------------------------------------
// Finger linkage: two stacked four-bar loops plus a rigid distal triangle
// ---------------------------------------------------------------------------

struct FingerGeometry {
    double l16 = 28.02;  // palm segment
    double l18 = 38.3;   // proximal phalanx
    double l19 = 30.0;   // middle phalanx
    double l20 = 25.0;   // distal phalanx (side of the rigid triangle)
    double l21 = 15.0;   // transmission link shared by both loops
    double l22 = 13.58;  // triangle side closing the second loop
    double l23 = 50.0;   // coupler of the first loop
    double l24 = 20.5;   // coupler of the second loop
    double l25 = 20.0;   // third triangle side

    void validate() const {
        for (double l : {l16, l18, l19, l20, l21, l22, l23, l24, l25})
            if (!(l > 0.0)) throw ValidationError("finger link lengths must be positive");
        if (!(std::abs(l20 - l22) < l25 && l25 < l20 + l22))
            throw ValidationError("finger: distal triangle (l20, l22, l25) violates the triangle inequality");
    }

    // Interior cosine of the rigid distal triangle between sides l20 and l22.
    double triangle_cosine() const {
        return (l20 * l20 + l22 * l22 - l25 * l25) / (2.0 * l20 * l22);
    }
};

struct FingerState {
    double theta9 = 0.0;   // palm segment direction
    double theta11 = 0.0;  // proximal phalanx
    double theta12 = 0.0;  // middle phalanx
    double theta13 = 0.0;  // distal phalanx, from the triangle relation
    double theta14 = 0.0;  // first coupler
    double theta15 = 0.0;  // transmission link (drive)
    double theta16 = 0.0;  // second coupler
    double theta17 = 0.0;  // triangle side l22
    double omega9 = 0.0, omega11 = 0.0, omega12 = 0.0, omega13 = 0.0;
    double omega14 = 0.0, omega15 = 0.0, omega16 = 0.0, omega17 = 0.0;
    double transmission_angle = 0.0;  // rad, in [0, pi/2]
};

/// Closure residual of the proximal four-bar, mm.
inline Eigen::Vector2d finger_loop1_residual(const FingerGeometry& g, double theta9,
                                             double theta11, double theta14, double theta15) {
    return {g.l16 * std::cos(theta9) + g.l23 * std::cos(theta14) -
                g.l21 * std::cos(theta15) - g.l18 * std::cos(theta11),
            g.l16 * std::sin(theta9) + g.l23 * std::sin(theta14) -
                g.l21 * std::sin(theta15) - g.l18 * std::sin(theta11)};
}

/// Closure residual of the distal four-bar, mm.
inline Eigen::Vector2d finger_loop2_residual(const FingerGeometry& g, double theta15,
                                             double theta16, double theta12, double theta17) {
    return {g.l21 * std::cos(theta15) + g.l24 * std::cos(theta16) -
                g.l22 * std::cos(theta17) - g.l19 * std::cos(theta12),
            g.l21 * std::sin(theta15) + g.l24 * std::sin(theta16) -
                g.l22 * std::sin(theta17) - g.l19 * std::sin(theta12)};
}

/// Acute angle between the transmission link and the proximal phalanx,
/// folded into [0, pi/2]. Zero means the drive path is locked, pi/2 means it
/// transmits force with maximum efficiency.
inline double transmission_angle(const FingerGeometry&, const FingerState& s) {
    double x = std::fmod(std::abs(s.theta15 - s.theta11), std::numbers::pi);
    if (x > std::numbers::pi / 2.0) x = std::numbers::pi - x;
    return x;
}

struct FingerDriveRates {
    double omega9 = 0.0;
    double omega15 = 0.0;
    double omega17 = 0.0;
};

/// Position and velocity solve of the finger linkage.
///
/// The chain has two internal freedoms, so two pose inputs are needed beside
/// the palm direction: theta15 drives the proximal loop and theta17 pins the
/// orientation of the distal triangle (the freedom the torsional springs
/// shape on hardware). Loop one yields (theta11, theta14), loop two yields
/// (theta12, theta16), and the rigid triangle yields theta13 from theta17.
inline FingerState solve_finger(const FingerGeometry& g, double theta9, double theta15,
                                double theta17, Eigen::Vector4d guess,
                                const FingerDriveRates& rates = {},
                                const NewtonSettings& settings = {}) {
    g.validate();
    FingerState s;
    s.theta9 = theta9;
    s.theta15 = theta15;
    s.theta17 = theta17;

    auto loop1 = [&](const Vector& u) -> Vector {
        return Vector(finger_loop1_residual(g, theta9, u(0), u(1), theta15));
    };
    const SolveReport rep1 =
        solve_newton(loop1, Vector(Eigen::Vector2d(guess(0), guess(1))), settings);
    if (!rep1.converged)
        throw AssemblyError("finger: proximal loop has no real solution at this pose");
    s.theta11 = rep1.solution(0);
    s.theta14 = rep1.solution(1);

    auto loop2 = [&](const Vector& u) -> Vector {
        return Vector(finger_loop2_residual(g, theta15, u(1), u(0), theta17));
    };
    const SolveReport rep2 =
        solve_newton(loop2, Vector(Eigen::Vector2d(guess(2), guess(3))), settings);
    if (!rep2.converged)
        throw AssemblyError("finger: distal loop has no real solution at this pose");
    s.theta12 = rep2.solution(0);
    s.theta16 = rep2.solution(1);

    const double tri = g.triangle_cosine();
    s.theta13 = std::acos(tri) - theta17;

    // Velocity level: each loop is linear in the rates once the pose is known.
    s.omega9 = rates.omega9;
    s.omega15 = rates.omega15;
    s.omega17 = rates.omega17;
    {
        const double s9 = std::sin(theta9), c9 = std::cos(theta9);
        const double s11 = std::sin(s.theta11), c11 = std::cos(s.theta11);
        const double s14 = std::sin(s.theta14), c14 = std::cos(s.theta14);
        const double s15 = std::sin(theta15), c15 = std::cos(theta15);
        Eigen::Matrix2d m;
        m << g.l18 * s11, -g.l23 * s14,
            -g.l18 * c11,  g.l23 * c14;
        const Eigen::Vector2d rhs{g.l16 * s9 * rates.omega9 - g.l21 * s15 * rates.omega15,
                                  -g.l16 * c9 * rates.omega9 + g.l21 * c15 * rates.omega15};
        const Eigen::Vector2d w = detail::solve2(m, rhs, "finger loop1 rates");
        s.omega11 = w(0);
        s.omega14 = w(1);
    }
    {
        const double s12 = std::sin(s.theta12), c12 = std::cos(s.theta12);
        const double s16 = std::sin(s.theta16), c16 = std::cos(s.theta16);
        const double s15 = std::sin(theta15), c15 = std::cos(theta15);
        const double s17 = std::sin(theta17), c17 = std::cos(theta17);
        Eigen::Matrix2d m;
        m << g.l19 * s12, -g.l24 * s16,
            -g.l19 * c12,  g.l24 * c16;
        const Eigen::Vector2d rhs{g.l21 * s15 * rates.omega15 - g.l22 * s17 * rates.omega17,
                                  -g.l21 * c15 * rates.omega15 + g.l22 * c17 * rates.omega17};
        const Eigen::Vector2d w = detail::solve2(m, rhs, "finger loop2 rates");
        s.omega12 = w(0);
        s.omega16 = w(1);
    }
    s.omega13 = -rates.omega17;  // theta13 + theta17 is a rigid-body constant

    s.transmission_angle = transmission_angle(g, s);
    return s;
}

// Knuckle pose of a finger in its grasp plane: alpha1 orients the proximal
// phalanx relative to the palm normal, alpha2 and alpha3 are the bends of the
// following knuckles measured from the straight (aligned) configuration.
struct KnucklePose {
    double theta9 = 0.0;
    double alpha1 = std::numbers::pi / 2.0;
    double alpha2 = std::numbers::pi / 4.0;
    double alpha3 = std::numbers::pi / 4.0;
};

namespace detail {

// Intersection of circles (c0, r0) and (c1, r1); branch picks the side of the
// center line. Throws AssemblyError when the circles do not meet.
inline Eigen::Vector2d intersect_circles(const Eigen::Vector2d& c0, double r0,
                                         const Eigen::Vector2d& c1, double r1, int branch,
                                         const char* what) {
    const Eigen::Vector2d delta = c1 - c0;
    const double d = delta.norm();
    if (!(d >= std::abs(r0 - r1) && d <= r0 + r1) || d == 0.0)
        throw AssemblyError(std::string(what) + ": pivot distance " + std::to_string(d) +
                            " outside [" + std::to_string(std::abs(r0 - r1)) + ", " +
                            std::to_string(r0 + r1) + "]");
    const double a = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d);
    const double h2 = r0 * r0 - a * a;
    const double h = h2 > 0.0 ? std::sqrt(h2) : 0.0;
    const Eigen::Vector2d ex = delta / d;
    const Eigen::Vector2d ey{-ex(1), ex(0)};
    return c0 + a * ex + (branch >= 0 ? h : -h) * ey;
}

}  // namespace detail

/// Closed-form assembly of the finger at a prescribed knuckle pose.
///
/// The phalanx directions follow from the pose (proximal at
/// theta9 + pi + alpha1, each later phalanx bent further by its alpha), and
/// the transmission-side angles come from circle intersections, so no
/// iteration is involved. Used as the feasibility gate of the dimensional
/// optimizer; throws AssemblyError when either loop cannot close.
inline FingerState solve_finger_at_pose(const FingerGeometry& g, const KnucklePose& pose,
                                        int branch1 = +1, int branch2 = +1) {
    g.validate();
    FingerState s;
    s.theta9 = pose.theta9;
    s.theta11 = pose.theta9 + std::numbers::pi + pose.alpha1;
    s.theta12 = s.theta11 + pose.alpha2;

    const Eigen::Vector2d palm_pivot{g.l16 * std::cos(pose.theta9),
                                     g.l16 * std::sin(pose.theta9)};
    const Eigen::Vector2d knuckle2{g.l18 * std::cos(s.theta11), g.l18 * std::sin(s.theta11)};
    const Eigen::Vector2d p1 =
        detail::intersect_circles(palm_pivot, g.l23, knuckle2, g.l21, branch1, "finger loop1");
    s.theta14 = std::atan2(p1(1) - palm_pivot(1), p1(0) - palm_pivot(0));
    s.theta15 = std::atan2(p1(1) - knuckle2(1), p1(0) - knuckle2(0));

    // Second loop in the frame of knuckle 2.
    const Eigen::Vector2d pivot1{g.l21 * std::cos(s.theta15), g.l21 * std::sin(s.theta15)};
    const Eigen::Vector2d knuckle3{g.l19 * std::cos(s.theta12), g.l19 * std::sin(s.theta12)};
    const Eigen::Vector2d p2 =
        detail::intersect_circles(pivot1, g.l24, knuckle3, g.l22, branch2, "finger loop2");
    s.theta16 = std::atan2(p2(1) - pivot1(1), p2(0) - pivot1(0));
    s.theta17 = std::atan2(p2(1) - knuckle3(1), p2(0) - knuckle3(0));

    s.theta13 = std::acos(g.triangle_cosine()) - s.theta17;
    s.transmission_angle = transmission_angle(g, s);
    return s;
}

}  // namespace metagrip
