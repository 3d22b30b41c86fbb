#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "metagrip/errors.hpp"

namespace metagrip {

// Relative knuckle angles of one finger in its grasp plane, rad. alpha1
// orients the proximal phalanx, alpha2 and alpha3 are the bends of the two
// following knuckles measured from the straight configuration.
struct KnuckleAngles {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double alpha3 = 0.0;
};

// Distance of each contact point from its knuckle joint, mm.
struct ContactDistances {
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
};

// Phalanx lengths, mm.
struct SegmentLengths {
    double l18 = 38.3;
    double l19 = 30.0;
    double l20 = 25.0;
};

// Torsional springs at the two distal knuckles: stiffness in Nmm/rad,
// preload torque in Nmm.
struct SpringParams {
    double k1 = 346.5;
    double k2 = 794.1;
    double tau_s1 = 184.43;
    double tau_s2 = 196.29;

    void validate() const {
        if (k1 < 0.0 || k2 < 0.0) throw ValidationError("spring stiffness must be nonnegative");
        if (tau_s1 < 0.0 || tau_s2 < 0.0) throw ValidationError("spring preload must be nonnegative");
    }
};

// Joint torques, Nmm. tau1 is the drive input at the proximal knuckle; tau2
// and tau3 are the spring torques, negative when the springs oppose flexion.
struct JointTorques {
    double tau1 = 0.0;
    double tau2 = 0.0;
    double tau3 = 0.0;
};

// Normal reaction magnitudes at the three contacts, N. Signs follow the
// knuckle-normal convention of contact_normals; no magnitude folding.
struct ContactForces {
    double f1 = 0.0;
    double f2 = 0.0;
    double f3 = 0.0;
};

/// Spring torques at the two distal knuckles for the given bends (rad).
/// Affine in the bend with slope -k: the springs resist flexion and carry a
/// preload.
inline std::pair<double, double> spring_torques(const SpringParams& sp, double alpha2,
                                                double alpha3) {
    return {-(sp.k1 * alpha2 + sp.tau_s1), -(sp.k2 * alpha3 + sp.tau_s2)};
}

/// Planar positions of the three contact points in the palm frame, mm.
inline std::array<Eigen::Vector2d, 3> contact_points(const SegmentLengths& seg,
                                                     const KnuckleAngles& a,
                                                     const ContactDistances& d) {
    const double a1 = a.alpha1, a12 = a.alpha1 + a.alpha2, a123 = a12 + a.alpha3;
    const Eigen::Vector2d p1{-d.d1 * std::cos(a1), -d.d1 * std::sin(a1)};
    const Eigen::Vector2d p2{-seg.l18 * std::cos(a1) - d.d2 * std::cos(a12),
                             -seg.l18 * std::sin(a1) - d.d2 * std::sin(a12)};
    const Eigen::Vector2d p3{
        -seg.l18 * std::cos(a1) - seg.l19 * std::cos(a12) - d.d3 * std::cos(a123),
        -seg.l18 * std::sin(a1) - seg.l19 * std::sin(a12) - d.d3 * std::sin(a123)};
    return {p1, p2, p3};
}

/// Unit normals of the three phalanx surfaces at the contacts.
inline std::array<Eigen::Vector2d, 3> contact_normals(const KnuckleAngles& a) {
    const double a1 = a.alpha1, a12 = a.alpha1 + a.alpha2, a123 = a12 + a.alpha3;
    return {Eigen::Vector2d{std::sin(a1), -std::cos(a1)},
            Eigen::Vector2d{std::sin(a12), -std::cos(a12)},
            Eigen::Vector2d{std::sin(a123), -std::cos(a123)}};
}

/// Closed-form contact forces from quasi-static torque balance.
///
/// Back-substitution through the three knuckle balances, distal first:
/// the distal contact carries its spring torque alone, each inner balance
/// adds the moment the outer contacts exert across its joint.
inline ContactForces contact_forces(const JointTorques& tau, const SegmentLengths& seg,
                                    const KnuckleAngles& a, const ContactDistances& d) {
    if (!(d.d1 > 0.0 && d.d2 > 0.0 && d.d3 > 0.0))
        throw DomainError("contact_forces: contact distances must be positive");
    const double c2 = std::cos(a.alpha2);
    const double c3 = std::cos(a.alpha3);
    const double c23 = std::cos(a.alpha2 + a.alpha3);

    ContactForces f;
    f.f3 = -tau.tau3 / d.d3;
    f.f2 = -(tau.tau2 - tau.tau3 - tau.tau3 * seg.l19 * c3 / d.d3) / d.d2;
    f.f1 = -(tau.tau1 - tau.tau2 + f.f2 * seg.l18 * c2 + f.f3 * seg.l18 * c23) / d.d1;
    return f;
}

/// Transmission matrix of the contact map, assembled numerically: entry
/// (i, j) is the projection of dP_i/dalpha_j onto the i-th contact normal,
/// with the partials taken by central differences. Lower-triangular in both
/// the knuckle-rate and the cumulative-rate basis.
inline Eigen::Matrix3d grasp_map(const SegmentLengths& seg, const KnuckleAngles& a,
                                 const ContactDistances& d, double h = 1e-5) {
    const auto normals = contact_normals(a);
    const auto perturbed = [&a](int j, double dh) {
        KnuckleAngles p = a;
        if (j == 0) p.alpha1 += dh;
        else if (j == 1) p.alpha2 += dh;
        else p.alpha3 += dh;
        return p;
    };
    Eigen::Matrix3d g;
    for (int j = 0; j < 3; ++j) {
        const auto pp = contact_points(seg, perturbed(j, h), d);
        const auto pm = contact_points(seg, perturbed(j, -h), d);
        for (int i = 0; i < 3; ++i)
            g(i, j) = normals[i].dot((pp[i] - pm[i]) / (2.0 * h));
    }
    return g;
}

/// Contact forces from the virtual-work balance, independent of the closed
/// form: total virtual work of the contact reactions and the joint torques
/// vanishes for every virtual knuckle motion, so G^T f = -tau with G the
/// numerically assembled transmission matrix.
inline ContactForces virtual_work_oracle(const JointTorques& tau, const SegmentLengths& seg,
                                         const KnuckleAngles& a, const ContactDistances& d,
                                         double h = 1e-5) {
    if (!(d.d1 > 0.0 && d.d2 > 0.0 && d.d3 > 0.0))
        throw DomainError("virtual_work_oracle: contact distances must be positive");
    const Eigen::Matrix3d g = grasp_map(seg, a, d, h);
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(g.transpose());
    if (!lu.isInvertible())
        throw SingularJacobian("virtual_work_oracle: degenerate contact configuration");
    const Eigen::Vector3d f = lu.solve(Eigen::Vector3d{-tau.tau1, -tau.tau2, -tau.tau3});
    return {f(0), f(1), f(2)};
}

/// Spread between the largest and smallest of the three contact forces, N.
inline double force_spread(const ContactForces& f) {
    const double lo = std::min({f.f1, f.f2, f.f3});
    const double hi = std::max({f.f1, f.f2, f.f3});
    return std::abs(hi - lo);
}

struct ForceSurfaceCell {
    double d2 = 0.0;
    double d3 = 0.0;
    ContactForces forces;
};

/// Dense sweep of the closed-form forces over a (d2, d3) grid at fixed d1.
/// Cells are ordered row-major by (d2 index, d3 index).
inline std::vector<ForceSurfaceCell> force_surface(const JointTorques& tau,
                                                   const SegmentLengths& seg,
                                                   const KnuckleAngles& a, double d1,
                                                   double d2_min, double d2_max, int n2,
                                                   double d3_min, double d3_max, int n3) {
    if (n2 < 1 || n3 < 1) throw ValidationError("force_surface: grid counts must be >= 1");
    std::vector<ForceSurfaceCell> cells;
    cells.reserve(static_cast<std::size_t>(n2) * n3);
    for (int i = 0; i < n2; ++i) {
        const double d2 = n2 == 1 ? d2_min : d2_min + (d2_max - d2_min) * i / (n2 - 1);
        for (int j = 0; j < n3; ++j) {
            const double d3 = n3 == 1 ? d3_min : d3_min + (d3_max - d3_min) * j / (n3 - 1);
            cells.push_back({d2, d3, contact_forces(tau, seg, a, {d1, d2, d3})});
        }
    }
    return cells;
}

}  // namespace metagrip
