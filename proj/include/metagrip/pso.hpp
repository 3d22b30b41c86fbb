#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <thread>
#include <vector>

#include "metagrip/errors.hpp"
#include "metagrip/gripper.hpp"
#include "metagrip/kinetostatics.hpp"

namespace metagrip {

// ---------------------------------------------------------------------------
// Global-best particle swarm over box bounds
// ---------------------------------------------------------------------------

struct Bounds {
    Vector lower;
    Vector upper;

    void validate() const {
        if (lower.size() != upper.size() || lower.size() == 0)
            throw ValidationError("bounds: lower and upper must have equal nonzero size");
        for (Eigen::Index i = 0; i < lower.size(); ++i)
            if (!(lower(i) < upper(i)))
                throw ValidationError("bounds: lower must be strictly below upper componentwise");
    }
};

struct PsoConfig {
    int swarm_size = 1000;
    int max_iterations = 300;
    double inertia = 0.7298;
    double cognitive = 1.49618;
    double social = 1.49618;
    std::uint64_t seed = 1;
    double velocity_clamp = 0.5;  // fraction of the bound range
    int threads = 1;

    void validate() const {
        if (swarm_size < 2) throw ValidationError("pso: swarm_size must be >= 2");
        if (max_iterations < 1) throw ValidationError("pso: max_iterations must be >= 1");
        if (!(inertia > 0.0 && cognitive > 0.0 && social > 0.0))
            throw ValidationError("pso: factors must be positive");
        if (!(velocity_clamp > 0.0)) throw ValidationError("pso: velocity_clamp must be positive");
        if (threads < 1) throw ValidationError("pso: threads must be >= 1");
    }
};

struct RunResult {
    Vector best_x;
    double best_phi = 0.0;
    std::vector<double> history;  // best value after init and after each iteration
    long evaluations = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Counter-based stream: the draws for one particle at one iteration depend
// only on (seed, particle, iteration), so evaluation order and thread count
// cannot perturb the sequence.
struct ParticleStream {
    std::uint64_t state;

    ParticleStream(std::uint64_t seed, std::uint64_t particle, std::uint64_t iteration) {
        state = seed;
        state = splitmix64(state) ^ (0x9E3779B97F4A7C15ULL * (particle + 1));
        state = splitmix64(state) ^ (0xC2B2AE3D27D4EB4FULL * (iteration + 1));
        (void)splitmix64(state);
    }

    double uniform() {  // in [0, 1)
        return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    }
};

template <class Fn>
void parallel_for(int n, int threads, Fn&& body) {
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int begin = t * chunk;
        const int end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] {
            for (int i = begin; i < end; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Global-best particle swarm minimization over box bounds.
///
/// Synchronous updates: every particle sees the previous iteration's global
/// best, the reduction breaks ties by lowest particle index, and random draws
/// are keyed by (seed, particle, iteration). Results are therefore
/// bit-reproducible for a fixed seed regardless of the thread count.
inline RunResult pso_minimize(const std::function<double(const Vector&)>& objective,
                              const Bounds& bounds, const PsoConfig& config) {
    bounds.validate();
    config.validate();
    const int dim = static_cast<int>(bounds.lower.size());
    const int n = config.swarm_size;
    const Vector range = bounds.upper - bounds.lower;
    const Vector vmax = config.velocity_clamp * range;

    std::vector<Vector> x(n), v(n), pbest_x(n);
    std::vector<double> fx(n), pbest_f(n);

    detail::parallel_for(n, config.threads, [&](int i) {
        detail::ParticleStream rng(config.seed, static_cast<std::uint64_t>(i), 0);
        Vector xi(dim), vi(dim);
        for (int j = 0; j < dim; ++j) xi(j) = bounds.lower(j) + rng.uniform() * range(j);
        for (int j = 0; j < dim; ++j) vi(j) = (2.0 * rng.uniform() - 1.0) * vmax(j);
        x[i] = xi;
        v[i] = vi;
        fx[i] = objective(xi);
    });
    for (int i = 0; i < n; ++i) {
        pbest_x[i] = x[i];
        pbest_f[i] = fx[i];
    }

    int gbest = 0;
    for (int i = 1; i < n; ++i)
        if (pbest_f[i] < pbest_f[gbest]) gbest = i;
    Vector gbest_x = pbest_x[gbest];
    double gbest_f = pbest_f[gbest];

    RunResult result;
    result.history.reserve(config.max_iterations + 1);
    result.history.push_back(gbest_f);

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        detail::parallel_for(n, config.threads, [&](int i) {
            detail::ParticleStream rng(config.seed, static_cast<std::uint64_t>(i),
                                       static_cast<std::uint64_t>(iter));
            Vector& xi = x[i];
            Vector& vi = v[i];
            for (int j = 0; j < dim; ++j) {
                const double r1 = rng.uniform();
                const double r2 = rng.uniform();
                double vj = config.inertia * vi(j) +
                            config.cognitive * r1 * (pbest_x[i](j) - xi(j)) +
                            config.social * r2 * (gbest_x(j) - xi(j));
                vj = std::clamp(vj, -vmax(j), vmax(j));
                vi(j) = vj;
                xi(j) = std::clamp(xi(j) + vj, bounds.lower(j), bounds.upper(j));
            }
            fx[i] = objective(xi);
        });
        for (int i = 0; i < n; ++i) {
            if (fx[i] < pbest_f[i]) {
                pbest_f[i] = fx[i];
                pbest_x[i] = x[i];
            }
        }
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (pbest_f[i] < pbest_f[best]) best = i;
        if (pbest_f[best] < gbest_f) {
            gbest_f = pbest_f[best];
            gbest_x = pbest_x[best];
        }
        result.history.push_back(gbest_f);
    }

    result.best_x = gbest_x;
    result.best_phi = gbest_f;
    result.evaluations = static_cast<long>(n) * (config.max_iterations + 1);
    return result;
}

/// Independent seeded repetitions: run r uses seed + r.
inline std::vector<RunResult> multi_run(const std::function<double(const Vector&)>& objective,
                                        const Bounds& bounds, const PsoConfig& config,
                                        int n_runs) {
    if (n_runs < 1) throw ValidationError("multi_run: n_runs must be >= 1");
    std::vector<RunResult> runs;
    runs.reserve(n_runs);
    for (int r = 0; r < n_runs; ++r) {
        PsoConfig c = config;
        c.seed = config.seed + static_cast<std::uint64_t>(r);
        runs.push_back(pso_minimize(objective, bounds, c));
    }
    return runs;
}

// ---------------------------------------------------------------------------
// Gripper dimensional-synthesis objective
// ---------------------------------------------------------------------------

// The seven free dimensions of the gripper: three link lengths and the four
// spring parameters.
struct DesignVector {
    double l16 = 0.0, l21 = 0.0, l22 = 0.0;      // mm
    double k1 = 0.0, k2 = 0.0;                   // Nmm/rad
    double tau_s1 = 0.0, tau_s2 = 0.0;           // Nmm

    static DesignVector from_vector(const Vector& v) {
        return {v(0), v(1), v(2), v(3), v(4), v(5), v(6)};
    }
    Vector to_vector() const {
        Vector v(7);
        v << l16, l21, l22, k1, k2, tau_s1, tau_s2;
        return v;
    }
};

/// Search box for the design vector.
inline Bounds design_bounds() {
    Vector lo(7), hi(7);
    lo << 20.0, 10.0, 10.0, 10.0, 10.0, 0.0, 0.0;
    hi << 30.0, 15.0, 15.0, 1000.0, 1000.0, 200.0, 200.0;
    return {lo, hi};
}

// Fixed context of the force-uniformity objective: the drive torque
// magnitude, the dimensions not under optimization, the evaluation pose, and
// the contact rule. Contacts sit at the midpoint of each phalanx
// (d_i = length / 2) unless overridden.
struct ObjectiveContext {
    double tau1 = 1000.0;  // drive torque magnitude, Nmm
    double l18 = 38.3, l19 = 30.0, l24 = 20.5;  // fixed finger links, mm
    double l20 = 25.0, l23 = 50.0, l25 = 20.0;  // fixed remainder of the linkage, mm
    KnucklePose pose{};    // evaluation pose; defaults bend each knuckle 45 degrees
    double contact_fraction = 0.5;              // d_i as a fraction of segment length
    double transmission_floor = 10.0 * std::numbers::pi / 180.0;
    double infeasibility_penalty = 1e6;         // N, returned for non-assemblable designs

    void validate() const {
        if (!(tau1 > 0.0)) throw ValidationError("objective: tau1 must be positive");
        if (!(contact_fraction > 0.0 && contact_fraction <= 1.0))
            throw ValidationError("objective: contact_fraction must lie in (0, 1]");
        if (!(infeasibility_penalty > 0.0))
            throw ValidationError("objective: penalty must be positive");
    }

    SegmentLengths segments() const { return {l18, l19, l20}; }
    ContactDistances contacts() const {
        return {contact_fraction * l18, contact_fraction * l19, contact_fraction * l20};
    }
    FingerGeometry finger_geometry(const DesignVector& x) const {
        return {x.l16, l18, l19, l20, x.l21, x.l22, l23, l24, l25};
    }
};

/// Contact forces a design produces at the context pose. The drive torque is
/// applied in the closing sense of the knuckle-angle convention (negative),
/// the spring torques follow from the bends.
inline ContactForces design_contact_forces(const DesignVector& x, const ObjectiveContext& ctx) {
    const auto [tau2, tau3] =
        spring_torques({x.k1, x.k2, x.tau_s1, x.tau_s2}, ctx.pose.alpha2, ctx.pose.alpha3);
    const JointTorques tau{-ctx.tau1, tau2, tau3};
    const KnuckleAngles angles{ctx.pose.alpha1, ctx.pose.alpha2, ctx.pose.alpha3};
    return contact_forces(tau, ctx.segments(), angles, ctx.contacts());
}

/// Force-uniformity objective: the spread between the largest and smallest
/// contact force at the evaluation pose. Designs whose finger linkage cannot
/// assemble at that pose, or whose transmission angle falls below the floor,
/// score the flat infeasibility penalty so the objective stays total.
inline double objective_phi(const DesignVector& x, const ObjectiveContext& ctx) {
    const FingerGeometry geom = ctx.finger_geometry(x);
    try {
        geom.validate();
        const FingerState pose_state = solve_finger_at_pose(geom, ctx.pose);
        if (pose_state.transmission_angle < ctx.transmission_floor)
            return ctx.infeasibility_penalty;
    } catch (const ValidationError&) {
        return ctx.infeasibility_penalty;
    } catch (const AssemblyError&) {
        return ctx.infeasibility_penalty;
    }
    return force_spread(design_contact_forces(x, ctx));
}

/// The same objective as a plain function over the 7-vector, for the swarm.
inline std::function<double(const Vector&)> make_phi_objective(const ObjectiveContext& ctx) {
    ctx.validate();
    return [ctx](const Vector& v) { return objective_phi(DesignVector::from_vector(v), ctx); };
}

}  // namespace metagrip
