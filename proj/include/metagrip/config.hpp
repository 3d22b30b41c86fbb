#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metagrip/arm.hpp"
#include "metagrip/coordination.hpp"
#include "metagrip/csvio.hpp"
#include "metagrip/errors.hpp"
#include "metagrip/gripper.hpp"
#include "metagrip/kinetostatics.hpp"
#include "metagrip/pso.hpp"

namespace metagrip {

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Drive profile of the batch arm simulation: a rise, a grasp descent, and a
// lift, all in drive-angle degrees. Matches the loading sequence.
struct TrajectoryConfig {
    double theta4_deg = 20.0;        // slider latch angle during the approach
    double theta1_start_deg = 52.0;
    double theta1_peak_deg = 74.0;
    double theta1_grasp_end_deg = 60.0;
    double theta1_final_deg = 49.0;
    double omega1 = 0.1;             // rad/s drive speed magnitude
    int samples_per_segment = 60;
    double dt = 0.05;                // s between samples
    double guess_theta0_deg = 31.0;  // assembly-branch selector at the first sample
    double guess_theta2_deg = -74.0;
};

struct SurfaceConfig {
    double d1 = 19.15;
    double d2_min = 5.0, d2_max = 25.0;
    double d3_min = 5.0, d3_max = 25.0;
    int n2 = 41, n3 = 41;
};

struct ToolConfig {
    ArmGeometry arm{};
    CouplingGeometry coupling{};
    double cross_l14 = 45.0, cross_l15 = 45.0, cross_l17 = 47.22404229;
    double cross_theta10 = 0.57198606;  // rad
    FingerGeometry finger{};
    SpringParams springs{};
    ContactDistances contacts{19.15, 15.0, 12.5};
    KnuckleAngles knuckles{deg2rad(90.0), deg2rad(45.0), deg2rad(45.0)};
    double tau1 = 1000.0;  // drive torque magnitude, Nmm
    double contact_fraction = 0.5;
    double transmission_floor = deg2rad(10.0);
    double infeasibility_penalty = 1e6;
    PsoConfig pso{};
    Bounds bounds = design_bounds();
    CoordinationSetup coordination{};
    TrajectoryConfig trajectory{};
    SurfaceConfig surface{};

    SegmentLengths segments() const { return {finger.l18, finger.l19, finger.l20}; }

    ObjectiveContext objective_context() const {
        ObjectiveContext ctx;
        ctx.tau1 = tau1;
        ctx.l18 = finger.l18;
        ctx.l19 = finger.l19;
        ctx.l24 = finger.l24;
        ctx.l20 = finger.l20;
        ctx.l23 = finger.l23;
        ctx.l25 = finger.l25;
        ctx.pose = KnucklePose{0.0, knuckles.alpha1, knuckles.alpha2, knuckles.alpha3};
        ctx.contact_fraction = contact_fraction;
        ctx.transmission_floor = transmission_floor;
        ctx.infeasibility_penalty = infeasibility_penalty;
        return ctx;
    }

    CrossSectionState cross_section() const {
        CrossSectionState s;
        s.l13 = coupling.l13;
        s.l14 = cross_l14;
        s.l15 = cross_l15;
        s.l16 = finger.l16;
        s.l17 = cross_l17;
        s.alpha = coupling.alpha;
        s.theta[4] = cross_theta10;
        return s;
    }

    JointTorques grasp_torques() const {
        const auto [tau2, tau3] = spring_torques(springs, knuckles.alpha2, knuckles.alpha3);
        return {tau1, tau2, tau3};
    }

    void validate() const;
};

namespace detail {

class ConfigReader {
public:
    explicit ConfigReader(const nlohmann::json& root) : root_(root) {
        if (!root.is_object()) throw ParseError("config root must be a JSON object");
    }

    // Marks a block as known and hands its reader to fn.
    template <class Fn>
    void block(const std::string& name, Fn&& fn) {
        known_.push_back(name);
        const auto it = root_.find(name);
        if (it == root_.end()) return;
        if (!it->is_object()) throw ParseError("config block '" + name + "' must be an object");
        BlockReader br(*it, name);
        fn(br);
        br.finish();
    }

    void finish() const {
        for (const auto& [key, _] : root_.items()) {
            bool ok = false;
            for (const auto& k : known_)
                if (k == key) ok = true;
            if (!ok) throw ParseError("unknown config key '" + key + "'");
        }
    }

    class BlockReader {
    public:
        BlockReader(const nlohmann::json& obj, std::string prefix)
            : obj_(obj), prefix_(std::move(prefix)) {}

        void number(const std::string& key, double& target) {
            known_.push_back(key);
            const auto it = obj_.find(key);
            if (it == obj_.end()) return;
            if (!it->is_number()) throw ParseError("config key '" + path(key) + "' must be a number");
            target = it->get<double>();
        }

        void angle_deg(const std::string& key, double& target_rad) {
            double deg = rad2deg(target_rad);
            number(key, deg);
            target_rad = deg2rad(deg);
        }

        void integer(const std::string& key, int& target) {
            known_.push_back(key);
            const auto it = obj_.find(key);
            if (it == obj_.end()) return;
            if (!it->is_number_integer())
                throw ParseError("config key '" + path(key) + "' must be an integer");
            target = it->get<int>();
        }

        void unsigned64(const std::string& key, std::uint64_t& target) {
            known_.push_back(key);
            const auto it = obj_.find(key);
            if (it == obj_.end()) return;
            if (!it->is_number_unsigned() && !it->is_number_integer())
                throw ParseError("config key '" + path(key) + "' must be an integer");
            target = it->get<std::uint64_t>();
        }

        void vector7(const std::string& key, Vector& target) {
            known_.push_back(key);
            const auto it = obj_.find(key);
            if (it == obj_.end()) return;
            if (!it->is_array() || it->size() != 7)
                throw ParseError("config key '" + path(key) + "' must be an array of 7 numbers");
            Vector v(7);
            for (int i = 0; i < 7; ++i) {
                if (!(*it)[i].is_number())
                    throw ParseError("config key '" + path(key) + "' must contain numbers");
                v(i) = (*it)[i].get<double>();
            }
            target = v;
        }

        void finish() const {
            for (const auto& [key, _] : obj_.items()) {
                bool ok = false;
                for (const auto& k : known_)
                    if (k == key) ok = true;
                if (!ok) throw ParseError("unknown config key '" + path(key) + "'");
            }
        }

    private:
        std::string path(const std::string& key) const { return prefix_ + "." + key; }
        const nlohmann::json& obj_;
        std::string prefix_;
        std::vector<std::string> known_;
    };

private:
    const nlohmann::json& root_;
    std::vector<std::string> known_;
};

inline void require_positive(double v, const char* key) {
    if (!(v > 0.0)) throw ValidationError(std::string("config: ") + key + " must be positive");
}

}  // namespace detail

inline void ToolConfig::validate() const {
    try {
        arm.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config: arm invalid (") + e.what() + ")");
    }
    coupling.validate();
    finger.validate();
    springs.validate();
    detail::require_positive(cross_l14, "cross_section.l14");
    detail::require_positive(cross_l15, "cross_section.l15");
    detail::require_positive(cross_l17, "cross_section.l17");
    detail::require_positive(contacts.d1, "contacts.d1");
    detail::require_positive(contacts.d2, "contacts.d2");
    detail::require_positive(contacts.d3, "contacts.d3");
    if (contacts.d1 > finger.l18 || contacts.d2 > finger.l19 || contacts.d3 > finger.l20)
        throw ValidationError("config: contact distances must not exceed their segment lengths");
    // tau1 = 0 is allowed for plain force evaluation; the optimizer context
    // re-validates strict positivity when a swarm run is requested.
    if (tau1 < 0.0) throw ValidationError("config: objective.tau1 must be nonnegative");
    if (!(contact_fraction > 0.0 && contact_fraction <= 1.0))
        throw ValidationError("config: objective.contact_fraction must lie in (0, 1]");
    detail::require_positive(infeasibility_penalty, "objective.penalty");
    pso.validate();
    bounds.validate();
    if (bounds.lower.size() != 7)
        throw ValidationError("config: bounds must have 7 components");
    coordination.validate();
    detail::require_positive(trajectory.omega1, "trajectory.omega1");
    detail::require_positive(trajectory.dt, "trajectory.dt");
    if (trajectory.samples_per_segment < 1)
        throw ValidationError("config: trajectory.samples_per_segment must be >= 1");
    if (surface.n2 < 1 || surface.n3 < 1)
        throw ValidationError("config: surface grid counts must be >= 1");
    detail::require_positive(surface.d1, "surface.d1");
}

/// Parses a configuration object. Unknown keys are rejected so that a typo in
/// a physical parameter cannot silently fall back to a default; angles appear
/// in degrees and are converted here.
inline ToolConfig load_config_json(const nlohmann::json& root) {
    ToolConfig c;
    detail::ConfigReader r(root);

    r.block("arm", [&](auto& b) {
        b.number("l0", c.arm.l0); b.number("l1", c.arm.l1); b.number("l2", c.arm.l2);
        b.number("l3", c.arm.l3); b.number("l4", c.arm.l4); b.number("l5", c.arm.l5);
        b.number("l7", c.arm.l7); b.number("l8", c.arm.l8);
    });
    r.block("coupling", [&](auto& b) {
        b.number("l10", c.coupling.l10); b.number("l11", c.coupling.l11);
        b.number("l12", c.coupling.l12); b.number("l13", c.coupling.l13);
        b.angle_deg("alpha_deg", c.coupling.alpha);
    });
    r.block("cross_section", [&](auto& b) {
        b.number("l14", c.cross_l14); b.number("l15", c.cross_l15);
        b.number("l17", c.cross_l17); b.angle_deg("theta10_deg", c.cross_theta10);
    });
    r.block("finger", [&](auto& b) {
        b.number("l16", c.finger.l16); b.number("l18", c.finger.l18);
        b.number("l19", c.finger.l19); b.number("l20", c.finger.l20);
        b.number("l21", c.finger.l21); b.number("l22", c.finger.l22);
        b.number("l23", c.finger.l23); b.number("l24", c.finger.l24);
        b.number("l25", c.finger.l25);
    });
    r.block("springs", [&](auto& b) {
        b.number("k1", c.springs.k1); b.number("k2", c.springs.k2);
        b.number("tau_s1", c.springs.tau_s1); b.number("tau_s2", c.springs.tau_s2);
    });
    r.block("contacts", [&](auto& b) {
        b.number("d1", c.contacts.d1); b.number("d2", c.contacts.d2);
        b.number("d3", c.contacts.d3);
    });
    r.block("knuckles", [&](auto& b) {
        b.angle_deg("alpha1_deg", c.knuckles.alpha1);
        b.angle_deg("alpha2_deg", c.knuckles.alpha2);
        b.angle_deg("alpha3_deg", c.knuckles.alpha3);
    });
    r.block("objective", [&](auto& b) {
        b.number("tau1", c.tau1);
        b.number("contact_fraction", c.contact_fraction);
        b.angle_deg("transmission_floor_deg", c.transmission_floor);
        b.number("penalty", c.infeasibility_penalty);
    });
    r.block("pso", [&](auto& b) {
        b.integer("particles", c.pso.swarm_size);
        b.integer("iterations", c.pso.max_iterations);
        b.number("inertia", c.pso.inertia);
        b.number("cognitive", c.pso.cognitive);
        b.number("social", c.pso.social);
        b.unsigned64("seed", c.pso.seed);
        b.number("velocity_clamp", c.pso.velocity_clamp);
        b.integer("threads", c.pso.threads);
    });
    r.block("bounds", [&](auto& b) {
        b.vector7("lower", c.bounds.lower);
        b.vector7("upper", c.bounds.upper);
    });
    r.block("coordination", [&](auto& b) {
        b.number("x_ofs", c.coordination.x_ofs); b.number("l_ofs", c.coordination.l_ofs);
        b.number("h_base", c.coordination.h_base); b.number("y_veh", c.coordination.y_veh);
        b.number("l8", c.coordination.l8); b.number("l6", c.coordination.l6);
        b.number("l9", c.coordination.l9); b.number("l0", c.coordination.l0);
        b.angle_deg("theta0_pregrasp_deg", c.coordination.theta0_pregrasp);
    });
    r.block("trajectory", [&](auto& b) {
        b.number("theta4_deg", c.trajectory.theta4_deg);
        b.number("theta1_start_deg", c.trajectory.theta1_start_deg);
        b.number("theta1_peak_deg", c.trajectory.theta1_peak_deg);
        b.number("theta1_grasp_end_deg", c.trajectory.theta1_grasp_end_deg);
        b.number("theta1_final_deg", c.trajectory.theta1_final_deg);
        b.number("omega1", c.trajectory.omega1);
        b.integer("samples_per_segment", c.trajectory.samples_per_segment);
        b.number("dt", c.trajectory.dt);
        b.number("guess_theta0_deg", c.trajectory.guess_theta0_deg);
        b.number("guess_theta2_deg", c.trajectory.guess_theta2_deg);
    });
    r.block("surface", [&](auto& b) {
        b.number("d1", c.surface.d1);
        b.number("d2_min", c.surface.d2_min);
        b.number("d2_max", c.surface.d2_max);
        b.number("d3_min", c.surface.d3_min);
        b.number("d3_max", c.surface.d3_max);
        b.integer("n2", c.surface.n2);
        b.integer("n3", c.surface.n3);
    });
    r.finish();
    c.validate();
    return c;
}

inline ToolConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path.string());
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config parse failure in " + path.string() + ": " + e.what());
    }
    return load_config_json(root);
}

/// Canonical JSON image of the effective configuration; keys come out in
/// lexicographic order, so the digest is stable for identical configs.
inline nlohmann::json config_to_json(const ToolConfig& c) {
    nlohmann::json j;
    j["arm"] = {{"l0", c.arm.l0}, {"l1", c.arm.l1}, {"l2", c.arm.l2}, {"l3", c.arm.l3},
                {"l4", c.arm.l4}, {"l5", c.arm.l5}, {"l7", c.arm.l7}, {"l8", c.arm.l8}};
    j["coupling"] = {{"l10", c.coupling.l10}, {"l11", c.coupling.l11},
                     {"l12", c.coupling.l12}, {"l13", c.coupling.l13},
                     {"alpha_deg", rad2deg(c.coupling.alpha)}};
    j["cross_section"] = {{"l14", c.cross_l14}, {"l15", c.cross_l15}, {"l17", c.cross_l17},
                          {"theta10_deg", rad2deg(c.cross_theta10)}};
    j["finger"] = {{"l16", c.finger.l16}, {"l18", c.finger.l18}, {"l19", c.finger.l19},
                   {"l20", c.finger.l20}, {"l21", c.finger.l21}, {"l22", c.finger.l22},
                   {"l23", c.finger.l23}, {"l24", c.finger.l24}, {"l25", c.finger.l25}};
    j["springs"] = {{"k1", c.springs.k1}, {"k2", c.springs.k2},
                    {"tau_s1", c.springs.tau_s1}, {"tau_s2", c.springs.tau_s2}};
    j["contacts"] = {{"d1", c.contacts.d1}, {"d2", c.contacts.d2}, {"d3", c.contacts.d3}};
    j["knuckles"] = {{"alpha1_deg", rad2deg(c.knuckles.alpha1)},
                     {"alpha2_deg", rad2deg(c.knuckles.alpha2)},
                     {"alpha3_deg", rad2deg(c.knuckles.alpha3)}};
    j["objective"] = {{"tau1", c.tau1},
                      {"contact_fraction", c.contact_fraction},
                      {"transmission_floor_deg", rad2deg(c.transmission_floor)},
                      {"penalty", c.infeasibility_penalty}};
    j["pso"] = {{"particles", c.pso.swarm_size}, {"iterations", c.pso.max_iterations},
                {"inertia", c.pso.inertia}, {"cognitive", c.pso.cognitive},
                {"social", c.pso.social}, {"seed", c.pso.seed},
                {"velocity_clamp", c.pso.velocity_clamp}, {"threads", c.pso.threads}};
    j["bounds"] = {{"lower", std::vector<double>(c.bounds.lower.data(), c.bounds.lower.data() + 7)},
                   {"upper", std::vector<double>(c.bounds.upper.data(), c.bounds.upper.data() + 7)}};
    j["coordination"] = {{"x_ofs", c.coordination.x_ofs}, {"l_ofs", c.coordination.l_ofs},
                         {"h_base", c.coordination.h_base}, {"y_veh", c.coordination.y_veh},
                         {"l8", c.coordination.l8}, {"l6", c.coordination.l6},
                         {"l9", c.coordination.l9}, {"l0", c.coordination.l0},
                         {"theta0_pregrasp_deg", rad2deg(c.coordination.theta0_pregrasp)}};
    j["trajectory"] = {{"theta4_deg", c.trajectory.theta4_deg},
                       {"theta1_start_deg", c.trajectory.theta1_start_deg},
                       {"theta1_peak_deg", c.trajectory.theta1_peak_deg},
                       {"theta1_grasp_end_deg", c.trajectory.theta1_grasp_end_deg},
                       {"theta1_final_deg", c.trajectory.theta1_final_deg},
                       {"omega1", c.trajectory.omega1},
                       {"samples_per_segment", c.trajectory.samples_per_segment},
                       {"dt", c.trajectory.dt},
                       {"guess_theta0_deg", c.trajectory.guess_theta0_deg},
                       {"guess_theta2_deg", c.trajectory.guess_theta2_deg}};
    j["surface"] = {{"d1", c.surface.d1}, {"d2_min", c.surface.d2_min},
                    {"d2_max", c.surface.d2_max}, {"d3_min", c.surface.d3_min},
                    {"d3_max", c.surface.d3_max}, {"n2", c.surface.n2}, {"n3", c.surface.n3}};
    return j;
}

inline std::string config_digest(const ToolConfig& c) {
    return to_hex(fnv1a64(config_to_json(c).dump()));
}

/// Drive profile of the batch arm simulation, built from the config block.
inline std::vector<ProfilePoint> build_replay_profile(const TrajectoryConfig& t) {
    std::vector<ProfilePoint> prof;
    double time = 0.0;
    const int n = t.samples_per_segment;
    auto segment = [&](double from_deg, double to_deg, Phase phase, bool skip_first) {
        for (int i = skip_first ? 1 : 0; i <= n; ++i) {
            prof.push_back({time, deg2rad(from_deg + (to_deg - from_deg) * i / n), phase});
            time += t.dt;
        }
    };
    segment(t.theta1_start_deg, t.theta1_peak_deg, Phase::Lifting, false);
    segment(t.theta1_peak_deg, t.theta1_grasp_end_deg, Phase::Grasping, true);
    segment(t.theta1_grasp_end_deg, t.theta1_final_deg, Phase::Lifting, true);
    return prof;
}

}  // namespace metagrip
