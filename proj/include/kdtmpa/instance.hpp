#pragma once

#include "kdtmpa/common.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace kdtmpa {

/// One asset. Degradation follows a chain on levels 1..states() that either
/// stays put or moves up by one level per epoch; advance_prob[x-1] is the
/// probability of leaving level x. The top level is failed and absorbing.
struct Machine {
    std::string degradation_name; ///< label of the matrix in the instance file
    std::vector<double> advance_prob;
    int repair_pm = 1;
    int repair_cm = 1;
    double cost_pm = 0.0;
    double cost_cm = 0.0;
    double cost_downtime = 0.0;

    int states() const noexcept { return static_cast<int>(advance_prob.size()) + 1; }
    int failed_level() const noexcept { return states(); }

    bool operator==(const Machine&) const = default;
};

/// Immutable K-DTMPA problem definition. Machines and locations coincide:
/// machine m sits at location m. Indices are 0-based in code.
struct Instance {
    std::string name;
    double gamma = 0.99;
    double cost_travel = 0.0;
    std::string cost_structure; ///< "C1".."C3" or "custom"; informational
    std::vector<std::string> location_names;
    std::vector<Machine> machines;
    std::vector<int> travel; ///< row-major M x M travel times
    std::vector<int> initial_locations; ///< one per engineer
    std::optional<std::vector<std::array<double, 2>>> coords;
    std::optional<std::vector<std::vector<int>>> clusters;

    int machine_count() const noexcept { return static_cast<int>(machines.size()); }
    int engineer_count() const noexcept { return static_cast<int>(initial_locations.size()); }
    int travel_time(int from, int to) const noexcept {
        return travel[static_cast<std::size_t>(from) * machines.size() + static_cast<std::size_t>(to)];
    }
    int max_states() const noexcept {
        int n = 0;
        for (const auto& m : machines) n = std::max(n, m.states());
        return n;
    }

    bool operator==(const Instance&) const = default;
};

/// Named cost structures used throughout the experiments.
struct CostStructure {
    double pm, cm, downtime, travel;
};

inline std::optional<CostStructure> named_cost_structure(const std::string& name) {
    if (name == "C1") return CostStructure{0.0, 0.0, 1.0, 0.05};
    if (name == "C2") return CostStructure{1.0, 2.0, 10.0, 0.0};
    if (name == "C3") return CostStructure{1.0, 4.0, 1.0, 0.05};
    return std::nullopt;
}

/// Checks every structural invariant; throws ValidationError naming the field.
inline void validate(const Instance& inst) {
    const int M = inst.machine_count();
    const int K = inst.engineer_count();
    auto fail = [&](const std::string& what) { throw ValidationError("instance '" + inst.name + "': " + what); };
    if (M < 1) fail("machines: at least one machine required");
    if (K < 1) fail("engineers: at least one engineer required");
    if (!(inst.gamma >= 0.0 && inst.gamma < 1.0)) fail("gamma must lie in [0, 1)");
    if (!(inst.cost_travel >= 0.0) || !std::isfinite(inst.cost_travel)) fail("travel cost must be non-negative");
    if (inst.travel.size() != static_cast<std::size_t>(M) * M) fail("travel: expected an M x M matrix");
    if (!inst.location_names.empty() && inst.location_names.size() != static_cast<std::size_t>(M))
        fail("locations: one name per machine required");
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            const int t = inst.travel_time(i, j);
            if (i == j && t != 0) fail("travel[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]: diagonal must be 0");
            if (t < 0) fail("travel[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]: negative travel time");
        }
    for (int m = 0; m < M; ++m) {
        const auto& mc = inst.machines[m];
        const std::string tag = "machines[" + std::to_string(m + 1) + "]: ";
        if (mc.states() < 2) fail(tag + "degradation needs at least two levels");
        for (double p : mc.advance_prob)
            if (!(p >= 0.0 && p <= 1.0)) fail(tag + "advance probability outside [0, 1]");
        if (mc.repair_pm < 1 || mc.repair_cm < 1) fail(tag + "repair times must be positive");
        if (!(mc.cost_pm >= 0.0 && mc.cost_cm >= 0.0 && mc.cost_downtime >= 0.0))
            fail(tag + "costs must be non-negative");
        if (mc.cost_cm < mc.cost_pm) fail(tag + "corrective cost below preventive cost");
    }
    for (int k = 0; k < K; ++k) {
        const int l = inst.initial_locations[k];
        if (l < 0 || l >= M) fail("engineers[" + std::to_string(k + 1) + "]: initial location out of range");
    }
    if (inst.coords && inst.coords->size() != static_cast<std::size_t>(M))
        fail("coords: one coordinate pair per location required");
    if (inst.clusters) {
        std::vector<int> seen(M, 0);
        if (inst.clusters->size() != static_cast<std::size_t>(K)) fail("clusters: one cluster per engineer required");
        for (const auto& c : *inst.clusters)
            for (int m : c) {
                if (m < 0 || m >= M) fail("clusters: location out of range");
                ++seen[m];
            }
        for (int m = 0; m < M; ++m)
            if (seen[m] != 1) fail("clusters: not a partition of the locations");
    }
}

/// Largest possible single-epoch cost: every machine down and every engineer
/// paying the most expensive per-engineer charge.
inline double max_stage_cost(const Instance& inst) {
    double dt = 0.0, per_engineer = inst.cost_travel;
    for (const auto& m : inst.machines) {
        dt += m.cost_downtime;
        per_engineer = std::max({per_engineer, m.cost_cm, m.cost_pm});
    }
    return dt + inst.engineer_count() * per_engineer;
}

} // namespace kdtmpa
