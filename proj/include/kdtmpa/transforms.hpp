#pragma once

// Network changes for robustness studies. All transforms keep M (and with it
// the f1/f2 feature dimension), so networks trained on the original instance
// stay applicable.

#include "kdtmpa/instance.hpp"

#include <string>

namespace kdtmpa {

/// Machine m becomes a dummy that never leaves the healthy level and costs
/// nothing. The location itself stays in the network.
inline Instance remove_machine(const Instance& inst, int m) {
    if (m < 0 || m >= inst.machine_count()) throw ValidationError("remove_machine: machine index out of range");
    if (inst.machine_count() < 2) throw ValidationError("remove_machine: at least two machines required");
    Instance out = inst;
    auto& mc = out.machines[m];
    std::fill(mc.advance_prob.begin(), mc.advance_prob.end(), 0.0);
    mc.degradation_name = "dummy";
    mc.cost_pm = mc.cost_cm = mc.cost_downtime = 0.0;
    return out;
}

inline Instance remove_engineer(const Instance& inst, int k) {
    if (k < 0 || k >= inst.engineer_count()) throw ValidationError("remove_engineer: engineer index out of range");
    if (inst.engineer_count() < 2) throw ValidationError("remove_engineer: at least two engineers required");
    Instance out = inst;
    out.initial_locations.erase(out.initial_locations.begin() + k);
    if (out.clusters) {
        // A cluster partition is only kept when the engineer's cluster can go
        // with it, i.e. when it holds no locations.
        if ((*out.clusters)[k].empty()) out.clusters->erase(out.clusters->begin() + k);
        else out.clusters.reset();
    }
    return out;
}

/// Appends an engineer starting at `location`. An existing cluster
/// partition gets an empty cluster for the new engineer.
inline Instance add_engineer(const Instance& inst, int location) {
    if (location < 0 || location >= inst.machine_count())
        throw ValidationError("add_engineer: location out of range");
    Instance out = inst;
    out.initial_locations.push_back(location);
    if (out.clusters) out.clusters->emplace_back();
    return out;
}

/// Parses "rm-machine:i", "rm-engineer:k" or "add-engineer:loc" (1-based).
inline Instance apply_transform(const Instance& inst, const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw ValidationError("transform '" + spec + "': expected kind:index");
    const std::string kind = spec.substr(0, colon);
    int idx = 0;
    try {
        std::size_t used = 0;
        idx = std::stoi(spec.substr(colon + 1), &used);
        if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ValidationError("transform '" + spec + "': index must be an integer");
    }
    if (kind == "rm-machine") return remove_machine(inst, idx - 1);
    if (kind == "rm-engineer") return remove_engineer(inst, idx - 1);
    if (kind == "add-engineer") return add_engineer(inst, idx - 1);
    throw ValidationError("transform '" + spec + "': unknown kind (rm-machine, rm-engineer, add-engineer)");
}

} // namespace kdtmpa
