#pragma once

// Policy specifications as used on the command line:
//
//   idle | random | dispatch:s=<level|fail> | net:<file> | exact:<file>
//   | dec:<spec>[;<spec>...]
//
// A dec: spec takes either one sub-spec for every cluster or one per
// cluster, separated by ';'. Clusters come from the instance file, else
// from k-means on its coordinates with one cluster pinned to each
// engineer's starting location.

#include "kdtmpa/decomposition.hpp"
#include "kdtmpa/dispatch.hpp"
#include "kdtmpa/exact.hpp"
#include "kdtmpa/instance_io.hpp"
#include "kdtmpa/kmeans.hpp"
#include "kdtmpa/network_policy.hpp"

namespace kdtmpa {

inline std::vector<std::vector<int>> instance_clusters(const Instance& inst, std::uint64_t seed = 1) {
    if (inst.clusters) return *inst.clusters;
    if (!inst.coords) throw ValidationError("instance '" + inst.name + "' has neither clusters nor coordinates");
    Rng rng(seed);
    return kmeans_clusters(*inst.coords, inst.engineer_count(), rng, inst.initial_locations).clusters;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) return out;
        start = pos + 1;
    }
}

/// Builds the policy named by `spec` for `inst`. Network and table files
/// must carry `expected_hash`, the hash of the instance they were built for
/// (the original instance when `inst` is a transformed variant).
inline PolicyPtr make_policy(const std::string& spec, const Instance& inst, std::uint64_t expected_hash,
                             std::uint64_t seed = 1) {
    if (spec == "idle") return std::make_shared<IdlePolicy>();
    if (spec == "random") return std::make_shared<RandomPolicy>();
    if (spec.rfind("dispatch:s=", 0) == 0) {
        const std::string level = spec.substr(11);
        if (level == "fail") return std::make_shared<DispatchPolicy>(ThresholdConfig::reactive(inst), level);
        int s = 0;
        try {
            std::size_t used = 0;
            s = std::stoi(level, &used);
            if (used != level.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ValidationError("policy '" + spec + "': threshold must be an integer or 'fail'");
        }
        return std::make_shared<DispatchPolicy>(ThresholdConfig::constant(inst, s), level);
    }
    if (spec.rfind("net:", 0) == 0) {
        const std::string path = spec.substr(4);
        auto tn = std::make_shared<TrainedNetwork>(load_network(path));
        if (tn->instance_hash != expected_hash)
            throw ValidationError("network '" + path + "' was trained for a different instance (hash " +
                                  hash_hex(tn->instance_hash) + ", expected " + hash_hex(expected_hash) + ")");
        check_network_compatible(*tn, inst);
        return std::make_shared<NetworkPolicy>(std::move(tn), path);
    }
    if (spec.rfind("exact:", 0) == 0) return std::make_shared<TablePolicy>(load_policy_table(spec.substr(6), inst, expected_hash));
    if (spec.rfind("dec:", 0) == 0) {
        const auto clusters = instance_clusters(inst, seed);
        const auto subs = split(spec.substr(4), ';');
        if (subs.size() != 1 && subs.size() != clusters.size())
            throw ValidationError("policy '" + spec + "': expected 1 or " + std::to_string(clusters.size()) + " sub-policies");
        std::vector<PolicyPtr> policies;
        for (std::size_t k = 0; k < clusters.size(); ++k) {
            const Instance sub = sub_instance(inst, clusters[k], static_cast<int>(k));
            const std::string& s = subs.size() == 1 ? subs[0] : subs[k];
            if (s.rfind("dec:", 0) == 0) throw ValidationError("policy '" + spec + "': nested decomposition");
            policies.push_back(make_policy(s, sub, instance_hash(sub), seed));
        }
        return std::make_shared<DecompositionPolicy>(inst, clusters, std::move(policies));
    }
    throw ValidationError("unknown policy '" + spec + "' (idle, random, dispatch:s=..., net:..., exact:..., dec:...)");
}

} // namespace kdtmpa
