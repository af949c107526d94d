#pragma once

// Network decomposition: engineer k serves only the machines of cluster k,
// acting on the single-maintainer instance induced by that cluster.

#include "kdtmpa/policy.hpp"

#include <optional>

namespace kdtmpa {

/// Throws unless `clusters` partitions the locations with one non-empty
/// cluster per engineer that contains that engineer's initial location.
inline void check_clusters(const Instance& inst, const std::vector<std::vector<int>>& clusters) {
    const int M = inst.machine_count();
    if (static_cast<int>(clusters.size()) != inst.engineer_count())
        throw ValidationError("clusters: one cluster per engineer required");
    std::vector<int> seen(M, 0);
    for (const auto& c : clusters) {
        if (c.empty()) throw ValidationError("clusters: empty cluster");
        for (int m : c) {
            if (m < 0 || m >= M) throw ValidationError("clusters: location out of range");
            ++seen[m];
        }
    }
    for (int m = 0; m < M; ++m)
        if (seen[m] != 1) throw ValidationError("clusters: not a partition of the locations");
    for (int k = 0; k < inst.engineer_count(); ++k) {
        const auto& c = clusters[k];
        if (std::find(c.begin(), c.end(), inst.initial_locations[k]) == c.end())
            throw ValidationError("clusters: engineer " + std::to_string(k + 1) +
                                  " does not start inside its own cluster");
    }
}

/// The K = 1 instance induced by `cluster` for engineer k. Location i of the
/// sub-instance is location cluster[i] of the original.
inline Instance sub_instance(const Instance& inst, const std::vector<int>& cluster, int k) {
    Instance sub;
    sub.name = inst.name + "/cluster" + std::to_string(k + 1);
    sub.gamma = inst.gamma;
    sub.cost_travel = inst.cost_travel;
    sub.cost_structure = inst.cost_structure;
    const std::size_t n = cluster.size();
    sub.travel.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        sub.machines.push_back(inst.machines[cluster[i]]);
        if (!inst.location_names.empty()) sub.location_names.push_back(inst.location_names[cluster[i]]);
        if (inst.coords) {
            if (!sub.coords) sub.coords.emplace();
            sub.coords->push_back((*inst.coords)[cluster[i]]);
        }
        for (std::size_t j = 0; j < n; ++j) sub.travel[i * n + j] = inst.travel_time(cluster[i], cluster[j]);
    }
    const auto it = std::find(cluster.begin(), cluster.end(), inst.initial_locations[k]);
    sub.initial_locations = {static_cast<int>(it == cluster.end() ? 0 : it - cluster.begin())};
    return sub;
}

/// Composite policy: engineer k follows sub_policies[k] on its cluster.
class DecompositionPolicy final : public Policy {
public:
    DecompositionPolicy(const Instance& inst, std::vector<std::vector<int>> clusters, std::vector<PolicyPtr> sub_policies)
        : clusters_(std::move(clusters)), subs_(std::move(sub_policies)) {
        check_clusters(inst, clusters_);
        if (subs_.size() != clusters_.size()) throw ValidationError("decomposition: one sub-policy per cluster required");
        local_.assign(inst.machine_count(), -1);
        for (std::size_t k = 0; k < clusters_.size(); ++k) {
            sub_instances_.push_back(sub_instance(inst, clusters_[k], static_cast<int>(k)));
            for (std::size_t i = 0; i < clusters_[k].size(); ++i) local_[clusters_[k][i]] = static_cast<int>(i);
        }
    }

    std::string id() const override {
        std::string s = "dec:";
        for (std::size_t k = 0; k < subs_.size(); ++k) s += (k ? ";" : "") + subs_[k]->id();
        return s;
    }

    const std::vector<std::vector<int>>& clusters() const { return clusters_; }
    const std::vector<Instance>& sub_instances() const { return sub_instances_; }

    void decide(const Instance&, const NetworkState& s, Rng& rng, JointAction& out) const override {
        out.resize(s.engineers.size());
        JointAction local;
        for (std::size_t k = 0; k < s.engineers.size(); ++k) {
            const auto sub_state = project(s, static_cast<int>(k));
            if (!sub_state) {
                // Outside its cluster (only after external interference): head home.
                out[k] = s.engineers[k].available() ? EngineerAction::travel_to(clusters_[k].front())
                                                    : EngineerAction::travel_to(s.engineers[k].location);
                continue;
            }
            subs_[k]->decide(sub_instances_[k], *sub_state, rng, local);
            out[k] = lift(local[0], static_cast<int>(k));
        }
    }

    std::vector<WeightedAction> distribution(const Instance&, const NetworkState& s) const override {
        std::vector<WeightedAction> out{{JointAction(), 1.0}};
        for (std::size_t k = 0; k < s.engineers.size(); ++k) {
            const auto sub_state = project(s, static_cast<int>(k));
            if (!sub_state) throw std::logic_error("decomposition: engineer outside its cluster");
            std::vector<WeightedAction> next;
            for (const auto& w : subs_[k]->distribution(sub_instances_[k], *sub_state))
                for (const auto& prefix : out) {
                    auto a = prefix.action;
                    a.push_back(lift(w.action[0], static_cast<int>(k)));
                    next.push_back({std::move(a), prefix.probability * w.probability});
                }
            out = std::move(next);
        }
        return out;
    }

private:
    std::optional<NetworkState> project(const NetworkState& s, int k) const {
        const auto& e = s.engineers[k];
        const int l = local_[e.location];
        const auto& c = clusters_[k];
        if (l < 0 || l >= static_cast<int>(c.size()) || c[l] != e.location) return std::nullopt;
        NetworkState sub;
        sub.levels.reserve(c.size());
        for (int m : c) sub.levels.push_back(s.levels[m]);
        sub.engineers = {{l, e.maintaining, e.remaining}};
        return sub;
    }

    EngineerAction lift(EngineerAction a, int k) const {
        return a.is_maintain() ? a : EngineerAction::travel_to(clusters_[k][a.target()]);
    }

    std::vector<std::vector<int>> clusters_;
    std::vector<PolicyPtr> subs_;
    std::vector<Instance> sub_instances_;
    std::vector<int> local_; ///< position of each location inside its cluster
};

} // namespace kdtmpa
