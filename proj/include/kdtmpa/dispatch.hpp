#pragma once

// Threshold-ranking dispatch heuristic: rank machines whose degradation level
// reached their threshold, trim the ranking to the number of available
// engineers by dropping remote machines, and match the rest to engineers by a
// minimum-travel-time assignment. Unassigned engineers stay where they are.

#include "kdtmpa/hungarian.hpp"
#include "kdtmpa/policy.hpp"

#include <functional>
#include <limits>
#include <map>
#include <optional>

namespace kdtmpa {

/// Per-machine maintenance threshold s_m. A machine enters the ranking once its
/// level reaches s_m; s_m equal to the failed level gives the reactive variant.
class ThresholdConfig {
public:
    using Function = std::function<int(const Instance&, const NetworkState&, int machine)>;

    explicit ThresholdConfig(std::vector<int> levels) : levels_(std::move(levels)) {}
    explicit ThresholdConfig(Function fn) : fn_(std::move(fn)) {}

    /// s_m = failed level for every machine.
    static ThresholdConfig reactive(const Instance& inst) {
        std::vector<int> s;
        for (const auto& m : inst.machines) s.push_back(m.failed_level());
        return ThresholdConfig(std::move(s));
    }

    static ThresholdConfig constant(const Instance& inst, int level) {
        std::vector<int> s;
        for (int m = 0; m < inst.machine_count(); ++m) {
            if (level < 1 || level > inst.machines[m].states())
                throw ValidationError("threshold " + std::to_string(level) + " outside the level range of machine " +
                                      std::to_string(m + 1));
            s.push_back(level);
        }
        return ThresholdConfig(std::move(s));
    }

    int at(const Instance& inst, const NetworkState& s, int m) const {
        return fn_ ? fn_(inst, s, m) : levels_[static_cast<std::size_t>(m)];
    }

    bool is_constant() const { return !fn_; }
    const std::vector<int>& levels() const { return levels_; }

private:
    std::vector<int> levels_;
    Function fn_;
};

/// Machines at or above threshold, most degraded first (ties by index).
/// Machines under repair and machines some engineer is already travelling to
/// are left out so they are not dispatched twice.
inline void rank_assets_into(const Instance& inst, const NetworkState& s, const ThresholdConfig& thresholds,
                             std::vector<int>& ranked) {
    ranked.clear();
    for (int m = 0; m < inst.machine_count(); ++m) {
        if (s.levels[m] < thresholds.at(inst, s, m)) continue;
        bool excluded = false;
        for (const auto& e : s.engineers)
            if (e.location == m && e.remaining > 0) excluded = true;
        if (!excluded) ranked.push_back(m);
    }
    // Stable insertion sort; the lists are short and this avoids a buffer.
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        const int v = ranked[i];
        std::size_t j = i;
        for (; j > 0 && s.levels[ranked[j - 1]] < s.levels[v]; --j) ranked[j] = ranked[j - 1];
        ranked[j] = v;
    }
}

inline std::vector<int> rank_assets(const Instance& inst, const NetworkState& s, const ThresholdConfig& thresholds) {
    std::vector<int> ranked;
    rank_assets_into(inst, s, thresholds, ranked);
    return ranked;
}

namespace detail {
inline int nearest_engineer_distance(const Instance& inst, int machine, const std::vector<int>& engineer_locations) {
    int best = std::numeric_limits<int>::max();
    for (int l : engineer_locations) best = std::min(best, inst.travel_time(l, machine));
    return best;
}

/// Positions in `ranked` of the machines farthest from their nearest engineer.
inline void farthest_candidates_into(const Instance& inst, const std::vector<int>& ranked,
                                     const std::vector<int>& engineer_locations, std::vector<std::size_t>& ties) {
    ties.clear();
    int worst = -1;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const int d = nearest_engineer_distance(inst, ranked[i], engineer_locations);
        if (d > worst) {
            worst = d;
            ties.assign(1, i);
        } else if (d == worst) {
            ties.push_back(i);
        }
    }
}

inline std::vector<std::size_t> farthest_candidates(const Instance& inst, const std::vector<int>& ranked,
                                                    const std::vector<int>& engineer_locations) {
    std::vector<std::size_t> ties;
    farthest_candidates_into(inst, ranked, engineer_locations, ties);
    return ties;
}
} // namespace detail

/// Drops machines from the ranking until at most as many remain as there are
/// available engineers. Each round removes a machine whose distance to its
/// nearest available engineer is largest; ties are broken uniformly by rng.
inline void reduce_ranking_inplace(const Instance& inst, std::vector<int>& ranked,
                                   const std::vector<int>& engineer_locations, Rng& rng) {
    if (engineer_locations.empty()) {
        ranked.clear();
        return;
    }
    thread_local std::vector<std::size_t> ties;
    while (ranked.size() > engineer_locations.size()) {
        detail::farthest_candidates_into(inst, ranked, engineer_locations, ties);
        const std::size_t pick = ties.size() == 1 ? ties[0] : ties[uniform_index(rng, ties.size())];
        ranked.erase(ranked.begin() + static_cast<std::ptrdiff_t>(pick));
    }
}

inline std::vector<int> reduce_ranking(const Instance& inst, std::vector<int> ranked,
                                       const std::vector<int>& engineer_locations, Rng& rng) {
    reduce_ranking_inplace(inst, ranked, engineer_locations, rng);
    return ranked;
}

/// All possible outcomes of reduce_ranking with their probabilities.
inline std::vector<std::pair<std::vector<int>, double>> reduce_ranking_outcomes(
    const Instance& inst, const std::vector<int>& ranked, const std::vector<int>& engineer_locations) {
    std::map<std::vector<int>, double> acc;
    auto rec = [&](auto&& self, std::vector<int> cur, double p) -> void {
        if (engineer_locations.empty()) cur.clear();
        if (cur.size() <= engineer_locations.size()) {
            acc[cur] += p;
            return;
        }
        const auto ties = detail::farthest_candidates(inst, cur, engineer_locations);
        for (std::size_t t : ties) {
            auto next = cur;
            next.erase(next.begin() + static_cast<std::ptrdiff_t>(t));
            self(self, std::move(next), p / static_cast<double>(ties.size()));
        }
    };
    rec(rec, ranked, 1.0);
    return {acc.begin(), acc.end()};
}

/// Assigns the (already reduced) jobs to the available engineers and fills in
/// the joint action. Jobs are padded with zero-cost dummies.
inline void assign_jobs(const Instance& inst, const NetworkState& s, const std::vector<int>& available,
                        const std::vector<int>& jobs, JointAction& out) {
    out.resize(s.engineers.size());
    for (std::size_t k = 0; k < s.engineers.size(); ++k) out[k] = EngineerAction::travel_to(s.engineers[k].location);
    if (jobs.empty() || available.empty()) return;
    const std::size_t n = available.size();
    std::vector<double> cost(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < jobs.size(); ++c)
            cost[r * n + c] = inst.travel_time(s.engineers[available[r]].location, jobs[c]);
    const Assignment asg = hungarian(cost, n);
    for (std::size_t r = 0; r < n; ++r) {
        const int k = available[r];
        const auto col = static_cast<std::size_t>(asg.column_of_row[r]);
        if (col >= jobs.size()) continue;
        const int m = jobs[col];
        // Jobs are distinct, so only engineers already repairing here can block.
        const bool own = m == s.engineers[k].location;
        out[k] = own && !detail::other_maintains_at(s, k, m) ? EngineerAction::maintain() : EngineerAction::travel_to(m);
    }
}

inline std::vector<int> available_engineers(const NetworkState& s) {
    std::vector<int> av;
    for (std::size_t k = 0; k < s.engineers.size(); ++k)
        if (s.engineers[k].available()) av.push_back(static_cast<int>(k));
    return av;
}

inline JointAction dispatch_decide(const Instance& inst, const NetworkState& s, const ThresholdConfig& thresholds,
                                   Rng& rng) {
    JointAction out;
    const auto available = available_engineers(s);
    std::vector<int> locations;
    for (int k : available) locations.push_back(s.engineers[k].location);
    const auto jobs = reduce_ranking(inst, rank_assets(inst, s, thresholds), locations, rng);
    assign_jobs(inst, s, available, jobs, out);
    return out;
}

/// The dispatching heuristic as a policy.
class DispatchPolicy final : public Policy {
public:
    DispatchPolicy(ThresholdConfig thresholds, std::string label)
        : thresholds_(std::move(thresholds)), label_(std::move(label)) {}

    std::string id() const override { return "dispatch:s=" + label_; }

    const ThresholdConfig& thresholds() const { return thresholds_; }

    void decide(const Instance& inst, const NetworkState& s, Rng& rng, JointAction& out) const override {
        out.resize(s.engineers.size());
        thread_local std::vector<int> ranked, available, locations;
        available.clear();
        locations.clear();
        for (std::size_t k = 0; k < s.engineers.size(); ++k) {
            out[k] = EngineerAction::travel_to(s.engineers[k].location);
            if (s.engineers[k].available()) {
                available.push_back(static_cast<int>(k));
                locations.push_back(s.engineers[k].location);
            }
        }
        if (available.empty()) return;
        rank_assets_into(inst, s, thresholds_, ranked);
        if (ranked.empty()) return;
        reduce_ranking_inplace(inst, ranked, locations, rng);
        if (available.size() == 1) {
            const int k = available[0], m = ranked[0];
            const bool own = m == s.engineers[k].location;
            out[k] = own && !detail::other_maintains_at(s, k, m) ? EngineerAction::maintain() : EngineerAction::travel_to(m);
            return;
        }
        assign_jobs(inst, s, available, ranked, out);
    }

    std::vector<WeightedAction> distribution(const Instance& inst, const NetworkState& s) const override {
        const auto available = available_engineers(s);
        std::vector<int> locations;
        for (int k : available) locations.push_back(s.engineers[k].location);
        std::vector<WeightedAction> out;
        for (const auto& [jobs, p] : reduce_ranking_outcomes(inst, rank_assets(inst, s, thresholds_), locations)) {
            JointAction a;
            assign_jobs(inst, s, available, jobs, a);
            auto it = std::find_if(out.begin(), out.end(), [&](const WeightedAction& w) { return w.action == a; });
            if (it == out.end()) out.push_back({std::move(a), p});
            else it->probability += p;
        }
        return out;
    }

private:
    ThresholdConfig thresholds_;
    std::string label_;
};

} // namespace kdtmpa
