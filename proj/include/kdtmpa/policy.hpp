#pragma once

#include "kdtmpa/mdp.hpp"

#include <memory>
#include <string>
#include <vector>

namespace kdtmpa {

struct WeightedAction {
    JointAction action;
    double probability = 1.0;
};

/// A stationary decision rule. Implementations are immutable after
/// construction; `decide` is safe to call concurrently with distinct rngs.
///
/// `decide` may be called on a post-decision state in which some engineers
/// have already acted this epoch (they show up as busy); it must still return
/// a full joint action whose remaining entries are legal in that state.
class Policy {
public:
    virtual ~Policy() = default;

    virtual std::string id() const = 0;

    virtual void decide(const Instance& inst, const NetworkState& state, Rng& rng, JointAction& out) const = 0;

    JointAction choose(const Instance& inst, const NetworkState& state, Rng& rng) const {
        JointAction a;
        decide(inst, state, rng, a);
        return a;
    }

    /// Exact distribution over joint actions, for the exact evaluator.
    virtual std::vector<WeightedAction> distribution(const Instance&, const NetworkState&) const {
        throw std::logic_error("policy '" + id() + "' does not expose its action distribution");
    }
};

using PolicyPtr = std::shared_ptr<const Policy>;

/// Every engineer continues its activity or idles where it is.
class IdlePolicy final : public Policy {
public:
    std::string id() const override { return "idle"; }

    void decide(const Instance&, const NetworkState& s, Rng&, JointAction& out) const override {
        out.clear();
        for (const auto& e : s.engineers) out.push_back(EngineerAction::travel_to(e.location));
    }

    std::vector<WeightedAction> distribution(const Instance& inst, const NetworkState& s) const override {
        Rng unused;
        return {{choose(inst, s, unused), 1.0}};
    }
};

/// Uniform over each engineer's legal set; joint draws that put two
/// engineers on the same repair are redrawn, so the result is uniform over
/// the jointly legal actions.
class RandomPolicy final : public Policy {
public:
    std::string id() const override { return "random"; }

    void decide(const Instance& inst, const NetworkState& s, Rng& rng, JointAction& out) const override {
        const int M = inst.machine_count();
        const int K = static_cast<int>(s.engineers.size());
        out.resize(K);
        for (;;) {
            for (int k = 0; k < K; ++k) {
                const auto& e = s.engineers[k];
                if (!e.available()) {
                    out[k] = EngineerAction::travel_to(e.location);
                    continue;
                }
                const int options = detail::other_maintains_at(s, k, e.location) ? M : M + 1;
                out[k] = EngineerAction::from_ordinal(static_cast<int>(uniform_index(rng, options)), M);
            }
            if (!has_double_maintenance(s, out)) return;
        }
    }

    std::vector<WeightedAction> distribution(const Instance& inst, const NetworkState& s) const override {
        const int K = static_cast<int>(s.engineers.size());
        std::vector<std::vector<EngineerAction>> sets(K);
        for (int k = 0; k < K; ++k) sets[k] = legal_actions_engineer(inst, s, k);
        std::vector<WeightedAction> out;
        JointAction cur(K);
        auto rec = [&](auto&& self, int k) -> void {
            if (k == K) {
                if (!has_double_maintenance(s, cur)) out.push_back({cur, 0.0});
                return;
            }
            for (auto a : sets[k]) {
                cur[k] = a;
                self(self, k + 1);
            }
        };
        rec(rec, 0);
        for (auto& w : out) w.probability = 1.0 / static_cast<double>(out.size());
        return out;
    }

private:
    static bool has_double_maintenance(const NetworkState& s, const JointAction& a) {
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = i + 1; j < a.size(); ++j)
                if (a[i].is_maintain() && a[j].is_maintain() && s.engineers[i].location == s.engineers[j].location)
                    return true;
        return false;
    }
};

/// A trajectory under a fixed policy. Environment and policy randomness come
/// from separate streams so that policy draws never shift the degradation
/// sample path.
struct Trajectory {
    const Instance& inst;
    const Policy& policy;
    NetworkState state;
    JointAction action;

    Trajectory(const Instance& i, const Policy& p, NetworkState start) : inst(i), policy(p), state(std::move(start)) {}

    /// One epoch under the policy; returns the stage cost breakdown.
    CostBreakdown advance(Rng& env_rng, Rng& policy_rng) {
        policy.decide(inst, state, policy_rng, action);
        const CostBreakdown c = stage_cost_breakdown(inst, state, action);
        for (int k = 0; k < static_cast<int>(action.size()); ++k)
            apply_engineer_action_inplace(inst, state, k, action[k]);
        advance_time_inplace(inst, state, env_rng);
        return c;
    }
};

} // namespace kdtmpa
