#pragma once

// State, actions, transition dynamics and stage costs of the K-DTMPA.
//
// An epoch is processed in two stages. First the engineers' actions are
// applied one at a time (the order does not matter for legal joint actions),
// producing the post-decision state h^a. Then time advances: completed
// repairs reset their machine, other machines degrade at random, and every
// engineer's remaining busy time drops by one.

#include "kdtmpa/common.hpp"
#include "kdtmpa/instance.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kdtmpa {

struct EngineerStatus {
    int location = 0;
    bool maintaining = false;
    int remaining = 0; ///< epochs until available again; 0 means available

    bool available() const noexcept { return remaining == 0; }
    bool operator==(const EngineerStatus&) const = default;
};

/// The MDP state: degradation level per machine (1-based levels) and one
/// status block per engineer.
struct NetworkState {
    std::vector<int> levels;
    std::vector<EngineerStatus> engineers;

    bool operator==(const NetworkState&) const = default;
};

/// Travel to a location (travelling to one's own location means continue or
/// idle) or start maintenance at the current location.
class EngineerAction {
public:
    enum class Kind : std::uint8_t { TravelTo, Maintain };

    constexpr EngineerAction() = default;
    static constexpr EngineerAction travel_to(int location) { return EngineerAction(Kind::TravelTo, location); }
    static constexpr EngineerAction maintain() { return EngineerAction(Kind::Maintain, -1); }

    /// Action ordinals: TravelTo(m) is m, Maintain is M. This is the layout of
    /// the classifier output and the tie-breaking order of the solvers.
    static constexpr EngineerAction from_ordinal(int ordinal, int machine_count) {
        return ordinal == machine_count ? maintain() : travel_to(ordinal);
    }
    constexpr int ordinal(int machine_count) const { return kind_ == Kind::Maintain ? machine_count : target_; }

    constexpr Kind kind() const { return kind_; }
    constexpr bool is_maintain() const { return kind_ == Kind::Maintain; }
    constexpr bool is_travel() const { return kind_ == Kind::TravelTo; }
    constexpr int target() const { return target_; }

    constexpr bool operator==(const EngineerAction&) const = default;

    std::string to_string() const {
        return is_maintain() ? std::string("maintain") : "travel(" + std::to_string(target_ + 1) + ")";
    }

private:
    constexpr EngineerAction(Kind k, int t) : kind_(k), target_(t) {}
    Kind kind_ = Kind::TravelTo;
    int target_ = 0;
};

using JointAction = std::vector<EngineerAction>;

/// h(0): machines as-good-as-new, engineers idle at their initial locations.
inline NetworkState initial_state(const Instance& inst) {
    NetworkState s;
    s.levels.assign(inst.machines.size(), 1);
    s.engineers.reserve(inst.initial_locations.size());
    for (int l : inst.initial_locations) s.engineers.push_back({l, false, 0});
    return s;
}

inline void validate_state(const Instance& inst, const NetworkState& s) {
    const int M = inst.machine_count();
    if (static_cast<int>(s.levels.size()) != M) throw ValidationError("state: expected one level per machine");
    if (static_cast<int>(s.engineers.size()) != inst.engineer_count())
        throw ValidationError("state: expected one block per engineer");
    for (int m = 0; m < M; ++m)
        if (s.levels[m] < 1 || s.levels[m] > inst.machines[m].states())
            throw ValidationError("state: level of machine " + std::to_string(m + 1) + " out of range");
    std::vector<int> maintainers(M, 0);
    for (std::size_t k = 0; k < s.engineers.size(); ++k) {
        const auto& e = s.engineers[k];
        const std::string tag = "state: engineer " + std::to_string(k + 1) + ": ";
        if (e.location < 0 || e.location >= M) throw ValidationError(tag + "location out of range");
        if (e.remaining < 0) throw ValidationError(tag + "negative remaining time");
        if (e.maintaining) {
            if (e.remaining == 0) throw ValidationError(tag + "maintaining but available");
            if (s.levels[e.location] != inst.machines[e.location].failed_level())
                throw ValidationError(tag + "machine under maintenance is not marked down");
            if (++maintainers[e.location] > 1)
                throw ValidationError(tag + "second engineer maintaining the same machine");
        }
    }
}

namespace detail {
inline bool other_maintains_at(const NetworkState& s, int k, int location) {
    for (std::size_t j = 0; j < s.engineers.size(); ++j)
        if (static_cast<int>(j) != k && s.engineers[j].location == location && s.engineers[j].maintaining)
            return true;
    return false;
}

inline void check_engineer_index(const Instance& inst, const NetworkState& s, int k) {
    if (k < 0 || k >= inst.engineer_count() || k >= static_cast<int>(s.engineers.size()))
        throw ValidationError("engineer index " + std::to_string(k) + " out of range");
}
} // namespace detail

/// Reason why `action` is illegal for engineer k in `state`, or empty if legal.
/// Other engineers are read from `state` as is, which may already contain the
/// effects of actions chosen earlier in the same epoch.
inline std::string illegal_reason(const Instance& inst, const NetworkState& state, int k, EngineerAction action) {
    const auto& e = state.engineers[k];
    const int M = inst.machine_count();
    if (action.is_travel() && (action.target() < 0 || action.target() >= M))
        return "travel target out of range";
    if (!e.available()) {
        if (action.is_travel() && action.target() == e.location) return {};
        return "engineer is busy and must continue";
    }
    if (action.is_maintain() && detail::other_maintains_at(state, k, e.location))
        return "another engineer is already maintaining this machine";
    return {};
}

inline bool is_legal(const Instance& inst, const NetworkState& state, int k, EngineerAction action) {
    return illegal_reason(inst, state, k, action).empty();
}

/// The state-dependent action set of engineer k, in ordinal order.
inline std::vector<EngineerAction> legal_actions_engineer(const Instance& inst, const NetworkState& state, int k) {
    detail::check_engineer_index(inst, state, k);
    const auto& e = state.engineers[k];
    if (!e.available()) return {EngineerAction::travel_to(e.location)};
    std::vector<EngineerAction> out;
    out.reserve(inst.machines.size() + 1);
    for (int m = 0; m < inst.machine_count(); ++m) out.push_back(EngineerAction::travel_to(m));
    if (!detail::other_maintains_at(state, k, e.location)) out.push_back(EngineerAction::maintain());
    return out;
}

/// Applies the deterministic consequences of one engineer's action in place.
/// Does not check legality.
inline void apply_engineer_action_unchecked(const Instance& inst, NetworkState& s, int k, EngineerAction action) {
    auto& e = s.engineers[k];
    if (action.is_travel()) {
        if (action.target() == e.location) {
            if (e.remaining == 0) e.remaining = 1;
            return;
        }
        // Zero off-diagonal travel times still occupy one epoch.
        e.remaining = std::max(1, inst.travel_time(e.location, action.target()));
        e.location = action.target();
        e.maintaining = false;
        return;
    }
    const auto& mc = inst.machines[e.location];
    int& level = s.levels[e.location];
    e.remaining = level == mc.failed_level() ? mc.repair_cm : mc.repair_pm;
    e.maintaining = true;
    level = mc.failed_level();
}

inline void apply_engineer_action_inplace(const Instance& inst, NetworkState& s, int k, EngineerAction action) {
    detail::check_engineer_index(inst, s, k);
    if (auto why = illegal_reason(inst, s, k, action); !why.empty())
        throw IllegalActionError("engineer " + std::to_string(k + 1) + " action " + action.to_string() + ": " + why);
    apply_engineer_action_unchecked(inst, s, k, action);
}

inline NetworkState apply_engineer_action(const Instance& inst, const NetworkState& state, int k, EngineerAction action) {
    NetworkState next = state;
    apply_engineer_action_inplace(inst, next, k, action);
    return next;
}

/// Applies a joint action engineer by engineer in the given order (ascending
/// index by default), checking each action against the partially updated state.
inline void apply_joint_inplace(const Instance& inst, NetworkState& s, const JointAction& a,
                                const std::vector<int>* order = nullptr) {
    if (static_cast<int>(a.size()) != inst.engineer_count())
        throw IllegalActionError("joint action: expected one action per engineer");
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int k = order ? (*order)[i] : static_cast<int>(i);
        apply_engineer_action_inplace(inst, s, k, a[k]);
    }
}

inline bool is_joint_legal(const Instance& inst, const NetworkState& s, const JointAction& a) {
    if (static_cast<int>(a.size()) != inst.engineer_count()) return false;
    NetworkState work = s;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!is_legal(inst, work, static_cast<int>(k), a[k])) return false;
        apply_engineer_action_unchecked(inst, work, static_cast<int>(k), a[k]);
    }
    return true;
}

/// Second stage of the transition, in place. Draws exactly one uniform per
/// machine per epoch so that the random stream stays aligned across
/// different actions (common random numbers).
inline void advance_time_inplace(const Instance& inst, NetworkState& s, Rng& rng) {
    const int M = inst.machine_count();
    for (int m = 0; m < M; ++m) {
        const double u = uniform01(rng);
        bool completed = false;
        for (const auto& e : s.engineers)
            if (e.location == m && e.maintaining && e.remaining == 1) completed = true;
        int& level = s.levels[m];
        if (completed) {
            level = 1;
        } else if (level < inst.machines[m].failed_level() && u < inst.machines[m].advance_prob[level - 1]) {
            ++level;
        }
    }
    for (auto& e : s.engineers) {
        e.maintaining = e.maintaining && e.remaining > 1;
        e.remaining = std::max(0, e.remaining - 1);
    }
}

inline NetworkState advance_time(const Instance& inst, const NetworkState& after_actions, Rng& rng) {
    NetworkState next = after_actions;
    advance_time_inplace(inst, next, rng);
    return next;
}

struct CostBreakdown {
    double pm = 0.0;
    double cm = 0.0;
    double downtime = 0.0;
    double travel = 0.0;

    double total() const noexcept { return pm + cm + downtime + travel; }
    CostBreakdown& operator+=(const CostBreakdown& o) noexcept {
        pm += o.pm; cm += o.cm; downtime += o.downtime; travel += o.travel;
        return *this;
    }
    CostBreakdown scaled(double f) const noexcept { return {pm * f, cm * f, downtime * f, travel * f}; }
};

/// Epoch cost of taking `a` in `h`. Maintenance type and travel charges are
/// read from h. Downtime is charged for every machine that is down after the
/// actions, so a machine being repaired pays downtime for every repair epoch.
/// A trip of length theta pays c^T once at departure and theta-1 times en route.
inline CostBreakdown stage_cost_breakdown(const Instance& inst, const NetworkState& h, const JointAction& a) {
    CostBreakdown c;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto& e = h.engineers[k];
        if (a[k].is_maintain()) {
            const auto& mc = inst.machines[e.location];
            if (h.levels[e.location] == mc.failed_level()) c.cm += mc.cost_cm;
            else c.pm += mc.cost_pm;
        } else if (a[k].target() != e.location) {
            c.travel += inst.cost_travel;
        }
        if (e.remaining > 0 && !e.maintaining) c.travel += inst.cost_travel;
    }
    for (int m = 0; m < inst.machine_count(); ++m) {
        bool down = h.levels[m] == inst.machines[m].failed_level();
        if (!down)
            for (std::size_t k = 0; k < a.size(); ++k)
                if (a[k].is_maintain() && h.engineers[k].location == m) down = true;
        if (down) c.downtime += inst.machines[m].cost_downtime;
    }
    return c;
}

inline double stage_cost(const Instance& inst, const NetworkState& h, const JointAction& a) {
    return stage_cost_breakdown(inst, h, a).total();
}

struct StepResult {
    NetworkState state;
    double cost = 0.0;
};

/// Full transition h -> h'. Rejects illegal joint actions.
inline StepResult step(const Instance& inst, const NetworkState& h, const JointAction& a, Rng& rng) {
    StepResult r;
    r.state = h;
    apply_joint_inplace(inst, r.state, a);
    r.cost = stage_cost(inst, h, a);
    advance_time_inplace(inst, r.state, rng);
    return r;
}

} // namespace kdtmpa
