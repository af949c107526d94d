#pragma once

// Exact dynamic programming for small instances: reachable-state enumeration,
// value iteration, policy iteration and exact evaluation of fixed policies.
//
// Values here are start-of-epoch values V(h) = E sum_t gamma^t c_t. The
// reported objective of the initial state is J = gamma * V(h(0)), matching the
// end-of-epoch cost convention used by the evaluator.

#include "kdtmpa/policy.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace kdtmpa {

/// Bijection between states of an instance and 64-bit keys (mixed radix).
class StateCodec {
public:
    explicit StateCodec(const Instance& inst) : M_(inst.machine_count()), K_(inst.engineer_count()) {
        int dmax = 1;
        for (int v : inst.travel) dmax = std::max(dmax, v);
        for (const auto& m : inst.machines) dmax = std::max({dmax, m.repair_pm, m.repair_cm});
        delta_max_ = dmax;
        for (const auto& m : inst.machines) radix_.push_back(static_cast<std::uint64_t>(m.states()));
        for (int k = 0; k < K_; ++k) {
            radix_.push_back(static_cast<std::uint64_t>(M_));
            radix_.push_back(2);
            radix_.push_back(static_cast<std::uint64_t>(dmax + 1));
        }
        log_size_ = 0.0;
        for (auto r : radix_) log_size_ += std::log(static_cast<double>(r));
    }

    int delta_max() const { return delta_max_; }

    /// Natural log of the product bound on the number of states.
    double log_bound() const { return log_size_; }

    /// Product bound; only meaningful when it fits in 64 bits.
    std::uint64_t bound() const {
        std::uint64_t n = 1;
        for (auto r : radix_) n *= r;
        return n;
    }

    std::uint64_t encode(const NetworkState& s) const {
        std::uint64_t key = 0;
        std::size_t i = radix_.size();
        auto push = [&](std::uint64_t digit) { key = key * radix_[--i] + digit; };
        for (int k = K_ - 1; k >= 0; --k) {
            const auto& e = s.engineers[k];
            push(static_cast<std::uint64_t>(e.remaining));
            push(e.maintaining ? 1 : 0);
            push(static_cast<std::uint64_t>(e.location));
        }
        for (int m = M_ - 1; m >= 0; --m) push(static_cast<std::uint64_t>(s.levels[m] - 1));
        return key;
    }

    NetworkState decode(std::uint64_t key) const {
        NetworkState s;
        s.levels.resize(M_);
        s.engineers.resize(K_);
        std::size_t i = 0;
        auto pop = [&] {
            const std::uint64_t d = key % radix_[i];
            key /= radix_[i++];
            return static_cast<int>(d);
        };
        for (int m = 0; m < M_; ++m) s.levels[m] = pop() + 1;
        for (int k = 0; k < K_; ++k) {
            s.engineers[k].location = pop();
            s.engineers[k].maintaining = pop() == 1;
            s.engineers[k].remaining = pop();
        }
        return s;
    }

private:
    int M_, K_;
    int delta_max_ = 1;
    std::vector<std::uint64_t> radix_;
    double log_size_ = 0.0;
};

/// Joint actions are coded as sum_k ordinal_k * (M+1)^k.
inline std::uint32_t encode_joint(const JointAction& a, int M) {
    std::uint32_t code = 0;
    for (std::size_t k = a.size(); k-- > 0;) code = code * static_cast<std::uint32_t>(M + 1) + static_cast<std::uint32_t>(a[k].ordinal(M));
    return code;
}

inline JointAction decode_joint(std::uint32_t code, int M, int K) {
    JointAction a(K);
    for (int k = 0; k < K; ++k) {
        a[k] = EngineerAction::from_ordinal(static_cast<int>(code % static_cast<std::uint32_t>(M + 1)), M);
        code /= static_cast<std::uint32_t>(M + 1);
    }
    return a;
}

/// Every jointly legal action of `s`, engineer 1's ordinal most significant
/// in the enumeration order, so the first minimiser is the lowest ordinal.
inline std::vector<JointAction> legal_joint_actions(const Instance& inst, const NetworkState& s) {
    const int K = inst.engineer_count();
    std::vector<JointAction> out;
    JointAction cur(K);
    auto rec = [&](auto&& self, int k, const NetworkState& work) -> void {
        if (k == K) {
            out.push_back(cur);
            return;
        }
        for (auto a : legal_actions_engineer(inst, work, k)) {
            cur[k] = a;
            NetworkState next = work;
            apply_engineer_action_unchecked(inst, next, k, a);
            self(self, k + 1, next);
        }
    };
    rec(rec, 0, s);
    return out;
}

/// Outcome distribution of advance_time from a post-decision state.
inline std::vector<std::pair<NetworkState, double>> time_outcomes(const Instance& inst, const NetworkState& post) {
    NetworkState base = post;
    std::vector<int> branching;
    for (int m = 0; m < inst.machine_count(); ++m) {
        bool completed = false;
        for (const auto& e : post.engineers)
            if (e.location == m && e.maintaining && e.remaining == 1) completed = true;
        const auto& mc = inst.machines[m];
        if (completed) {
            base.levels[m] = 1;
        } else if (post.levels[m] < mc.failed_level()) {
            const double p = mc.advance_prob[post.levels[m] - 1];
            if (p >= 1.0) ++base.levels[m];
            else if (p > 0.0) branching.push_back(m);
        }
    }
    for (auto& e : base.engineers) {
        e.maintaining = e.maintaining && e.remaining > 1;
        e.remaining = std::max(0, e.remaining - 1);
    }
    std::vector<std::pair<NetworkState, double>> out{{base, 1.0}};
    for (int m : branching) {
        const double p = inst.machines[m].advance_prob[post.levels[m] - 1];
        const std::size_t n = out.size();
        for (std::size_t i = 0; i < n; ++i) {
            auto up = out[i];
            ++up.first.levels[m];
            up.second *= p;
            out[i].second *= 1.0 - p;
            out.push_back(std::move(up));
        }
    }
    return out;
}

/// Enumerated reachable state space with its transition structure in CSR form.
struct ExactModel {
    Instance inst;
    StateCodec codec;
    std::vector<std::uint64_t> keys;           ///< state i -> key
    std::unordered_map<std::uint64_t, std::uint32_t> index_of;
    std::vector<std::uint32_t> action_begin;   ///< per state, into action arrays (size S+1)
    std::vector<std::uint32_t> action_code;
    std::vector<double> action_cost;
    std::vector<std::uint32_t> outcome_begin;  ///< per action, into outcome arrays (size A+1)
    std::vector<std::uint32_t> next_state;
    std::vector<double> probability;

    explicit ExactModel(const Instance& i) : inst(i), codec(i) {}

    std::size_t state_count() const { return keys.size(); }
    std::uint32_t initial_index() const { return index_of.at(codec.encode(initial_state(inst))); }
    NetworkState state(std::size_t i) const { return codec.decode(keys[i]); }

    std::optional<std::uint32_t> index(const NetworkState& s) const {
        auto it = index_of.find(codec.encode(s));
        if (it == index_of.end()) return std::nullopt;
        return it->second;
    }
};

/// Breadth-first closure of h(0) under every legal joint action and every
/// degradation outcome. Throws if the product bound exceeds `cap` states.
inline ExactModel enumerate_states(const Instance& inst, double cap = 5e6, double max_transitions = 8e7) {
    validate(inst);
    ExactModel model(inst);
    if (model.codec.log_bound() > std::log(cap))
        throw ValidationError("instance too large for exact solution (state bound exceeds " +
                              std::to_string(static_cast<long long>(cap)) + ")");
    const int M = inst.machine_count();
    auto intern = [&](const NetworkState& s) {
        const auto key = model.codec.encode(s);
        auto [it, fresh] = model.index_of.emplace(key, static_cast<std::uint32_t>(model.keys.size()));
        if (fresh) model.keys.push_back(key);
        return it->second;
    };
    intern(initial_state(inst));
    model.action_begin.push_back(0);
    model.outcome_begin.push_back(0);
    for (std::size_t i = 0; i < model.keys.size(); ++i) {
        const NetworkState s = model.codec.decode(model.keys[i]);
        for (const auto& a : legal_joint_actions(inst, s)) {
            NetworkState post = s;
            for (int k = 0; k < inst.engineer_count(); ++k) apply_engineer_action_unchecked(inst, post, k, a[k]);
            model.action_code.push_back(encode_joint(a, M));
            model.action_cost.push_back(stage_cost(inst, s, a));
            for (const auto& [next, p] : time_outcomes(inst, post)) {
                model.next_state.push_back(intern(next));
                model.probability.push_back(p);
            }
            model.outcome_begin.push_back(static_cast<std::uint32_t>(model.next_state.size()));
            if (static_cast<double>(model.next_state.size()) > max_transitions)
                throw ValidationError("instance too large for exact solution (transition table exceeds limit)");
        }
        model.action_begin.push_back(static_cast<std::uint32_t>(model.action_code.size()));
    }
    return model;
}

namespace detail {
inline double expected_next(const ExactModel& m, std::uint32_t a, const std::vector<double>& v) {
    double e = 0.0;
    for (std::uint32_t o = m.outcome_begin[a]; o < m.outcome_begin[a + 1]; ++o) e += m.probability[o] * v[m.next_state[o]];
    return e;
}

/// Jacobi sweep over fixed chunks; fn(state, old) -> new value.
template <class Fn>
double sweep(std::size_t n, unsigned threads, const std::vector<double>& old, std::vector<double>& out, Fn&& fn) {
    constexpr std::size_t chunk = 4096;
    const std::size_t chunks = (n + chunk - 1) / chunk;
    std::vector<double> res(chunks, 0.0);
    parallel_for(chunks, threads, [&](std::size_t c) {
        double r = 0.0;
        for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
            out[i] = fn(i);
            r = std::max(r, std::abs(out[i] - old[i]));
        }
        res[c] = r;
    });
    return *std::max_element(res.begin(), res.end());
}
} // namespace detail

struct ExactSolution {
    std::vector<double> values;        ///< V per state
    std::vector<std::uint32_t> policy; ///< greedy action (global action index) per state
    int iterations = 0;
    double residual = 0.0;
    double objective = 0.0;            ///< gamma * V(h(0))
};

/// Greedy action per state with respect to v; ties go to the lowest joint ordinal.
inline std::vector<std::uint32_t> greedy_policy(const ExactModel& m, const std::vector<double>& v) {
    const double g = m.inst.gamma;
    std::vector<std::uint32_t> pol(m.state_count());
    for (std::size_t i = 0; i < m.state_count(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t a = m.action_begin[i]; a < m.action_begin[i + 1]; ++a) {
            const double q = m.action_cost[a] + g * detail::expected_next(m, a, v);
            if (a == m.action_begin[i] || q < best - 1e-12 * std::max(1.0, std::abs(best))) {
                best = q;
                pol[i] = a;
            }
        }
    }
    return pol;
}

/// Value iteration from V = 0 until the sup-norm Bellman residual is <= tol.
inline ExactSolution value_iteration(const ExactModel& m, double tol = 1e-6, unsigned threads = 0,
                                     int max_iter = 1000000) {
    threads = resolve_threads(threads);
    const double g = m.inst.gamma;
    const std::size_t n = m.state_count();
    ExactSolution sol;
    std::vector<double> v(n, 0.0), next(n, 0.0);
    for (sol.iterations = 0; sol.iterations < max_iter;) {
        sol.residual = detail::sweep(n, threads, v, next, [&](std::size_t i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::uint32_t a = m.action_begin[i]; a < m.action_begin[i + 1]; ++a)
                best = std::min(best, m.action_cost[a] + g * detail::expected_next(m, a, v));
            return best;
        });
        v.swap(next);
        ++sol.iterations;
        if (sol.residual <= tol) break;
    }
    sol.values = std::move(v);
    sol.policy = greedy_policy(m, sol.values);
    sol.objective = g * sol.values[m.initial_index()];
    return sol;
}

/// Per state, (global action index, probability) pairs.
using StochasticPolicy = std::vector<std::vector<std::pair<std::uint32_t, double>>>;

inline StochasticPolicy deterministic(const std::vector<std::uint32_t>& pol) {
    StochasticPolicy out(pol.size());
    for (std::size_t i = 0; i < pol.size(); ++i) out[i] = {{pol[i], 1.0}};
    return out;
}

/// Maps a policy's exact action distribution onto the model's action indices.
inline StochasticPolicy tabulate(const ExactModel& m, const Policy& policy) {
    const int M = m.inst.machine_count();
    StochasticPolicy out(m.state_count());
    for (std::size_t i = 0; i < m.state_count(); ++i) {
        const NetworkState s = m.state(i);
        for (const auto& w : policy.distribution(m.inst, s)) {
            const auto code = encode_joint(w.action, M);
            std::uint32_t a = m.action_begin[i];
            while (a < m.action_begin[i + 1] && m.action_code[a] != code) ++a;
            if (a == m.action_begin[i + 1])
                throw IllegalActionError("policy '" + policy.id() + "' proposes an illegal joint action");
            if (w.probability > 0.0) out[i].push_back({a, w.probability});
        }
    }
    return out;
}

/// Fixed point of the policy's Bellman operator by iteration (residual <= tol).
inline std::vector<double> exact_policy_value(const ExactModel& m, const StochasticPolicy& pol, double tol = 1e-9,
                                              unsigned threads = 0, int max_iter = 10000000) {
    threads = resolve_threads(threads);
    const double g = m.inst.gamma;
    const std::size_t n = m.state_count();
    std::vector<double> v(n, 0.0), next(n, 0.0);
    for (int it = 0; it < max_iter; ++it) {
        const double r = detail::sweep(n, threads, v, next, [&](std::size_t i) {
            double val = 0.0;
            for (const auto& [a, p] : pol[i]) val += p * (m.action_cost[a] + g * detail::expected_next(m, a, v));
            return val;
        });
        v.swap(next);
        if (r <= tol) break;
    }
    return v;
}

inline std::vector<double> exact_policy_value(const ExactModel& m, const Policy& policy, double tol = 1e-9,
                                              unsigned threads = 0) {
    return exact_policy_value(m, tabulate(m, policy), tol, threads);
}

/// Howard policy iteration with iterative evaluation, starting from the
/// greedy policy of V = 0.
inline ExactSolution policy_iteration(const ExactModel& m, double tol = 1e-6, unsigned threads = 0, int max_iter = 1000) {
    ExactSolution sol;
    sol.policy = greedy_policy(m, std::vector<double>(m.state_count(), 0.0));
    for (sol.iterations = 0; sol.iterations < max_iter; ++sol.iterations) {
        sol.values = exact_policy_value(m, deterministic(sol.policy), tol * 1e-3, threads);
        auto improved = greedy_policy(m, sol.values);
        // Keep the incumbent action unless the new one is strictly better.
        const double g = m.inst.gamma;
        bool stable = true;
        for (std::size_t i = 0; i < improved.size(); ++i) {
            if (improved[i] == sol.policy[i]) continue;
            const double qi = m.action_cost[improved[i]] + g * detail::expected_next(m, improved[i], sol.values);
            const double qo = m.action_cost[sol.policy[i]] + g * detail::expected_next(m, sol.policy[i], sol.values);
            if (qi < qo - tol) {
                sol.policy[i] = improved[i];
                stable = false;
            }
        }
        if (stable) break;
    }
    sol.objective = m.inst.gamma * sol.values[m.initial_index()];
    return sol;
}

/// Deterministic lookup-table policy (e.g. an exported optimal policy).
class TablePolicy final : public Policy {
public:
    TablePolicy(const Instance& inst, std::unordered_map<std::uint64_t, JointAction> table, std::string label)
        : codec_(inst), table_(std::move(table)), label_(std::move(label)) {}

    TablePolicy(const ExactModel& m, const std::vector<std::uint32_t>& pol, std::string label)
        : codec_(m.inst), label_(std::move(label)) {
        for (std::size_t i = 0; i < pol.size(); ++i)
            table_.emplace(m.keys[i], decode_joint(m.action_code[pol[i]], m.inst.machine_count(), m.inst.engineer_count()));
    }

    std::string id() const override { return "exact:" + label_; }
    std::size_t size() const { return table_.size(); }

    void decide(const Instance&, const NetworkState& s, Rng&, JointAction& out) const override { out = lookup(s); }

    std::vector<WeightedAction> distribution(const Instance&, const NetworkState& s) const override {
        return {{lookup(s), 1.0}};
    }

    const std::unordered_map<std::uint64_t, JointAction>& table() const { return table_; }
    const StateCodec& codec() const { return codec_; }

private:
    const JointAction& lookup(const NetworkState& s) const {
        auto it = table_.find(codec_.encode(s));
        if (it == table_.end()) throw ValidationError("policy table has no entry for the current state");
        return it->second;
    }

    StateCodec codec_;
    std::unordered_map<std::uint64_t, JointAction> table_;
    std::string label_;
};

/// Table file: '#' header lines (hash, M, K), then one CSV row per state with
/// levels, (location, maintaining, remaining) per engineer and one action
/// ordinal per engineer. Locations and ordinals are 1-based; ordinal M+1 is
/// maintenance.
inline void save_policy_table(const std::string& path, const ExactModel& m, const std::vector<std::uint32_t>& pol,
                              std::uint64_t instance_hash) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write policy table '" + path + "'");
    const int M = m.inst.machine_count(), K = m.inst.engineer_count();
    f << "# kdtmpa policy table\n# instance_hash=" << std::hex << std::setw(16) << std::setfill('0') << instance_hash
      << std::dec << "\n# M=" << M << " K=" << K << "\n";
    for (int i = 0; i < M; ++i) f << "x" << i + 1 << ",";
    for (int k = 0; k < K; ++k) f << "loc" << k + 1 << ",maint" << k + 1 << ",rem" << k + 1 << ",";
    for (int k = 0; k < K; ++k) f << "action" << k + 1 << (k + 1 < K ? "," : "\n");
    for (std::size_t i = 0; i < m.state_count(); ++i) {
        const auto s = m.state(i);
        for (int x : s.levels) f << x << ",";
        for (const auto& e : s.engineers) f << e.location + 1 << "," << (e.maintaining ? 1 : 0) << "," << e.remaining << ",";
        const auto a = decode_joint(m.action_code[pol[i]], M, K);
        for (int k = 0; k < K; ++k) f << a[k].ordinal(M) + 1 << (k + 1 < K ? "," : "\n");
    }
}

inline TablePolicy load_policy_table(const std::string& path, const Instance& inst, std::uint64_t instance_hash) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot read policy table '" + path + "'");
    const int M = inst.machine_count(), K = inst.engineer_count();
    StateCodec codec(inst);
    std::unordered_map<std::uint64_t, JointAction> table;
    std::string line;
    bool hash_seen = false, header_seen = false;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("instance_hash=");
            if (pos != std::string::npos) {
                const auto h = std::stoull(line.substr(pos + 14), nullptr, 16);
                if (h != instance_hash) throw ValidationError("policy table '" + path + "' was built for a different instance");
                hash_seen = true;
            }
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::vector<int> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) v.push_back(std::stoi(cell));
        if (static_cast<int>(v.size()) != M + 4 * K)
            throw ValidationError("policy table '" + path + "' line " + std::to_string(lineno) + ": wrong column count");
        NetworkState s;
        s.levels.assign(v.begin(), v.begin() + M);
        for (int k = 0; k < K; ++k)
            s.engineers.push_back({v[M + 3 * k] - 1, v[M + 3 * k + 1] == 1, v[M + 3 * k + 2]});
        validate_state(inst, s);
        JointAction a(K);
        for (int k = 0; k < K; ++k) {
            const int o = v[M + 3 * K + k] - 1;
            if (o < 0 || o > M) throw ValidationError("policy table '" + path + "' line " + std::to_string(lineno) + ": bad action");
            a[k] = EngineerAction::from_ordinal(o, M);
        }
        if (!is_joint_legal(inst, s, a))
            throw ValidationError("policy table '" + path + "' line " + std::to_string(lineno) + ": illegal action");
        table.emplace(codec.encode(s), a);
    }
    if (!hash_seen) throw ValidationError("policy table '" + path + "' lacks an instance hash");
    return TablePolicy(inst, std::move(table), path);
}

} // namespace kdtmpa
