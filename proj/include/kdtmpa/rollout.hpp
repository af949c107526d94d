#pragma once

// Rollout-based policy improvement and teacher dataset collection.
//
// A rollout from a decision point (h, prefix, k, candidate) applies the
// prefix and the candidate, lets the base policy fill in the remaining
// engineers, charges the epoch cost on h with that joint action and then
// follows the base policy for T ~ Geo(1-gamma) further epochs. The
// undiscounted sum of those T+1 stage costs is unbiased for q.

#include "kdtmpa/features.hpp"
#include "kdtmpa/policy.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace kdtmpa {

struct RolloutBudget {
    long r_min = 1500;
    long r_max = 7500;
    double k_race = 2.0;
    double epsilon = 0.02;

    void validate() const {
        if (r_min < 1 || r_max < r_min) throw ValidationError("budget: need 1 <= r_min <= r_max");
        if (!(k_race > 0.0)) throw ValidationError("budget: k_race must be positive");
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("budget: epsilon must lie in [0, 1]");
    }
};

namespace detail {
/// Seeds of rollout j: environment and base-policy streams plus the horizon.
struct RolloutSeeds {
    std::uint64_t env, policy;
    long horizon;
};

inline RolloutSeeds rollout_seeds(std::uint64_t seed, double gamma) {
    Rng hr(derive_seed(seed, 2));
    return {derive_seed(seed, 0), derive_seed(seed, 1), sample_horizon(gamma, hr)};
}

inline void check_decision_point(const Instance& inst, const NetworkState& h, const JointAction& prefix, int k,
                                 NetworkState& work) {
    if (k < 0 || k >= inst.engineer_count()) throw ValidationError("rollout: engineer index out of range");
    if (static_cast<int>(prefix.size()) < k) throw ValidationError("rollout: prefix shorter than k");
    work = h;
    for (int j = 0; j < k; ++j) apply_engineer_action_inplace(inst, work, j, prefix[j]);
}

/// Rollout on the intermediate state `mid` (h with engineers < k applied).
inline double rollout_unchecked(const Instance& inst, const NetworkState& h, const NetworkState& mid,
                                const JointAction& prefix, int k, EngineerAction candidate, const Policy& base,
                                std::uint64_t seed) {
    thread_local NetworkState state;
    thread_local JointAction joint, fill;
    const auto seeds = rollout_seeds(seed, inst.gamma);
    Rng env(seeds.env), pol(seeds.policy);
    const int K = inst.engineer_count();
    state = mid;
    joint.assign(prefix.begin(), prefix.begin() + k);
    joint.push_back(candidate);
    apply_engineer_action_unchecked(inst, state, k, candidate);
    if (k + 1 < K) {
        base.decide(inst, state, pol, fill);
        for (int j = k + 1; j < K; ++j) {
            joint.push_back(fill[j]);
            apply_engineer_action_unchecked(inst, state, j, fill[j]);
        }
    }
    double total = stage_cost(inst, h, joint);
    advance_time_inplace(inst, state, env);
    for (long t = 1; t <= seeds.horizon; ++t) {
        base.decide(inst, state, pol, joint);
        total += stage_cost(inst, state, joint);
        for (int j = 0; j < K; ++j) apply_engineer_action_unchecked(inst, state, j, joint[j]);
        advance_time_inplace(inst, state, env);
    }
    return total;
}
} // namespace detail

/// One rollout cost; `seed` fixes the environment, base-policy and horizon
/// streams.
inline double rollout_cost(const Instance& inst, const NetworkState& h, const JointAction& prefix, int k,
                           EngineerAction candidate, const Policy& base, std::uint64_t seed) {
    NetworkState mid;
    detail::check_decision_point(inst, h, prefix, k, mid);
    if (auto why = illegal_reason(inst, mid, k, candidate); !why.empty())
        throw IllegalActionError("rollout candidate " + candidate.to_string() + ": " + why);
    return detail::rollout_unchecked(inst, h, mid, prefix, k, candidate, base, seed);
}

/// Running mean and variance (Welford).
struct RunningStat {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double sd() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
    double stderr_() const { return n > 0 ? sd() / std::sqrt(static_cast<double>(n)) : 0.0; }
};

struct QEstimate {
    double mean = 0.0;
    double sd = 0.0;
    long r = 0;
};

/// Rollout j uses seed derive_seed(block_seed, j) for every candidate at the
/// same decision point (common random numbers).
inline std::uint64_t rollout_seed(std::uint64_t block_seed, long j) {
    return derive_seed(block_seed, static_cast<std::uint64_t>(j));
}

inline QEstimate estimate_q(const Instance& inst, const NetworkState& h, const JointAction& prefix, int k,
                            EngineerAction candidate, const Policy& base, long r, std::uint64_t block_seed) {
    if (r < 1) throw ValidationError("estimate_q: r must be at least 1");
    NetworkState mid;
    detail::check_decision_point(inst, h, prefix, k, mid);
    if (auto why = illegal_reason(inst, mid, k, candidate); !why.empty())
        throw IllegalActionError("rollout candidate " + candidate.to_string() + ": " + why);
    RunningStat st;
    for (long j = 0; j < r; ++j)
        st.add(detail::rollout_unchecked(inst, h, mid, prefix, k, candidate, base, rollout_seed(block_seed, j)));
    return {st.mean, st.sd(), r};
}

struct ImprovedAction {
    EngineerAction action;
    long rollouts = 0; ///< total over all candidates
    std::vector<EngineerAction> candidates;
    std::vector<RunningStat> stats;
};

/// Racing successive elimination over the legal actions of engineer k.
/// Surviving candidates receive rounds of r_min rollouts (the last round is
/// cut to reach r_max). After each round a candidate is dropped when its
/// lower bound mean - k sd/sqrt(n) exceeds the upper bound of the current
/// best. Returns the lowest mean among survivors, ties to the lowest ordinal.
inline ImprovedAction improved_action(const Instance& inst, const NetworkState& h, const JointAction& prefix, int k,
                                      const Policy& base, const RolloutBudget& budget, std::uint64_t block_seed) {
    NetworkState mid;
    detail::check_decision_point(inst, h, prefix, k, mid);
    ImprovedAction res;
    res.candidates = legal_actions_engineer(inst, mid, k);
    res.stats.resize(res.candidates.size());
    if (res.candidates.size() == 1) {
        res.action = res.candidates.front();
        return res;
    }
    std::vector<std::size_t> alive(res.candidates.size());
    std::iota(alive.begin(), alive.end(), 0);
    long n = 0;
    while (alive.size() > 1 && n < budget.r_max) {
        const long next = std::min(budget.r_max, n + budget.r_min);
        for (std::size_t c : alive)
            for (long j = n; j < next; ++j)
                res.stats[c].add(detail::rollout_unchecked(inst, h, mid, prefix, k, res.candidates[c], base,
                                                           rollout_seed(block_seed, j)));
        res.rollouts += (next - n) * static_cast<long>(alive.size());
        n = next;
        std::size_t best = alive.front();
        for (std::size_t c : alive)
            if (res.stats[c].mean < res.stats[best].mean) best = c;
        const double bound = res.stats[best].mean + budget.k_race * res.stats[best].stderr_();
        std::erase_if(alive, [&](std::size_t c) {
            return c != best && res.stats[c].mean - budget.k_race * res.stats[c].stderr_() > bound;
        });
    }
    std::size_t best = alive.front();
    for (std::size_t c : alive)
        if (res.stats[c].mean < res.stats[best].mean) best = c;
    res.action = res.candidates[best];
    return res;
}

/// Teacher samples. States are stored in the compact f3 layout (levels,
/// engineer blocks, 1-based acting engineer), which any feature design can
/// be recomputed from.
struct Dataset {
    std::uint64_t instance_hash = 0;
    int M = 0;
    int K = 0;
    nlohmann::json meta = nlohmann::json::object();
    std::vector<float> X;
    std::vector<std::uint16_t> action;
    std::vector<std::uint8_t> engineer;

    std::size_t dim() const { return feature_dimension(FeatureDesign::F3, M, K); }
    std::size_t size() const { return action.size(); }

    void add(const NetworkState& s, int k, EngineerAction a) {
        const std::size_t d = dim();
        X.resize(X.size() + d);
        featurize(FeatureDesign::F3, s, k, X.data() + X.size() - d);
        action.push_back(static_cast<std::uint16_t>(a.ordinal(M)));
        engineer.push_back(static_cast<std::uint8_t>(k));
    }

    std::pair<NetworkState, int> state(std::size_t i) const { return state_from_f3(X.data() + i * dim(), M, K); }

    void append(const Dataset& o) {
        X.insert(X.end(), o.X.begin(), o.X.end());
        action.insert(action.end(), o.action.begin(), o.action.end());
        engineer.insert(engineer.end(), o.engineer.begin(), o.engineer.end());
    }

    bool operator==(const Dataset&) const = default;
};

/// Features of every sample under `design`, one sample per column.
inline Eigen::MatrixXd dataset_features(const Dataset& ds, FeatureDesign design) {
    const std::size_t d = feature_dimension(design, ds.M, ds.K);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto [s, k] = ds.state(i);
        featurize(design, s, k, out.col(static_cast<Eigen::Index>(i)).data());
    }
    return out;
}

namespace detail {
inline constexpr char dataset_magic[8] = {'K', 'D', 'T', 'M', 'P', 'A', 'D', 'S'};
inline constexpr std::uint32_t dataset_version = 1;

template <class T>
void put_raw(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get_raw(std::istream& is, const std::string& what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ValidationError(what + ": truncated file");
    return v;
}
} // namespace detail

/// "KDTMPADS" | u32 version | u64 instance hash | u32 dim | u32 design (3)
/// | u32 M | u32 K | u64 samples | u32 metadata length | metadata JSON
/// | per sample: dim x f32, u16 action ordinal, u8 engineer index.
inline void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write dataset file " + path);
    os.write(detail::dataset_magic, 8);
    detail::put_raw<std::uint32_t>(os, detail::dataset_version);
    detail::put_raw<std::uint64_t>(os, ds.instance_hash);
    detail::put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(ds.dim()));
    detail::put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(FeatureDesign::F3));
    detail::put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(ds.M));
    detail::put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(ds.K));
    detail::put_raw<std::uint64_t>(os, ds.size());
    const std::string meta = ds.meta.dump();
    detail::put_raw<std::uint32_t>(os, static_cast<std::uint32_t>(meta.size()));
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    const std::size_t d = ds.dim();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os.write(reinterpret_cast<const char*>(ds.X.data() + i * d), static_cast<std::streamsize>(d * sizeof(float)));
        detail::put_raw(os, ds.action[i]);
        detail::put_raw(os, ds.engineer[i]);
    }
    if (!os) throw ValidationError("error writing dataset file " + path);
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open dataset file " + path);
    const std::string what = "dataset " + path;
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, detail::dataset_magic, 8) != 0)
        throw ValidationError(what + ": not a dataset file");
    if (detail::get_raw<std::uint32_t>(is, what) != detail::dataset_version)
        throw ValidationError(what + ": unsupported version");
    Dataset ds;
    ds.instance_hash = detail::get_raw<std::uint64_t>(is, what);
    const auto dim = detail::get_raw<std::uint32_t>(is, what);
    if (detail::get_raw<std::uint32_t>(is, what) != static_cast<std::uint32_t>(FeatureDesign::F3))
        throw ValidationError(what + ": unsupported storage layout");
    ds.M = static_cast<int>(detail::get_raw<std::uint32_t>(is, what));
    ds.K = static_cast<int>(detail::get_raw<std::uint32_t>(is, what));
    if (ds.M < 1 || ds.K < 1 || ds.K > 255 || dim != ds.dim()) throw ValidationError(what + ": inconsistent header");
    const auto n = detail::get_raw<std::uint64_t>(is, what);
    const auto len = detail::get_raw<std::uint32_t>(is, what);
    std::string meta(len, '\0');
    if (!is.read(meta.data(), len)) throw ValidationError(what + ": truncated metadata");
    try {
        ds.meta = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(what + ": bad metadata: " + e.what());
    }
    ds.X.resize(n * dim);
    ds.action.resize(n);
    ds.engineer.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!is.read(reinterpret_cast<char*>(ds.X.data() + i * dim), static_cast<std::streamsize>(dim * sizeof(float))))
            throw ValidationError(what + ": truncated samples");
        ds.action[i] = detail::get_raw<std::uint16_t>(is, what);
        ds.engineer[i] = detail::get_raw<std::uint8_t>(is, what);
        if (ds.action[i] > ds.M || ds.engineer[i] >= ds.K) throw ValidationError(what + ": sample out of range");
    }
    if (is.peek() != std::char_traits<char>::eof()) throw ValidationError(what + ": trailing bytes");
    return ds;
}

inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
    for (int m = 0; m < ds.M; ++m) os << "x" << m + 1 << ",";
    for (int k = 0; k < ds.K; ++k) os << "loc" << k + 1 << ",maint" << k + 1 << ",rem" << k + 1 << ",";
    os << "acting,action,engineer\n";
    const std::size_t d = ds.dim();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) os << ds.X[i * d + j] << ",";
        os << ds.action[i] << "," << static_cast<int>(ds.engineer[i]) + 1 << "\n";
    }
}

struct CollectConfig {
    RolloutBudget budget;
    long samples = 150000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    int streams = 16; ///< independent collection trajectories; fixes the output regardless of threads
};

struct CollectStats {
    long decisions = 0;      ///< engineer decisions with more than one legal action
    long random_decisions = 0;
    long rollouts = 0;
    long epochs = 0;
    double wallclock_s = 0.0;
};

/// Walks `streams` independent trajectories of the epsilon-randomized
/// improved policy from h(0), restarting after each geometric horizon. Each
/// stream contributes a fixed quota of samples; the streams are
/// concatenated in order. Decisions with a single legal action and the
/// epsilon-random decisions add no sample, except with epsilon = 1 where the
/// random draws are all there is and are recorded instead.
inline Dataset collect_dataset(const Instance& inst, const Policy& base, std::uint64_t instance_hash,
                               const CollectConfig& cfg, CollectStats* stats = nullptr) {
    cfg.budget.validate();
    if (cfg.samples < 1) throw ValidationError("collect: samples must be at least 1");
    if (cfg.streams < 1) throw ValidationError("collect: streams must be at least 1");
    const auto start = std::chrono::steady_clock::now();
    const int K = inst.engineer_count();
    const auto S = static_cast<std::size_t>(cfg.streams);
    std::vector<Dataset> parts(S);
    std::vector<CollectStats> part_stats(S);
    parallel_for(S, resolve_threads(cfg.threads), [&](std::size_t s) {
        const long quota = cfg.samples / cfg.streams + (static_cast<long>(s) < cfg.samples % cfg.streams ? 1 : 0);
        Dataset& ds = parts[s];
        ds.M = inst.machine_count();
        ds.K = K;
        auto& st = part_stats[s];
        Rng env(derive_seed(cfg.seed, s, 0)), act(derive_seed(cfg.seed, s, 1)), hor(derive_seed(cfg.seed, s, 2));
        const std::uint64_t decision_base = derive_seed(cfg.seed, s, 3);
        NetworkState h = initial_state(inst), work;
        JointAction joint(static_cast<std::size_t>(K));
        long T = sample_horizon(inst.gamma, hor), t = 0;
        std::uint64_t counter = 0;
        while (static_cast<long>(ds.size()) < quota) {
            work = h;
            for (int k = 0; k < K && static_cast<long>(ds.size()) < quota; ++k) {
                const auto legal = legal_actions_engineer(inst, work, k);
                EngineerAction a = legal.front();
                if (legal.size() > 1) {
                    ++st.decisions;
                    const std::uint64_t seed = derive_seed(decision_base, counter++);
                    if (uniform01(act) < cfg.budget.epsilon) {
                        a = legal[uniform_index(act, legal.size())];
                        ++st.random_decisions;
                        if (cfg.budget.epsilon >= 1.0) ds.add(work, k, a);
                    } else {
                        const auto imp = improved_action(inst, h, joint, k, base, cfg.budget, seed);
                        a = imp.action;
                        st.rollouts += imp.rollouts;
                        ds.add(work, k, a);
                    }
                }
                joint[k] = a;
                apply_engineer_action_unchecked(inst, work, k, a);
            }
            h = work;
            advance_time_inplace(inst, h, env);
            ++st.epochs;
            if (++t > T) {
                h = initial_state(inst);
                T = sample_horizon(inst.gamma, hor);
                t = 0;
            }
        }
    });
    Dataset out;
    out.instance_hash = instance_hash;
    out.M = inst.machine_count();
    out.K = K;
    CollectStats total;
    for (std::size_t s = 0; s < S; ++s) {
        out.append(parts[s]);
        total.decisions += part_stats[s].decisions;
        total.random_decisions += part_stats[s].random_decisions;
        total.rollouts += part_stats[s].rollouts;
        total.epochs += part_stats[s].epochs;
    }
    total.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.meta = {{"instance", inst.name},
                {"base_policy", base.id()},
                {"seed", cfg.seed},
                {"streams", cfg.streams},
                {"r_min", cfg.budget.r_min},
                {"r_max", cfg.budget.r_max},
                {"k_race", cfg.budget.k_race},
                {"epsilon", cfg.budget.epsilon}};
    if (stats) *stats = total;
    return out;
}

} // namespace kdtmpa
