#pragma once

// Monte Carlo policy evaluation with 95% confidence intervals.
//
// The objective charges the cost of epoch t at the end of the epoch,
// J = E sum_{t>=0} gamma^{t+1} c_t. Truncated mode sums that series up to a
// horizon where the remaining tail is below tol of the largest possible
// value; geometric mode uses gamma * sum_{t=0}^{T} c_t with T ~ Geo(1-gamma).

#include "kdtmpa/policy.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace kdtmpa {

enum class HorizonMode { Truncated, Geometric };

inline std::string to_string(HorizonMode m) { return m == HorizonMode::Truncated ? "truncated" : "geometric"; }

inline HorizonMode parse_horizon_mode(const std::string& s) {
    if (s == "truncated") return HorizonMode::Truncated;
    if (s == "geometric") return HorizonMode::Geometric;
    throw ValidationError("unknown horizon mode '" + s + "' (expected truncated or geometric)");
}

struct EvaluationConfig {
    long reps = 100000;
    HorizonMode mode = HorizonMode::Truncated;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    double truncation_tol = 1e-3;
};

struct EvaluationReport {
    std::string policy;
    std::string instance;
    long reps = 0;
    double mean = 0.0;
    double std = 0.0;
    double halfwidth = 0.0;
    std::uint64_t seed = 0;
    HorizonMode mode = HorizonMode::Truncated;
    long horizon = 0; ///< truncation horizon (truncated mode)
    CostBreakdown components;
    double wallclock_s = 0.0;

    double lower() const { return mean - halfwidth; }
    double upper() const { return mean + halfwidth; }
};

/// Smallest T with gamma^T c_max / (1 - gamma) <= tol.
inline long truncation_horizon(const Instance& inst, double tol = 1e-3) {
    const double cmax = max_stage_cost(inst);
    const double g = inst.gamma;
    if (cmax <= 0.0 || g <= 0.0) return 1;
    const double t = std::ceil(std::log(tol * (1.0 - g) / cmax) / std::log(g));
    return std::max(1L, static_cast<long>(t));
}

/// One repetition from h(0). Streams: 0 environment, 1 policy, 2 horizon.
inline CostBreakdown simulate_repetition(const Instance& inst, const Policy& policy, HorizonMode mode, long horizon,
                                         std::uint64_t rep_seed) {
    Rng env(derive_seed(rep_seed, 0)), pol(derive_seed(rep_seed, 1));
    Trajectory traj(inst, policy, initial_state(inst));
    CostBreakdown total;
    const double g = inst.gamma;
    if (mode == HorizonMode::Truncated) {
        double disc = g;
        for (long t = 0; t < horizon; ++t, disc *= g) total += traj.advance(env, pol).scaled(disc);
    } else {
        Rng hr(derive_seed(rep_seed, 2));
        const long T = sample_horizon(g, hr);
        for (long t = 0; t <= T; ++t) total += traj.advance(env, pol);
        total = total.scaled(g);
    }
    return total;
}

inline EvaluationReport evaluate_policy(const Instance& inst, const Policy& policy, const EvaluationConfig& cfg) {
    if (cfg.reps < 2) throw ValidationError("evaluate: at least 2 repetitions required");
    const auto start = std::chrono::steady_clock::now();
    const long horizon = truncation_horizon(inst, cfg.truncation_tol);
    std::vector<CostBreakdown> per_rep(static_cast<std::size_t>(cfg.reps));
    parallel_for(per_rep.size(), resolve_threads(cfg.threads), [&](std::size_t r) {
        per_rep[r] = simulate_repetition(inst, policy, cfg.mode, horizon, derive_seed(cfg.seed, r));
    });
    EvaluationReport rep;
    rep.policy = policy.id();
    rep.instance = inst.name;
    rep.reps = cfg.reps;
    rep.seed = cfg.seed;
    rep.mode = cfg.mode;
    rep.horizon = cfg.mode == HorizonMode::Truncated ? horizon : 0;
    // Welford in repetition order so the result does not depend on threads.
    double mean = 0.0, m2 = 0.0;
    long n = 0;
    for (const auto& c : per_rep) {
        const double x = c.total();
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
        rep.components += c;
    }
    rep.components = rep.components.scaled(1.0 / static_cast<double>(n));
    rep.mean = mean;
    rep.std = std::sqrt(m2 / static_cast<double>(n - 1));
    rep.halfwidth = 1.96 * rep.std / std::sqrt(static_cast<double>(n));
    rep.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

inline std::string report_csv_header() {
    return "policy,instance,reps,mean,halfwidth,seed,mode,pm_cost,cm_cost,dt_cost,travel_cost,wallclock_s";
}

inline std::string report_csv_row(const EvaluationReport& r) {
    auto q = [](const std::string& s) {
        if (s.find_first_of(",\"") == std::string::npos) return s;
        std::string o = "\"";
        for (char c : s) o += c == '"' ? std::string("\"\"") : std::string(1, c);
        return o + "\"";
    };
    char buf[512];
    std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f,%llu,%s,%.6f,%.6f,%.6f,%.6f,%.3f", r.reps, r.mean, r.halfwidth,
                  static_cast<unsigned long long>(r.seed), to_string(r.mode).c_str(), r.components.pm, r.components.cm,
                  r.components.downtime, r.components.travel, r.wallclock_s);
    return q(r.policy) + "," + q(r.instance) + "," + buf;
}

} // namespace kdtmpa
