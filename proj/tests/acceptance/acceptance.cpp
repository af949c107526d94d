// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion numbers (1..10) to run a subset.

#include "../test_util.hpp"

#include "kdtmpa/api.hpp"
#include "kdtmpa/dispatch.hpp"
#include "kdtmpa/exact.hpp"
#include "kdtmpa/policy_spec.hpp"
#include "kdtmpa/transforms.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace kdtmpa;
using namespace kdtmpa::testing;

namespace {

constexpr double kOptimalM4 = 432.440;
constexpr long kReps = 100000;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string ci(const EvaluationReport& r) { return fmt("%.3f +- %.3f", r.mean, r.halfwidth); }

EvaluationReport evaluate(const Instance& inst, const Policy& p, std::uint64_t seed, long reps = kReps) {
    EvaluationConfig cfg;
    cfg.reps = reps;
    cfg.seed = seed;
    return evaluate_policy(inst, p, cfg);
}

Outcome exact_value() {
    const auto m = enumerate_states(shipped("M4K1-Q2Q3C2"));
    const auto sol = value_iteration(m, 1e-6);
    return {std::abs(sol.objective - kOptimalM4) <= 0.01,
            fmt("J* = %.4f, target %.3f +- 0.01, %zu states", sol.objective, kOptimalM4, m.keys.size())};
}

Outcome dp_simulation() {
    const auto inst = shipped("M4K1-Q2Q3C2");
    const auto m = enumerate_states(inst);
    const auto sol = value_iteration(m, 1e-6);
    const TablePolicy opt(m, sol.policy, "vi");
    const auto r = evaluate(inst, opt, 101);
    return {r.lower() <= kOptimalM4 && kOptimalM4 <= r.upper(), fmt("simulated %s must cover %.3f", ci(r).c_str(), kOptimalM4)};
}

Outcome heuristic_benchmarks() {
    const auto inst = shipped("M4K1-Q2Q3C2");
    const auto hash = instance_hash(inst);
    struct Row {
        std::string spec;
        double mean, halfwidth; // reference half-widths are at 10^4 reps
    };
    const std::vector<Row> rows{{"dispatch:s=4", 599.654, 1.243}, {"random", 2313.600, 5.006}, {"idle", 3509.960, 7.732}};
    bool pass = true;
    std::ostringstream os;
    for (const auto& row : rows) {
        const auto r = evaluate(inst, *make_policy(row.spec, inst, hash), 102);
        const double tol = 3.0 * row.halfwidth / std::sqrt(10.0);
        const bool ok = std::abs(r.mean - row.mean) <= tol;
        pass &= ok;
        os << row.spec << " " << ci(r) << fmt(" vs %.3f (tol %.3f) %s; ", row.mean, tol, ok ? "ok" : "off");
    }
    return {pass, os.str()};
}

Outcome dispatch_benchmark() {
    const auto inst = shipped("M8K3-Qt1C1");
    const DispatchPolicy pol(ThresholdConfig::reactive(inst), "fail");
    const auto r = evaluate(inst, pol, 103);
    return {std::abs(r.mean - 27.612) <= 0.3, fmt("reactive dispatch %s, target 27.612 +- 0.3", ci(r).c_str())};
}

Outcome desk_learning() {
    const auto inst = shipped("M4K1-Q2Q3C2");
    const auto hash = instance_hash(inst);
    const auto base = std::make_shared<DispatchPolicy>(ThresholdConfig::reactive(inst), "fail");
    ApiConfig cfg;
    cfg.seed = 104;
    cfg.collect.samples = 50000;
    cfg.collect.budget.r_min = 200;
    cfg.collect.budget.r_max = 1000;
    cfg.eval.reps = 0;
    const auto gens = api_iterate(inst, hash, base, cfg);
    const auto& g = gens.front();
    const NetworkPolicy net(g.network, "gen1");
    const auto before = evaluate(inst, *base, 105);
    const auto after = evaluate(inst, net, 105);
    return {after.upper() < before.lower(),
            fmt("initial %s, network %s (collect %.0f s, test accuracy %.3f, %d epochs)", ci(before).c_str(),
                ci(after).c_str(), g.collect.wallclock_s, g.test_accuracy, g.epochs)};
}

Outcome unbiasedness() {
    auto inst = make_instance(3, {0}, {0.3, 0.4, 0.5}, {1.0, 3.0, 10.0, 0.5});
    inst.machines[1].advance_prob = {0.2, 0.6};
    const auto m = enumerate_states(inst);
    const DispatchPolicy pol(ThresholdConfig::constant(inst, 2), "2");
    const auto v = exact_policy_value(m, pol, 1e-12);
    const auto h0 = initial_state(inst);
    const double exact = v[*m.index(h0)];
    Rng rng(1);
    const auto own = pol.choose(inst, h0, rng)[0];
    const auto est = estimate_q(inst, h0, {}, 0, own, pol, kReps, 106);
    const double z = (est.mean - exact) / (est.sd / std::sqrt(static_cast<double>(kReps)));
    return {std::abs(z) <= 4.0, fmt("rollout mean %.4f, exact %.4f, z = %.2f", est.mean, exact, z)};
}

Outcome assignment_oracle() {
    Rng rng(107);
    long mismatches = 0, total = 0;
    for (std::size_t n = 2; n <= 6; ++n) {
        for (int trial = 0; trial < 1000; ++trial, ++total) {
            std::vector<double> c(n * n);
            for (auto& x : c) x = static_cast<double>(uniform_index(rng, 50));
            std::vector<int> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            double best = std::numeric_limits<double>::infinity();
            do {
                double s = 0.0;
                for (std::size_t r = 0; r < n; ++r) s += c[r * n + perm[r]];
                best = std::min(best, s);
            } while (std::next_permutation(perm.begin(), perm.end()));
            const auto asg = hungarian(c, n);
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += c[r * n + asg.column_of_row[r]];
            mismatches += s != best || asg.total_cost != best;
        }
    }
    return {mismatches == 0, fmt("%ld of %ld matrices differ from brute force", mismatches, total)};
}

Outcome gradient_check() {
    Rng rng(108);
    int failures = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Mlp net(1, {2}, 2, rng);
        for (auto& b : net.biases())
            for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 2.0 * uniform01(rng) - 1.0;
        Eigen::MatrixXd X(1, 8);
        std::vector<int> y;
        for (int i = 0; i < 8; ++i) {
            X(0, i) = 4.0 * uniform01(rng) - 2.0;
            y.push_back(static_cast<int>(uniform_index(rng, 2)));
        }
        std::vector<Eigen::MatrixXd> gW;
        std::vector<Eigen::VectorXd> gb;
        net.loss_and_gradient(X, y, gW, gb);
        std::vector<double> analytic;
        for (std::size_t l = 0; l < gW.size(); ++l) {
            analytic.insert(analytic.end(), gW[l].data(), gW[l].data() + gW[l].size());
            analytic.insert(analytic.end(), gb[l].data(), gb[l].data() + gb[l].size());
        }
        const auto p = net.parameters();
        if (p.size() != 10) return {false, fmt("network has %zu parameters, expected 10", p.size())};
        bool ok = true;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double h = 1e-6;
            auto q = p;
            q[i] = p[i] + h;
            net.set_parameters(q);
            const double up = net.loss(X, y);
            q[i] = p[i] - h;
            net.set_parameters(q);
            const double down = net.loss(X, y);
            net.set_parameters(p);
            const double numeric = (up - down) / (2 * h);
            const double rel = std::abs(numeric - analytic[i]) / std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
            worst = std::max(worst, rel);
            ok &= rel <= 1e-4;
        }
        failures += !ok;
    }
    return {failures == 0, fmt("%d of 100 trials failed, worst relative error %.2e", failures, worst)};
}

// Checks the step invariants; returns an empty string when they hold.
std::string step_violation(const Instance& inst, const NetworkState& s, const JointAction& a, const StepResult& r) {
    if (!(r.cost >= 0.0 && r.cost <= max_stage_cost(inst) + 1e-12)) return "stage cost out of range";
    try {
        validate_state(inst, r.state);
    } catch (const ValidationError& e) {
        return e.what();
    }
    NetworkState post = s;
    apply_joint_inplace(inst, post, a);
    for (int m = 0; m < inst.machine_count(); ++m) {
        bool completes = false;
        for (const auto& e : post.engineers) completes |= e.location == m && e.maintaining && e.remaining == 1;
        if (completes) {
            if (r.state.levels[m] != 1) return "completed repair did not reset machine " + std::to_string(m + 1);
            continue;
        }
        if (r.state.levels[m] < s.levels[m]) return "level decreased without repair";
        if (post.levels[m] == inst.machines[m].failed_level() && r.state.levels[m] != post.levels[m])
            return "failed machine left the failed level";
    }
    return {};
}

Outcome invariant_fuzz() {
    std::ostringstream os;
    bool pass = true;
    for (const auto& name : shipped_names()) {
        const auto inst = shipped(name);
        const int K = inst.engineer_count();
        Rng rng(derive_seed(109, std::hash<std::string>{}(name)));
        NetworkState s = initial_state(inst);
        std::string why;
        long perm_states = 0;
        for (long t = 0; t < 100000 && why.empty(); ++t) {
            const auto a = random_joint(inst, s, rng);
            if (K <= 4 && perm_states < 1000 && t % 100 == 0) {
                ++perm_states;
                std::vector<int> order(static_cast<std::size_t>(K));
                std::iota(order.begin(), order.end(), 0);
                NetworkState ref = s;
                apply_joint_inplace(inst, ref, a, &order);
                while (std::next_permutation(order.begin(), order.end()) && why.empty()) {
                    NetworkState other = s;
                    apply_joint_inplace(inst, other, a, &order);
                    if (!(other == ref)) why = "engineer order changed the post-action state";
                }
            }
            const auto r = step(inst, s, a, rng);
            if (why.empty()) why = step_violation(inst, s, a, r);
            s = r.state;
        }
        if (K <= 4 && why.empty() && perm_states < 1000) why = "too few permutation states";
        pass &= why.empty();
        os << name << (why.empty() ? " ok" : " " + why) << "; ";
    }
    return {pass, os.str()};
}

Outcome robustness() {
    const auto base_inst = shipped("M8K3-Qt1C1");
    const auto hash = instance_hash(base_inst);
    const DispatchPolicy base(ThresholdConfig::reactive(base_inst), "fail");
    CollectConfig cc;
    cc.samples = 3000;
    cc.seed = 110;
    cc.budget.r_min = 10;
    cc.budget.r_max = 40;
    const auto ds = collect_dataset(base_inst, base, hash, cc);
    ApiConfig ac;
    ac.train.max_epochs = 10;
    const auto gen = train_generation(base_inst, ds, ac, 1);
    const auto path = std::filesystem::temp_directory_path() / "kdtmpa_acceptance_net.bin";
    save_network(path.string(), *gen.network);

    std::ostringstream os;
    bool pass = true;
    for (const std::string t : {"rm-machine:5", "rm-engineer:2", "add-engineer:4"}) {
        try {
            const auto inst = apply_transform(base_inst, t);
            const auto pol = make_policy("net:" + path.string(), inst, hash);
            const auto r = evaluate(inst, *pol, 111, 1000);
            const bool ok = std::isfinite(r.mean) && r.mean >= 0.0 && r.reps == 1000;
            pass &= ok;
            os << t << " " << ci(r) << (ok ? "" : " bad") << "; ";
        } catch (const std::exception& e) {
            pass = false;
            os << t << " threw: " << e.what() << "; ";
        }
    }
    std::filesystem::remove(path);

    // The removed machine stays healthy and free unless an engineer repairs it.
    const auto inst = apply_transform(shipped("M8K3-Qt2C3"), "rm-machine:5");
    const int dummy = 4;
    auto probe = inst;
    probe.machines[dummy].cost_downtime = 1e6;
    Rng rng(112);
    NetworkState s = initial_state(inst);
    long violations = 0;
    for (long t = 0; t < 100000; ++t) {
        const auto a = random_joint(inst, s, rng);
        NetworkState post = s;
        apply_joint_inplace(inst, post, a);
        bool repairing = false;
        for (const auto& e : post.engineers) repairing |= e.location == dummy && e.maintaining;
        const auto r = step(inst, s, a, rng);
        if (!repairing) {
            violations += s.levels[dummy] != 1 || r.state.levels[dummy] != 1;
            violations += stage_cost_breakdown(probe, s, a).total() != stage_cost_breakdown(inst, s, a).total();
        }
        s = r.state;
    }
    pass &= violations == 0;
    os << "dummy machine: " << violations << " violations in 1e5 steps";
    return {pass, os.str()};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"exact optimal value on M4K1-Q2Q3C2", exact_value},
        {"simulated optimal policy covers the exact value", dp_simulation},
        {"heuristic benchmarks on M4K1-Q2Q3C2", heuristic_benchmarks},
        {"reactive dispatch on M8K3-Qt1C1", dispatch_benchmark},
        {"desk-scale learning improves on reactive dispatch", desk_learning},
        {"rollout estimator is unbiased", unbiasedness},
        {"assignment matches brute force", assignment_oracle},
        {"gradient check", gradient_check},
        {"invariant fuzz", invariant_fuzz},
        {"robustness transforms and dummy machine", robustness},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail
                  << fmt(" (%.1f s)", secs) << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
