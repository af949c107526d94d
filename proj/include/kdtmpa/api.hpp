#pragma once

// Approximate policy iteration: collect rollout-improved actions under the
// current policy, fit a classifier to them, and use the classifier as the
// next base policy.

#include "kdtmpa/evaluation.hpp"
#include "kdtmpa/network_policy.hpp"
#include "kdtmpa/rollout.hpp"

#include <functional>
#include <optional>

namespace kdtmpa {

struct ApiConfig {
    int generations = 1;
    std::uint64_t seed = 1;
    CollectConfig collect;   ///< seed is overridden per generation
    TrainConfig train;
    FeatureDesign design = FeatureDesign::F1;
    EvaluationConfig eval;   ///< reps = 0 skips evaluation; seed overridden per generation
};

struct GenerationResult {
    int generation = 0;
    std::shared_ptr<const TrainedNetwork> network;
    std::size_t samples = 0;
    CollectStats collect;
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    int epochs = 0;
    double train_s = 0.0;
    std::optional<EvaluationReport> evaluation;
};

/// Per-generation streams: collection (g, 0), training (g, 1), evaluation (g, 2).
inline std::uint64_t generation_seed(std::uint64_t master, int g, int purpose) {
    return derive_seed(master, static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(purpose));
}

inline GenerationResult train_generation(const Instance& inst, const Dataset& ds, const ApiConfig& cfg, int g) {
    GenerationResult res;
    res.generation = g;
    res.samples = ds.size();
    const auto start = std::chrono::steady_clock::now();
    const Eigen::MatrixXd X = dataset_features(ds, cfg.design);
    std::vector<int> y(ds.action.begin(), ds.action.end());
    Rng rng(generation_seed(cfg.seed, g, 1));
    auto tr = train_classifier(X, y, inst.machine_count() + 1, cfg.train, rng);
    auto tn = std::make_shared<TrainedNetwork>();
    tn->net = std::move(tr.net);
    tn->design = cfg.design;
    tn->M = ds.M;
    tn->K = ds.K;
    tn->instance_hash = ds.instance_hash;
    tn->generation = static_cast<std::uint32_t>(g);
    res.network = std::move(tn);
    res.test_accuracy = tr.test_accuracy;
    res.test_loss = tr.best_test_loss;
    res.epochs = tr.epochs;
    res.train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

/// Runs cfg.generations rounds starting from `initial`. `on_generation`, if
/// set, sees each result as soon as it is available.
inline std::vector<GenerationResult> api_iterate(const Instance& inst, std::uint64_t instance_hash, PolicyPtr initial,
                                                 const ApiConfig& cfg,
                                                 const std::function<void(const GenerationResult&)>& on_generation = {}) {
    if (cfg.generations < 1) throw ValidationError("api: generations must be at least 1");
    std::vector<GenerationResult> out;
    PolicyPtr base = std::move(initial);
    for (int g = 1; g <= cfg.generations; ++g) {
        CollectConfig cc = cfg.collect;
        cc.seed = generation_seed(cfg.seed, g, 0);
        CollectStats stats;
        const Dataset ds = collect_dataset(inst, *base, instance_hash, cc, &stats);
        auto res = train_generation(inst, ds, cfg, g);
        res.collect = stats;
        auto policy = std::make_shared<NetworkPolicy>(res.network, "gen" + std::to_string(g));
        if (cfg.eval.reps > 0) {
            EvaluationConfig ec = cfg.eval;
            ec.seed = generation_seed(cfg.seed, g, 2);
            res.evaluation = evaluate_policy(inst, *policy, ec);
        }
        if (on_generation) on_generation(res);
        out.push_back(std::move(res));
        base = std::move(policy);
    }
    return out;
}

} // namespace kdtmpa
