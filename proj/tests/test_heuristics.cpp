#include "test_util.hpp"

#include "kdtmpa/decomposition.hpp"
#include "kdtmpa/dispatch.hpp"
#include "kdtmpa/kmeans.hpp"

#include <gtest/gtest.h>

#include <map>
#include <numeric>

using namespace kdtmpa;
using namespace kdtmpa::testing;

namespace {

double brute_force_assignment(const std::vector<double>& c, std::size_t n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += c[i * n + static_cast<std::size_t>(p[i])];
        best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

NetworkState with_failed(const Instance& inst, std::initializer_list<int> machines) {
    auto s = initial_state(inst);
    for (int m : machines) s.levels[m] = inst.machines[m].failed_level();
    return s;
}

} // namespace

TEST(RankAssets, HealthyNetworkHasEmptyRanking) {
    const auto inst = shipped("M4K1-Q2Q3C2");
    EXPECT_TRUE(rank_assets(inst, initial_state(inst), ThresholdConfig::reactive(inst)).empty());
}

TEST(RankAssets, ReactiveRankingOnTwoStateMachinesIsTheFailedSet) {
    const auto inst = shipped("M8K3-Qt1C1");
    const auto s = with_failed(inst, {6, 1, 4});
    EXPECT_EQ(rank_assets(inst, s, ThresholdConfig::reactive(inst)), (std::vector<int>{1, 4, 6}));
}

TEST(RankAssets, GreedyThresholdIncludesLevelTwo) {
    const auto inst = shipped("M8K3-Qt2C3");
    auto s = initial_state(inst);
    s.levels[5] = 2;
    s.levels[1] = 3;
    EXPECT_EQ(rank_assets(inst, s, ThresholdConfig::constant(inst, 2)), (std::vector<int>{1, 5}));
    EXPECT_EQ(rank_assets(inst, s, ThresholdConfig::reactive(inst)), (std::vector<int>{1}));
}

TEST(RankAssets, ExcludesMachinesUnderRepairOrAlreadyTargeted) {
    const auto inst = shipped("M8K3-Qt1C1");
    auto s = with_failed(inst, {0, 5, 7});
    s.engineers[0] = {0, true, 3};  // repairing AMC
    s.engineers[1] = {5, false, 6}; // en route to Groningen
    EXPECT_EQ(rank_assets(inst, s, ThresholdConfig::reactive(inst)), (std::vector<int>{7}));
}

TEST(RankAssets, ConstantThresholdOutsideRangeIsRejected) {
    const auto inst = shipped("M8K3-Qt1C1");
    EXPECT_THROW(ThresholdConfig::constant(inst, 3), ValidationError);
    EXPECT_THROW(ThresholdConfig::constant(inst, 0), ValidationError);
}

TEST(ReduceRanking, ShortRankingIsUnchanged) {
    const auto inst = shipped("M8K3-Qt1C1");
    Rng rng(1);
    EXPECT_EQ(reduce_ranking(inst, {2, 5}, {0, 3, 4}, rng), (std::vector<int>{2, 5}));
    EXPECT_TRUE(reduce_ranking(inst, {2, 5}, {}, rng).empty());
}

TEST(ReduceRanking, DropsTheFarthestAssetFirst) {
    // Engineer at AMC; Rotterdam is 4 away, Groningen 10.
    const auto inst = shipped("M8K3-Qt1C1");
    ASSERT_EQ(inst.travel_time(0, 3), 4);
    ASSERT_EQ(inst.travel_time(0, 5), 10);
    Rng rng(1);
    EXPECT_EQ(reduce_ranking(inst, {0, 3, 5}, {0, 0}, rng), (std::vector<int>{0, 3}));
    EXPECT_EQ(reduce_ranking(inst, {0, 3, 5}, {0}, rng), (std::vector<int>{0}));
}

TEST(ReduceRanking, EquidistantTiesAreRemovedUniformly) {
    const auto inst = shipped("M4K1-Q2Q3C2");
    Rng rng(2024);
    std::map<int, int> kept;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto r = reduce_ranking(inst, {1, 2, 3}, {0, 0}, rng);
        ASSERT_EQ(r.size(), 2u);
        for (int m : {1, 2, 3})
            if (std::find(r.begin(), r.end(), m) == r.end()) ++kept[m];
    }
    double chi2 = 0.0;
    for (int m : {1, 2, 3}) chi2 += std::pow(kept[m] - n / 3.0, 2) / (n / 3.0);
    EXPECT_LT(chi2, 13.82); // 2 dof, p = 0.001
    const auto outcomes = reduce_ranking_outcomes(inst, {1, 2, 3}, {0, 0});
    ASSERT_EQ(outcomes.size(), 3u);
    for (const auto& o : outcomes) EXPECT_NEAR(o.second, 1.0 / 3.0, 1e-12);
}

TEST(Hungarian, WorkedExample) {
    const auto a = hungarian(std::vector<std::vector<double>>{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}});
    EXPECT_DOUBLE_EQ(a.total_cost, 5.0);
    EXPECT_EQ(a.column_of_row, (std::vector<int>{1, 0, 2}));
}

TEST(Hungarian, ZeroDiagonalGivesIdentity) {
    const auto a = hungarian(std::vector<std::vector<double>>{{0, 3, 4}, {2, 0, 7}, {1, 5, 0}});
    EXPECT_DOUBLE_EQ(a.total_cost, 0.0);
    EXPECT_EQ(a.column_of_row, (std::vector<int>{0, 1, 2}));
}

TEST(Hungarian, MatchesBruteForce) {
    Rng rng(77);
    for (std::size_t n = 1; n <= 6; ++n)
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> c(n * n);
            for (auto& x : c) x = trial % 2 ? std::floor(uniform01(rng) * 5) : uniform01(rng) * 100;
            const auto a = hungarian(c, n);
            std::vector<int> seen(n, 0);
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                ++seen[static_cast<std::size_t>(a.column_of_row[i])];
                s += c[i * n + static_cast<std::size_t>(a.column_of_row[i])];
            }
            EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
            EXPECT_NEAR(a.total_cost, s, 1e-9);
            ASSERT_NEAR(a.total_cost, brute_force_assignment(c, n), 1e-9) << "n=" << n;
        }
}

TEST(Hungarian, RejectsBadInput) {
    EXPECT_THROW(hungarian(std::vector<double>{1, 2, 3}, 2), ValidationError);
    EXPECT_THROW(hungarian(std::vector<double>{1, -2, 3, 4}, 2), ValidationError);
}

TEST(Dispatch, IdlesWhenNothingIsRanked) {
    const auto inst = shipped("M8K3-Qt1C1");
    Rng rng(1);
    const auto s = initial_state(inst);
    EXPECT_EQ(dispatch_decide(inst, s, ThresholdConfig::reactive(inst), rng), IdlePolicy().choose(inst, s, rng));
}

TEST(Dispatch, SendsTheOnlyEngineerToTheFailedMachine) {
    const auto inst = shipped("M4K1-Q2Q3C2");
    Rng rng(1);
    const auto a = dispatch_decide(inst, with_failed(inst, {2}), ThresholdConfig::reactive(inst), rng);
    EXPECT_EQ(a, (JointAction{EngineerAction::travel_to(2)}));
}

TEST(Dispatch, MaintainsImmediatelyWhenCoLocated) {
    const auto inst = shipped("M8K3-Qt1C1");
    Rng rng(1);
    const auto a = dispatch_decide(inst, with_failed(inst, {2, 3}), ThresholdConfig::reactive(inst), rng);
    // Engineers sit at AMC (0), Maastricht (2) and Rotterdam (3).
    EXPECT_TRUE(a[1].is_maintain());
    EXPECT_TRUE(a[2].is_maintain());
    EXPECT_EQ(a[0], EngineerAction::travel_to(0));
}

TEST(Dispatch, AssignmentMinimizesTotalTravel) {
    const auto inst = shipped("M8K3-Qt1C1");
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        NetworkState s = initial_state(inst);
        for (auto& e : s.engineers) e.location = static_cast<int>(uniform_index(rng, 8));
        for (auto& x : s.levels) x = uniform01(rng) < 0.4 ? 2 : 1;
        for (auto& e : s.engineers)
            if (s.levels[e.location] == 2 && uniform01(rng) < 0.3) {
                bool taken = false;
                for (const auto& o : s.engineers) taken |= &o != &e && o.location == e.location && o.maintaining;
                if (!taken) e = {e.location, true, 2};
            }
        const auto thresholds = ThresholdConfig::reactive(inst);
        const auto available = available_engineers(s);
        std::vector<int> locs;
        for (int k : available) locs.push_back(s.engineers[k].location);
        Rng r1(trial), r2(trial);
        const auto jobs = reduce_ranking(inst, rank_assets(inst, s, thresholds), locs, r1);
        const auto a = dispatch_decide(inst, s, thresholds, r2);
        ASSERT_TRUE(is_joint_legal(inst, s, a));
        double travel = 0.0;
        std::vector<int> covered;
        for (int k : available) {
            if (a[k] == EngineerAction::travel_to(s.engineers[k].location)) continue; // idle
            const int dest = a[k].is_maintain() ? s.engineers[k].location : a[k].target();
            if (std::find(jobs.begin(), jobs.end(), dest) != jobs.end()) {
                travel += inst.travel_time(s.engineers[k].location, dest);
                covered.push_back(dest);
            }
        }
        std::sort(covered.begin(), covered.end());
        auto sorted_jobs = jobs;
        std::sort(sorted_jobs.begin(), sorted_jobs.end());
        ASSERT_EQ(covered, sorted_jobs);
        const std::size_t n = available.size();
        std::vector<double> c(n * n, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < jobs.size(); ++j) c[r * n + j] = inst.travel_time(locs[r], jobs[j]);
        EXPECT_NEAR(travel, brute_force_assignment(c, n), 1e-12);
    }
}

TEST(Dispatch, DistributionMatchesSampling) {
    const auto inst = shipped("M4K1-Q2Q3C2");
    const DispatchPolicy pol(ThresholdConfig::constant(inst, 4), "4");
    const auto s = with_failed(inst, {1, 3});
    const auto dist = pol.distribution(inst, s);
    ASSERT_EQ(dist.size(), 2u);
    Rng rng(3);
    std::map<int, int> freq;
    const int n = 20000;
    for (int i = 0; i < n; ++i) ++freq[pol.choose(inst, s, rng)[0].target()];
    for (const auto& w : dist) EXPECT_NEAR(freq[w.action[0].target()] / double(n), w.probability, 0.015);
}

TEST(RandomPolicy, UniformOverFiveActions) {
    const auto inst = shipped("M4K1-Q2Q3C2");
    const RandomPolicy pol;
    Rng rng(99);
    std::map<int, int> freq;
    const int n = 10000;
    const auto s = initial_state(inst);
    for (int i = 0; i < n; ++i) ++freq[pol.choose(inst, s, rng)[0].ordinal(4)];
    ASSERT_EQ(freq.size(), 5u);
    for (const auto& [ord, c] : freq) EXPECT_NEAR(c / double(n), 0.2, 0.02) << ord;
    const auto dist = pol.distribution(inst, s);
    EXPECT_EQ(dist.size(), 5u);
}

TEST(RandomPolicy, NeverDoubleMaintains) {
    const auto inst = make_instance(2, {0, 0, 0}, {0.5});
    const RandomPolicy pol;
    Rng rng(4);
    for (int i = 0; i < 5000; ++i) ASSERT_TRUE(is_joint_legal(inst, initial_state(inst), pol.choose(inst, initial_state(inst), rng)));
}

TEST(IdlePolicy, EveryEngineerStays) {
    const auto inst = shipped("M8K3-Qt1C1");
    Rng rng(1);
    const auto a = IdlePolicy().choose(inst, with_failed(inst, {1}), rng);
    EXPECT_EQ(a, (JointAction{EngineerAction::travel_to(0), EngineerAction::travel_to(2), EngineerAction::travel_to(3)}));
}

TEST(Decomposition, SingleClusterMatchesSubPolicy) {
    const auto inst = shipped("M4K1-Q2Q3C2");
    auto sub = std::make_shared<DispatchPolicy>(ThresholdConfig::constant(inst, 3), "3");
    const DecompositionPolicy dec(inst, {{0, 1, 2, 3}}, {sub});
    Rng rng(8), r1(1), r2(1);
    NetworkState s = initial_state(inst);
    for (int t = 0; t < 2000; ++t) {
        const auto a = dec.choose(inst, s, r1);
        ASSERT_EQ(a, sub->choose(inst, s, r2));
        s = step(inst, s, a, rng).state;
    }
}

TEST(Decomposition, ShippedClustersFollowTheHospitalMap) {
    const auto inst = shipped("M8K3-Qt1C1");
    ASSERT_TRUE(inst.clusters.has_value());
    // First engineer: both Amsterdam hospitals and Leiden.
    EXPECT_EQ((*inst.clusters)[0], (std::vector<int>{0, 1, 4}));
    EXPECT_EQ(inst.location_names[4], "Leiden");
}

TEST(Decomposition, EngineersStayInTheirClusters) {
    for (const auto& name : {"M8K3-Qt1C1", "M8K3-Qt2C3"}) {
        const auto inst = shipped(name);
        const auto& clusters = *inst.clusters;
        std::vector<PolicyPtr> subs;
        for (std::size_t k = 0; k < clusters.size(); ++k) subs.push_back(std::make_shared<RandomPolicy>());
        const DecompositionPolicy dec(inst, clusters, subs);
        Rng env(1), pol(2);
        NetworkState s = initial_state(inst);
        for (int t = 0; t < 20000; ++t) {
            const auto a = dec.choose(inst, s, pol);
            for (std::size_t k = 0; k < a.size(); ++k) {
                const int dest = a[k].is_maintain() ? s.engineers[k].location : a[k].target();
                ASSERT_NE(std::find(clusters[k].begin(), clusters[k].end(), dest), clusters[k].end());
            }
            s = step(inst, s, a, env).state;
        }
    }
}

TEST(Decomposition, RejectsNonPartition) {
    const auto inst = shipped("M8K3-Qt1C1");
    std::vector<PolicyPtr> subs(3, std::make_shared<IdlePolicy>());
    EXPECT_THROW(DecompositionPolicy(inst, {{0, 1}, {2, 3}, {3, 4, 5, 6, 7}}, subs), ValidationError);
    EXPECT_THROW(DecompositionPolicy(inst, {{0, 1, 4}, {2, 6}, {3, 5}}, subs), ValidationError);
}

TEST(KMeans, OneClusterPerPoint) {
    const auto inst = shipped("M8K3-Qt1C1");
    Rng rng(1);
    const auto r = kmeans_clusters(*inst.coords, 8, rng);
    for (const auto& c : r.clusters) EXPECT_EQ(c.size(), 1u);
}

TEST(KMeans, RecoversSeparatedGroups) {
    std::vector<Point2> pts;
    Rng rng(3);
    for (int i = 0; i < 20; ++i) pts.push_back({uniform01(rng), uniform01(rng)});
    for (int i = 0; i < 15; ++i) pts.push_back({100 + uniform01(rng), 50 + uniform01(rng)});
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng r(seed);
        const auto res = kmeans_clusters(pts, 2, r);
        for (int i = 1; i < 35; ++i) EXPECT_EQ(res.label[i] == res.label[0], i < 20);
    }
}

TEST(KMeans, WcssIsNonIncreasingAndSeedDeterministic) {
    const auto inst = shipped("M35K5-Qt3C1");
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng a(seed), b(seed);
        const auto r = kmeans_clusters(*inst.coords, 5, a);
        EXPECT_EQ(r.clusters, kmeans_clusters(*inst.coords, 5, b).clusters);
        for (std::size_t i = 1; i < r.wcss_history.size(); ++i)
            EXPECT_LE(r.wcss_history[i], r.wcss_history[i - 1] + 1e-9);
        for (const auto& c : r.clusters) EXPECT_FALSE(c.empty());
    }
}

TEST(KMeans, PinnedPointsStayInTheirClusters) {
    const auto inst = shipped("M35K5-Qt3C1");
    Rng rng(1);
    const auto r = kmeans_clusters(*inst.coords, 5, rng, inst.initial_locations);
    for (int k = 0; k < 5; ++k) EXPECT_EQ(r.label[inst.initial_locations[k]], k);
}
