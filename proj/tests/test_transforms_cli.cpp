#include "test_util.hpp"

#include "kdtmpa/policy_spec.hpp"
#include "kdtmpa/transforms.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

using namespace kdtmpa;
using namespace kdtmpa::testing;

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int status = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(KDTMPA_CLI_PATH) + " " + args + " 2>&1";
    RunResult r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), p)) r.output += buf.data();
    const int st = pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

fs::path scratch_dir() {
    auto d = fs::temp_directory_path() / "kdtmpa_cli_test";
    fs::create_directories(d);
    return d;
}

} // namespace

TEST(Transforms, RemoveMachineMakesADummy) {
    const auto inst = shipped("M8K3-Qt1C1");
    const auto t = apply_transform(inst, "rm-machine:3");
    EXPECT_EQ(t.machine_count(), 8);
    EXPECT_EQ(t.machines[2].degradation_name, "dummy");
    EXPECT_EQ(t.machines[2].cost_downtime, 0.0);
    EXPECT_EQ(t.machines[1], inst.machines[1]);
}

TEST(Transforms, EngineerChangesKeepMachinesAndTravel) {
    const auto inst = shipped("M8K3-Qt1C1");
    const auto fewer = apply_transform(inst, "rm-engineer:2");
    EXPECT_EQ(fewer.initial_locations, (std::vector<int>{0, 3}));
    EXPECT_FALSE(fewer.clusters.has_value());
    const auto more = apply_transform(inst, "add-engineer:6");
    EXPECT_EQ(more.engineer_count(), 4);
    EXPECT_EQ(more.initial_locations.back(), 5);
    EXPECT_EQ(more.machines, inst.machines);
    EXPECT_EQ(more.travel, inst.travel);
}

TEST(Transforms, AddThenRemoveIsIdentity) {
    for (const auto& name : shipped_names()) {
        const auto inst = shipped(name);
        const auto back = remove_engineer(add_engineer(inst, 0), inst.engineer_count());
        EXPECT_EQ(back, inst) << name;
        EXPECT_EQ(instance_hash(back), instance_hash(inst));
    }
}

TEST(Transforms, RejectsBadSpecs) {
    const auto inst = shipped("M4K1-Q2Q3C2");
    EXPECT_THROW(apply_transform(inst, "rm-machine:9"), ValidationError);
    EXPECT_THROW(apply_transform(inst, "rm-engineer:1"), ValidationError);
    EXPECT_THROW(apply_transform(inst, "teleport:1"), ValidationError);
    EXPECT_THROW(apply_transform(inst, "rm-machine:x"), ValidationError);
    EXPECT_THROW(apply_transform(inst, "rm-machine"), ValidationError);
}

TEST(Transforms, DummyMachineIsFrozenAndFree) {
    const auto inst = apply_transform(shipped("M8K3-Qt2C3"), "rm-machine:5");
    const int dummy = 4;
    // A huge downtime cost on the dummy exposes any epoch where it is down.
    auto probe = inst;
    probe.machines[dummy].cost_downtime = 1e6;
    Rng rng(3);
    NetworkState s = initial_state(inst);
    for (int t = 0; t < 20000; ++t) {
        const auto a = random_joint(inst, s, rng);
        NetworkState post = s;
        apply_joint_inplace(inst, post, a);
        bool repairing = false;
        for (const auto& e : post.engineers) repairing |= e.location == dummy && e.maintaining;
        const auto r = step(inst, s, a, rng);
        if (!repairing) {
            ASSERT_EQ(s.levels[dummy], 1);
            ASSERT_EQ(r.state.levels[dummy], 1);
            ASSERT_EQ(stage_cost(probe, s, a), stage_cost(inst, s, a));
        }
        s = r.state;
    }
}

TEST(PolicySpec, BuildsEveryKind) {
    const auto inst = shipped("M8K3-Qt1C1");
    const auto h = instance_hash(inst);
    EXPECT_EQ(make_policy("idle", inst, h)->id(), "idle");
    EXPECT_EQ(make_policy("random", inst, h)->id(), "random");
    EXPECT_EQ(make_policy("dispatch:s=fail", inst, h)->id(), "dispatch:s=fail");
    EXPECT_EQ(make_policy("dispatch:s=1", inst, h)->id(), "dispatch:s=1");
    EXPECT_EQ(make_policy("dec:dispatch:s=fail", inst, h)->id(), "dec:dispatch:s=fail;dispatch:s=fail;dispatch:s=fail");
    EXPECT_EQ(make_policy("dec:idle;random;idle", inst, h)->id(), "dec:idle;random;idle");
}

TEST(PolicySpec, RejectsMalformedSpecs) {
    const auto inst = shipped("M8K3-Qt1C1");
    const auto h = instance_hash(inst);
    for (const char* bad : {"greedy", "dispatch:s=x", "dispatch:s=9", "dec:idle;idle", "dec:dec:idle", "net:/missing"})
        EXPECT_THROW(make_policy(bad, inst, h), ValidationError) << bad;
}

TEST(PolicySpec, ClustersFallBackToKMeans) {
    auto inst = shipped("M8K3-Qt1C1");
    inst.clusters.reset();
    const auto c = instance_clusters(inst, 1);
    ASSERT_EQ(c.size(), 3u);
    for (int k = 0; k < 3; ++k)
        EXPECT_NE(std::find(c[k].begin(), c[k].end(), inst.initial_locations[k]), c[k].end());
}

TEST(Cli, ValidatesShippedInstances) {
    for (const auto& name : shipped_names()) {
        const auto r = run_cli("validate " + instance_path(name));
        EXPECT_EQ(r.status, 0) << r.output;
    }
    const auto bad = run_cli("validate /nonexistent.json");
    EXPECT_NE(bad.status, 0);
    EXPECT_NE(bad.output.find("error:"), std::string::npos);
}

TEST(Cli, CollectTrainEvaluateAndHashMismatch) {
    const auto dir = scratch_dir();
    const auto m4 = instance_path("M4K1-Q2Q3C2");
    const auto ds = (dir / "d.bin").string(), net = (dir / "n.nn").string();
    auto r = run_cli("--threads 1 collect --instance " + m4 +
                     " --policy dispatch:s=fail --samples 200 --rmin 10 --rmax 20 --seed 3 --out " + ds);
    ASSERT_EQ(r.status, 0) << r.output;
    r = run_cli("train --dataset " + ds + " --out " + net + " --widths 8 --layers 2 --max-epochs 3");
    ASSERT_EQ(r.status, 0) << r.output;
    r = run_cli("--threads 1 evaluate --instance " + m4 + " --policy net:" + net + " --policy idle --reps 20");
    EXPECT_EQ(r.status, 0) << r.output;
    // A network for another instance is refused before anything runs.
    auto other = shipped("M4K1-Q2Q3C2");
    other.machines[0].cost_pm = 0.5;
    const auto other_path = (dir / "other.json").string();
    save_instance(other_path, other);
    r = run_cli("evaluate --instance " + other_path + " --policy net:" + net + " --reps 20");
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("different instance"), std::string::npos) << r.output;
    // Robustness runs check the network against the original instance.
    r = run_cli("--threads 1 robust --instance " + m4 + " --transform rm-machine:2 --policy net:" + net + " --reps 20");
    EXPECT_EQ(r.status, 0) << r.output;
    fs::remove_all(dir);
}

TEST(Cli, RejectsUnknownPolicy) {
    const auto r = run_cli("evaluate --instance " + instance_path("M4K1-Q2Q3C2") + " --policy greedy --reps 10");
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("unknown policy"), std::string::npos);
}
