// kdtmpa: command-line front end for the K-DTMPA toolkit.

#include "kdtmpa/api.hpp"
#include "kdtmpa/policy_spec.hpp"
#include "kdtmpa/transforms.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace kdtmpa;

namespace {

struct EvalOptions {
    long reps = 100000;
    std::uint64_t seed = 1;
    std::string mode = "truncated";
    double tol = 1e-3;
};

void add_eval_options(CLI::App* cmd, EvalOptions& o) {
    cmd->add_option("--reps", o.reps, "Repetitions")->check(CLI::Range(2L, 100000000L));
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--mode", o.mode, "Horizon mode")->check(CLI::IsMember({"truncated", "geometric"}));
    cmd->add_option("--tol", o.tol, "Truncation tolerance (fraction of the largest value)")->check(CLI::PositiveNumber);
}

EvaluationConfig eval_config(const EvalOptions& o, unsigned threads) {
    EvaluationConfig c;
    c.reps = o.reps;
    c.seed = o.seed;
    c.mode = parse_horizon_mode(o.mode);
    c.truncation_tol = o.tol;
    c.threads = threads;
    return c;
}

void print_report(const EvaluationReport& r) {
    std::printf("%-40s %s  J = %.3f +- %.3f  (reps %ld, %s, pm %.3f cm %.3f dt %.3f travel %.3f, %.1f s)\n",
                r.policy.c_str(), r.instance.c_str(), r.mean, r.halfwidth, r.reps, to_string(r.mode).c_str(),
                r.components.pm, r.components.cm, r.components.downtime, r.components.travel, r.wallclock_s);
}

void write_reports(const std::string& path, const std::vector<EvaluationReport>& reports) {
    if (path.empty()) return;
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write report file " + path);
    f << report_csv_header() << "\n";
    for (const auto& r : reports) f << report_csv_row(r) << "\n";
}

std::vector<int> layer_widths(int layers, const std::vector<int>& widths) {
    if (layers < 1) throw ValidationError("--layers must be at least 1");
    if (widths.empty()) throw ValidationError("--widths must name at least one width");
    if (static_cast<int>(widths.size()) == layers) return widths;
    if (widths.size() > 2) throw ValidationError("--widths: give 1, 2 or --layers values");
    // One value: all layers that wide. Two values: first layer, then the rest.
    std::vector<int> out(static_cast<std::size_t>(layers), widths.back());
    out[0] = widths.front();
    return out;
}

struct TrainOptions {
    int layers = 3;
    std::vector<int> widths{128, 64};
    int batch = 64;
    double lr = 1e-3;
    int patience = 5;
    int max_epochs = 200;
    std::string design = "f1";
};

void add_train_options(CLI::App* cmd, TrainOptions& o) {
    cmd->add_option("--layers", o.layers, "Hidden layers")->check(CLI::Range(1, 64));
    cmd->add_option("--widths", o.widths, "Hidden widths: one per layer, or first,rest")->delimiter(',');
    cmd->add_option("--batch", o.batch, "Mini-batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", o.lr, "Adam step size")->check(CLI::PositiveNumber);
    cmd->add_option("--patience", o.patience, "Early-stopping patience (epochs)")->check(CLI::PositiveNumber);
    cmd->add_option("--max-epochs", o.max_epochs, "Epoch cap")->check(CLI::PositiveNumber);
    cmd->add_option("--design", o.design, "Feature design")->check(CLI::IsMember({"f1", "f2", "f3"}));
}

TrainConfig train_config(const TrainOptions& o) {
    TrainConfig c;
    c.hidden = layer_widths(o.layers, o.widths);
    c.batch = o.batch;
    c.learning_rate = o.lr;
    c.patience = o.patience;
    c.max_epochs = o.max_epochs;
    return c;
}

struct BudgetOptions {
    long samples = 150000;
    RolloutBudget budget;
    int streams = 16;
};

void add_budget_options(CLI::App* cmd, BudgetOptions& o) {
    cmd->add_option("--samples", o.samples, "Teacher samples")->check(CLI::PositiveNumber);
    cmd->add_option("--rmin", o.budget.r_min, "Rollouts per candidate and round")->check(CLI::PositiveNumber);
    cmd->add_option("--rmax", o.budget.r_max, "Rollout cap per candidate")->check(CLI::PositiveNumber);
    cmd->add_option("--krace", o.budget.k_race, "Racing confidence multiplier")->check(CLI::PositiveNumber);
    cmd->add_option("--epsilon", o.budget.epsilon, "Fraction of random decisions")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--streams", o.streams, "Independent collection trajectories")->check(CLI::Range(1, 4096));
}

CollectConfig collect_config(const BudgetOptions& o, std::uint64_t seed, unsigned threads) {
    o.budget.validate();
    CollectConfig c;
    c.budget = o.budget;
    c.samples = o.samples;
    c.seed = seed;
    c.threads = threads;
    c.streams = o.streams;
    return c;
}

void print_collect(const Dataset& ds, const CollectStats& st) {
    std::printf("collected %zu samples: %ld decisions (%ld random), %ld epochs, %ld rollouts, %.1f s\n", ds.size(),
                st.decisions, st.random_decisions, st.epochs, st.rollouts, st.wallclock_s);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"K-DTMPA simulator and toolkit: maintenance engineers dispatched over a network of degrading machines."};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: KDTMPA_THREADS or all cores)");

    // validate
    std::string v_instance;
    auto* validate_cmd = app.add_subcommand("validate", "Check an instance file and print its summary");
    validate_cmd->add_option("instance", v_instance, "Instance file")->required();

    // evaluate
    std::string e_instance, e_out;
    std::vector<std::string> e_policies;
    EvalOptions e_opts;
    auto* eval_cmd = app.add_subcommand("evaluate", "Monte Carlo evaluation of one or more policies");
    eval_cmd->add_option("--instance", e_instance, "Instance file")->required();
    eval_cmd->add_option("--policy", e_policies, "Policy spec (repeatable)")->required();
    eval_cmd->add_option("--out", e_out, "CSV report");
    add_eval_options(eval_cmd, e_opts);

    // exact
    std::string x_instance, x_out, x_method = "vi";
    std::vector<std::string> x_policies;
    double x_tol = 1e-6;
    auto* exact_cmd = app.add_subcommand("exact", "Solve a small instance exactly");
    exact_cmd->add_option("--instance", x_instance, "Instance file")->required();
    exact_cmd->add_option("--tol", x_tol, "Sup-norm stopping tolerance")->check(CLI::PositiveNumber);
    exact_cmd->add_option("--method", x_method, "Solver")->check(CLI::IsMember({"vi", "pi"}));
    exact_cmd->add_option("--out", x_out, "Write the optimal policy table here");
    exact_cmd->add_option("--policy", x_policies, "Also evaluate these policies exactly (repeatable)");

    // collect
    std::string c_instance, c_policy = "dispatch:s=fail", c_out, c_csv;
    std::uint64_t c_seed = 1;
    BudgetOptions c_budget;
    auto* collect_cmd = app.add_subcommand("collect", "Collect a teacher dataset by rollout improvement");
    collect_cmd->add_option("--instance", c_instance, "Instance file")->required();
    collect_cmd->add_option("--policy", c_policy, "Base policy spec");
    collect_cmd->add_option("--seed", c_seed, "Master seed");
    collect_cmd->add_option("--out", c_out, "Dataset file")->required();
    collect_cmd->add_option("--csv", c_csv, "Also export the samples as CSV");
    add_budget_options(collect_cmd, c_budget);

    // train
    std::string t_dataset, t_out;
    std::uint64_t t_seed = 1;
    unsigned t_generation = 1;
    TrainOptions t_opts;
    auto* train_cmd = app.add_subcommand("train", "Fit a classifier network to a dataset");
    train_cmd->add_option("--dataset", t_dataset, "Dataset file")->required();
    train_cmd->add_option("--out", t_out, "Network file")->required();
    train_cmd->add_option("--seed", t_seed, "Seed for split, initialization and shuffling");
    train_cmd->add_option("--generation", t_generation, "Generation number stored in the file");
    add_train_options(train_cmd, t_opts);

    // dcl
    std::string d_instance, d_init = "dispatch:s=fail", d_dir = "dcl_out";
    int d_generations = 1;
    std::uint64_t d_seed = 1;
    long d_eval_reps = 100000;
    BudgetOptions d_budget;
    TrainOptions d_train;
    auto* dcl_cmd = app.add_subcommand("dcl", "Approximate policy iteration: collect, train, evaluate, repeat");
    dcl_cmd->add_option("--instance", d_instance, "Instance file")->required();
    dcl_cmd->add_option("--init", d_init, "Initial base policy spec");
    dcl_cmd->add_option("--generations", d_generations, "Generations")->check(CLI::Range(1, 1000));
    dcl_cmd->add_option("--seed", d_seed, "Master seed");
    dcl_cmd->add_option("--eval-reps", d_eval_reps, "Evaluation repetitions per generation (0 to skip)")
        ->check(CLI::NonNegativeNumber);
    dcl_cmd->add_option("--out-dir", d_dir, "Directory for networks and the report");
    add_budget_options(dcl_cmd, d_budget);
    add_train_options(dcl_cmd, d_train);

    // decompose
    std::string k_instance, k_dir = "decompose_out", k_sub = "dispatch:s=fail";
    int k_clusters = 0;
    bool k_solve = false;
    EvalOptions k_eval;
    k_eval.reps = 0;
    auto* dec_cmd = app.add_subcommand("decompose", "Split the network into single-engineer clusters");
    dec_cmd->add_option("--instance", k_instance, "Instance file")->required();
    dec_cmd->add_option("--k", k_clusters, "Number of clusters (default: number of engineers)");
    dec_cmd->add_option("--out-dir", k_dir, "Directory for the cluster instances");
    dec_cmd->add_flag("--solve", k_solve, "Solve every cluster exactly and write its policy table");
    dec_cmd->add_option("--policy", k_sub, "Per-cluster policy to evaluate when not solving");
    add_eval_options(dec_cmd, k_eval);
    dec_cmd->get_option("--reps")->check(CLI::NonNegativeNumber);

    // robust
    std::string r_instance, r_out;
    std::vector<std::string> r_transforms, r_policies;
    EvalOptions r_opts;
    auto* robust_cmd = app.add_subcommand("robust", "Evaluate policies on a transformed network");
    robust_cmd->add_option("--instance", r_instance, "Original instance file")->required();
    robust_cmd->add_option("--transform", r_transforms, "rm-machine:i, rm-engineer:k or add-engineer:loc (repeatable)")
        ->required();
    robust_cmd->add_option("--policy", r_policies, "Policy spec (repeatable); files are checked against the original")
        ->required();
    robust_cmd->add_option("--out", r_out, "CSV report");
    add_eval_options(robust_cmd, r_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate_cmd) {
            const Instance inst = load_instance(v_instance);
            std::printf("%s: valid\n  M = %d machines, K = %d engineers, gamma = %g, costs %s (travel %g)\n"
                        "  max stage cost %g, truncation horizon %ld\n  hash %s\n",
                        inst.name.c_str(), inst.machine_count(), inst.engineer_count(), inst.gamma,
                        inst.cost_structure.c_str(), inst.cost_travel, max_stage_cost(inst), truncation_horizon(inst),
                        hash_hex(instance_hash(inst)).c_str());
        } else if (*eval_cmd) {
            const Instance inst = load_instance(e_instance);
            const auto hash = instance_hash(inst);
            std::vector<PolicyPtr> policies;
            for (const auto& spec : e_policies) policies.push_back(make_policy(spec, inst, hash, e_opts.seed));
            std::vector<EvaluationReport> reports;
            for (const auto& p : policies) {
                reports.push_back(evaluate_policy(inst, *p, eval_config(e_opts, threads)));
                print_report(reports.back());
            }
            write_reports(e_out, reports);
        } else if (*exact_cmd) {
            const Instance inst = load_instance(x_instance);
            const auto hash = instance_hash(inst);
            std::vector<PolicyPtr> policies;
            for (const auto& spec : x_policies) policies.push_back(make_policy(spec, inst, hash));
            const auto start = std::chrono::steady_clock::now();
            const ExactModel model = enumerate_states(inst);
            std::printf("%s: %zu reachable states, %zu state-action pairs\n", inst.name.c_str(), model.state_count(),
                        model.action_code.size());
            const auto sol = x_method == "pi" ? policy_iteration(model, x_tol, threads) : value_iteration(model, x_tol, threads);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::printf("optimal J = %.5f  (%s, %d iterations, residual %.2e, %.1f s)\n", sol.objective,
                        x_method.c_str(), sol.iterations, sol.residual, secs);
            for (const auto& p : policies) {
                const auto v = exact_policy_value(model, *p, 1e-9, threads);
                std::printf("%-40s J = %.5f\n", p->id().c_str(), inst.gamma * v[model.initial_index()]);
            }
            if (!x_out.empty()) {
                save_policy_table(x_out, model, sol.policy, hash);
                std::printf("policy table written to %s\n", x_out.c_str());
            }
        } else if (*collect_cmd) {
            const Instance inst = load_instance(c_instance);
            const auto hash = instance_hash(inst);
            const auto base = make_policy(c_policy, inst, hash, c_seed);
            CollectStats st;
            const Dataset ds = collect_dataset(inst, *base, hash, collect_config(c_budget, c_seed, threads), &st);
            save_dataset(c_out, ds);
            if (!c_csv.empty()) {
                std::ofstream f(c_csv);
                if (!f) throw ValidationError("cannot write " + c_csv);
                write_dataset_csv(f, ds);
            }
            print_collect(ds, st);
        } else if (*train_cmd) {
            const Dataset ds = load_dataset(t_dataset);
            const auto design = parse_feature_design(t_opts.design);
            const Eigen::MatrixXd X = dataset_features(ds, design);
            const std::vector<int> y(ds.action.begin(), ds.action.end());
            Rng rng(t_seed);
            const auto start = std::chrono::steady_clock::now();
            auto tr = train_classifier(X, y, ds.M + 1, train_config(t_opts), rng);
            TrainedNetwork tn{std::move(tr.net), design, ds.M, ds.K, ds.instance_hash, t_generation};
            save_network(t_out, tn);
            std::printf("trained on %zu samples (%s, dim %ld): %d epochs, best test loss %.4f, test accuracy %.3f, "
                        "train accuracy %.3f, %.1f s\n",
                        ds.size(), t_opts.design.c_str(), static_cast<long>(X.rows()), tr.epochs, tr.best_test_loss,
                        tr.test_accuracy, tr.train_accuracy,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        } else if (*dcl_cmd) {
            const Instance inst = load_instance(d_instance);
            const auto hash = instance_hash(inst);
            const auto init = make_policy(d_init, inst, hash, d_seed);
            fs::create_directories(d_dir);
            ApiConfig cfg;
            cfg.generations = d_generations;
            cfg.seed = d_seed;
            cfg.collect = collect_config(d_budget, d_seed, threads);
            cfg.train = train_config(d_train);
            cfg.design = parse_feature_design(d_train.design);
            cfg.eval.reps = d_eval_reps;
            cfg.eval.threads = threads;
            std::vector<EvaluationReport> reports;
            if (d_eval_reps >= 2) {
                EvaluationConfig ec = cfg.eval;
                ec.seed = generation_seed(d_seed, 0, 2);
                reports.push_back(evaluate_policy(inst, *init, ec));
                print_report(reports.back());
            }
            api_iterate(inst, hash, init, cfg, [&](const GenerationResult& g) {
                const std::string net = (fs::path(d_dir) / ("gen" + std::to_string(g.generation) + ".nn")).string();
                save_network(net, *g.network);
                std::printf("generation %d: %zu samples (%ld rollouts, %.1f s), %d epochs, test accuracy %.3f -> %s\n",
                            g.generation, g.samples, g.collect.rollouts, g.collect.wallclock_s, g.epochs,
                            g.test_accuracy, net.c_str());
                if (g.evaluation) {
                    auto r = *g.evaluation;
                    r.policy = "net:" + net;
                    reports.push_back(r);
                    print_report(r);
                    write_reports((fs::path(d_dir) / "report.csv").string(), reports);
                }
            });
        } else if (*dec_cmd) {
            const Instance inst = load_instance(k_instance);
            const int K = k_clusters > 0 ? k_clusters : inst.engineer_count();
            std::vector<std::vector<int>> clusters;
            if (K == inst.engineer_count()) {
                clusters = instance_clusters(inst, k_eval.seed);
            } else {
                if (!inst.coords) throw ValidationError("decompose: instance has no coordinates");
                Rng rng(k_eval.seed);
                clusters = kmeans_clusters(*inst.coords, K, rng).clusters;
            }
            fs::create_directories(k_dir);
            std::vector<std::string> specs;
            for (std::size_t c = 0; c < clusters.size(); ++c) {
                std::printf("cluster %zu:", c + 1);
                for (int m : clusters[c])
                    std::printf(" %s", inst.location_names.empty() ? std::to_string(m + 1).c_str()
                                                                   : inst.location_names[m].c_str());
                std::printf("\n");
                if (static_cast<int>(clusters.size()) != inst.engineer_count()) continue;
                const Instance sub = sub_instance(inst, clusters[c], static_cast<int>(c));
                const std::string path = (fs::path(k_dir) / ("cluster" + std::to_string(c + 1) + ".json")).string();
                save_instance(path, sub);
                if (k_solve) {
                    const ExactModel model = enumerate_states(sub);
                    const auto sol = value_iteration(model, 1e-6, threads);
                    const std::string table = (fs::path(k_dir) / ("cluster" + std::to_string(c + 1) + ".csv")).string();
                    save_policy_table(table, model, sol.policy, instance_hash(sub));
                    std::printf("  %zu states, optimal J = %.4f -> %s\n", model.state_count(), sol.objective, table.c_str());
                    specs.push_back("exact:" + table);
                } else {
                    specs.push_back(k_sub);
                }
            }
            if (static_cast<int>(clusters.size()) != inst.engineer_count()) {
                std::printf("cluster count differs from the engineer count; no per-cluster workflow\n");
            } else if (k_eval.reps >= 2) {
                std::string spec = "dec:";
                for (std::size_t c = 0; c < specs.size(); ++c) spec += (c ? ";" : "") + specs[c];
                Instance clustered = inst;
                clustered.clusters = clusters;
                const auto pol = make_policy(spec, clustered, instance_hash(clustered), k_eval.seed);
                print_report(evaluate_policy(clustered, *pol, eval_config(k_eval, threads)));
            }
        } else if (*robust_cmd) {
            const Instance original = load_instance(r_instance);
            const auto hash = instance_hash(original);
            Instance inst = original;
            for (const auto& t : r_transforms) inst = apply_transform(inst, t);
            std::string label = original.name;
            for (const auto& t : r_transforms) label += "+" + t;
            inst.name = label;
            std::vector<PolicyPtr> policies;
            for (const auto& spec : r_policies) policies.push_back(make_policy(spec, inst, hash, r_opts.seed));
            std::vector<EvaluationReport> reports;
            for (const auto& p : policies) {
                reports.push_back(evaluate_policy(inst, *p, eval_config(r_opts, threads)));
                print_report(reports.back());
            }
            write_reports(r_out, reports);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
