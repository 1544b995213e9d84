#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "fairgen/csv.hpp"
#include "fairgen/harness.hpp"
#include "fairgen/model.hpp"
#include "fairgen/oracles.hpp"
#include "fairgen/synth.hpp"

namespace {

using fairgen::ExperimentConfig;

struct CliOverrides {
    std::optional<std::string> config, dataset, schema, sensitive, out, method, metric, arch, optimizer, n_list;
    std::optional<double> lambda, learning_rate, hard_threshold;
    std::optional<int> m1, m2, m, k, subset_budget, epochs, batch_size, table1_seeds;
    std::optional<bool> balanced;
    std::optional<std::uint64_t> seed;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("--config", o.config, "JSON config file; flags override its fields");
    cmd->add_option("--dataset", o.dataset, "CSV dataset path");
    cmd->add_option("--schema", o.schema, "JSON schema path");
    cmd->add_option("--sensitive", o.sensitive, "column to use as the sensitive attribute");
    cmd->add_option("--method", o.method, "erm|diffdp|diffeopp|diffeodd|hsic|premover");
    cmd->add_option("--metric", o.metric, "dp|eo|eopp|tv (defaults to the method's family)");
    cmd->add_option("--lambda", o.lambda, "penalty weight (defaults per method)");
    cmd->add_option("--n", o.n_list, "comma-separated training sizes, e.g. 250,500,1000");
    cmd->add_option("--m1", o.m1, "supersample draws");
    cmd->add_option("--m2", o.m2, "selection draws per supersample");
    cmd->add_option("--m", o.m, "subset size (0 = n)");
    cmd->add_option("--k", o.k, "kNN neighbor count for MI estimation");
    cmd->add_option("--subset-budget", o.subset_budget, "max enumerated subsets when m < n");
    cmd->add_option("--balanced", o.balanced, "balance sensitive groups within each batch");
    cmd->add_option("--hard-threshold", o.hard_threshold, "threshold scores before fairness evaluation");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "output path prefix");
    cmd->add_option("--arch", o.arch, "logreg or mlp[-HxH...]");
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--batch-size", o.batch_size, "minibatch size");
    cmd->add_option("--lr", o.learning_rate, "learning rate");
    cmd->add_option("--optimizer", o.optimizer, "adam|sgd");
    cmd->add_option("--table1-seeds", o.table1_seeds, "repeats for the balancing table");
}

ExperimentConfig resolve(const CliOverrides& o) {
    ExperimentConfig cfg;
    if (o.config) cfg = ExperimentConfig::from_json_file(*o.config);
    if (o.dataset) cfg.dataset_path = *o.dataset;
    if (o.schema) cfg.schema_path = *o.schema;
    if (o.sensitive) cfg.sensitive = *o.sensitive;
    if (o.out) cfg.out_path = *o.out;
    if (o.method) cfg.method = fairgen::method_from_string(*o.method);
    if (o.metric) {
        cfg.metric = fairgen::metric_from_string(*o.metric);
        cfg.metric_set = true;
    }
    if (o.lambda) cfg.lambda = *o.lambda;
    if (o.n_list) {
        cfg.n_grid.clear();
        std::stringstream ss(*o.n_list);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.n_grid.push_back(std::stoi(tok));
    }
    if (o.m1) cfg.m1 = *o.m1;
    if (o.m2) cfg.m2 = *o.m2;
    if (o.m) cfg.m = *o.m;
    if (o.k) cfg.k = *o.k;
    if (o.subset_budget) cfg.subset_budget = *o.subset_budget;
    if (o.balanced) cfg.balanced = *o.balanced;
    if (o.hard_threshold) cfg.hard_threshold = *o.hard_threshold;
    if (o.seed) cfg.seed = *o.seed;
    if (o.arch) cfg.arch = *o.arch;
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.batch_size) cfg.batch_size = *o.batch_size;
    if (o.learning_rate) cfg.learning_rate = *o.learning_rate;
    if (o.optimizer) cfg.optimizer = *o.optimizer == "sgd" ? fairgen::OptimizerKind::SGD : fairgen::OptimizerKind::Adam;
    if (o.table1_seeds) cfg.table1_seeds = *o.table1_seeds;
    return cfg;
}

int cmd_ingest(const ExperimentConfig& cfg) {
    const fairgen::Dataset d = fairgen::load_experiment_dataset(cfg);
    const auto counts = fairgen::group_counts(d);
    std::printf("rows=%ld feature_dim=%ld classes=%d n0=%ld n1=%ld\n", static_cast<long>(d.size()),
                static_cast<long>(d.feature_dim()), d.num_classes(), counts.dp[0], counts.dp[1]);
    // Standardization invariants: every feature column is either an indicator
    // column or has mean ~0 and variance ~1.
    bool ok = true;
    for (Eigen::Index c = 0; c < d.feature_dim(); ++c) {
        const auto col = d.features().col(c);
        const bool indicator = ((col.array() == 0.0) || (col.array() == 1.0)).all();
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / static_cast<double>(d.size());
        const bool standardized = std::abs(mean) <= 1e-9 && std::abs(var - 1.0) <= 1e-6;
        if (!indicator && !standardized) {
            std::printf("column %ld: mean=%.3e var=%.6f FAIL\n", static_cast<long>(c), mean, var);
            ok = false;
        }
    }
    std::printf("standardization %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

int cmd_oracles(int instances, std::uint64_t seed) {
    bool ok = true;
    for (const auto& rep : fairgen::run_all_oracles(instances, seed)) {
        std::printf("%s\n", fairgen::format(rep).c_str());
        ok = ok && rep.pass;
    }
    return ok ? 0 : 1;
}

int cmd_grad_check(const ExperimentConfig& cfg, int batches) {
    using fairgen::Method;
    fairgen::Rng rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int dim = 8, batch = 16;
    bool ok = true;
    for (Method method : {Method::ERM, Method::DiffDP, Method::DiffEopp, Method::DiffEodd, Method::HSIC,
                          Method::PRemover}) {
        for (const std::string& arch_name : {std::string("logreg"), cfg.arch}) {
            double worst = 0.0;
            for (int b = 0; b < batches; ++b) {
                Eigen::MatrixXd x(batch, dim);
                Eigen::VectorXi t(batch), y(batch);
                for (int i = 0; i < batch; ++i) {
                    for (int j = 0; j < dim; ++j) x(i, j) = normal(rng);
                    t[i] = unif(rng) < 0.35 ? 0 : 1;
                    y[i] = unif(rng) < 0.5 ? 0 : 1;
                }
                const fairgen::Arch arch = fairgen::Arch::parse(arch_name, dim);
                const fairgen::Model m = fairgen::Model::init(arch, fairgen::derive_seed(cfg.seed, {99, static_cast<std::uint64_t>(b)}));
                fairgen::TrainConfig tc;
                tc.method = method;
                tc.lambda = fairgen::default_lambda(method);
                if (method == Method::ERM) tc.lambda = 0.0;
                worst = std::max(worst, fairgen::grad_check(m, x, t, y, tc));
            }
            std::printf("grad-check method=%-8s arch=%-8s batches=%d max_rel_err=%.3e %s\n",
                        to_string(method).c_str(), arch_name.c_str(), batches, worst,
                        worst < 1e-4 ? "PASS" : "FAIL");
            ok = ok && worst < 1e-4;
        }
    }
    return ok ? 0 : 1;
}

int cmd_scatter(const std::string& in_path) {
    std::vector<std::pair<double, double>> pairs;
    std::ifstream in(in_path);
    if (!in) {
        std::fprintf(stderr, "scatter: cannot open '%s'\n", in_path.c_str());
        return 1;
    }
    std::string line;
    const bool jsonl = in_path.size() > 6 && in_path.substr(in_path.size() - 6) == ".jsonl";
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (jsonl) {
            auto j = nlohmann::json::parse(line);
            if (j.value("kind", "") == "bound") pairs.emplace_back(j["bound"].get<double>(), j["abs_gap"].get<double>());
        } else {
            std::stringstream ss(line);
            std::string a, b;
            if (std::getline(ss, a, ',') && std::getline(ss, b, ',')) {
                try {
                    pairs.emplace_back(std::stod(a), std::stod(b));
                } catch (const std::exception&) {
                    continue;  // header or malformed line
                }
            }
        }
    }
    const auto stats = fairgen::scatter_stats(pairs);
    if (!stats) {
        std::fprintf(stderr, "scatter: undefined correlation (degenerate input, %zu pairs)\n", pairs.size());
        return 2;
    }
    std::printf("pairs=%zu pearson_r=%.6f slope=%.6f intercept=%.6f\n", pairs.size(), stats->r, stats->slope,
                stats->intercept);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairness overfitting measurements and information-theoretic bound estimates"};
    app.require_subcommand(1);

    CliOverrides o;
    int oracle_instances = 1000;
    int gradcheck_batches = 100;
    std::string scatter_in;

    auto* ingest = app.add_subcommand("ingest", "load a dataset and check preprocessing invariants");
    add_common_options(ingest, o);
    auto* gaps = app.add_subcommand("gaps", "measure fairness generalization gaps over the experiment grid");
    add_common_options(gaps, o);
    auto* bounds = app.add_subcommand("bounds", "estimate the loss-difference CMI bounds alongside the gaps");
    add_common_options(bounds, o);
    auto* table1 = app.add_subcommand("table1", "balanced vs unbalanced batch comparison");
    add_common_options(table1, o);
    auto* oracles = app.add_subcommand("oracles", "brute-force verification of the concentration lemmas");
    oracles->add_option("--instances", oracle_instances, "random instances per lemma");
    std::uint64_t oracle_seed = 1;
    oracles->add_option("--seed", oracle_seed, "master seed");
    auto* gradcheck = app.add_subcommand("grad-check", "analytic vs central-difference gradients per method");
    add_common_options(gradcheck, o);
    gradcheck->add_option("--batches", gradcheck_batches, "random batches per method/arch");
    auto* scatter = app.add_subcommand("scatter", "Pearson correlation of (bound, |gap|) pairs");
    scatter->add_option("--in", scatter_in, "bounds .jsonl output or two-column CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(resolve(o));
        if (oracles->parsed()) return cmd_oracles(oracle_instances, oracle_seed);
        if (gradcheck->parsed()) return cmd_grad_check(resolve(o), gradcheck_batches);
        if (scatter->parsed()) return cmd_scatter(scatter_in);

        const ExperimentConfig cfg = resolve(o);
        const fairgen::Dataset d = fairgen::load_experiment_dataset(cfg);
        fairgen::Emitter emit(cfg.out_path);
        if (gaps->parsed()) {
            for (const auto& s : fairgen::run_gap_experiment(cfg, d, &emit))
                std::printf("n=%d mean_gap=%.6f std_gap=%.6f mean_abs_gap=%.6f test_acc=%.4f\n", s.n, s.mean_gap,
                            s.std_gap, s.mean_abs_gap, s.mean_test_acc);
        } else if (bounds->parsed()) {
            for (const auto& s : fairgen::run_bound_experiment(cfg, d, &emit))
                std::printf("n=%d bound=%.6f +- %.6f mean_abs_gap=%.6f coeff=%.6g mi=%.6g\n", s.n, s.bound.value,
                            s.bound.stddev, s.mean_abs_gap, s.bound.coefficient, s.bound.mi);
        } else if (table1->parsed()) {
            for (const auto& row : fairgen::run_table1(cfg, d, &emit))
                std::printf("n=%d balanced=%d mean_test_dp=%.6f std=%.6f\n", row.n, row.balanced ? 1 : 0,
                            row.mean_test_dp, row.std_test_dp);
        }
        std::printf("records: %s\nplot data: %s\n", emit.jsonl_path().c_str(), emit.csv_path().c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
