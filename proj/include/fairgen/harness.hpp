#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairgen/bounds.hpp"
#include "fairgen/dataset.hpp"
#include "fairgen/fairloss.hpp"
#include "fairgen/train.hpp"

namespace fairgen {

struct ExperimentConfig {
    std::string dataset_path;
    std::string schema_path;
    std::string sensitive;  // optional column override
    std::string out_path = "results";
    Metric metric = Metric::DP;
    bool metric_set = false;  // when false, the metric follows the method
    Method method = Method::ERM;
    double lambda = -1.0;  // < 0 selects the per-method default
    std::vector<int> n_grid = {250, 500, 1000, 1500, 2000, 2500};
    int m1 = 21;
    int m2 = 50;
    int m = 0;  // 0 selects m = n
    int subset_budget = 30;
    int k = 3;
    bool balanced = false;
    double hard_threshold = -1.0;  // < 0 evaluates soft scores
    std::uint64_t seed = 1;
    std::string arch = "mlp-64";
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::Adam;
    int table1_seeds = 10;

    static ExperimentConfig from_json_file(const std::string& path);
    void apply_json_text(const std::string& text);

    double effective_lambda() const;
    Metric effective_metric() const;
    TrainConfig train_config(std::uint64_t cell_seed) const;
};

// Figure-2 run identifiers: diffdp/diffeodd/diffeopp 2.0, hsic 400.0,
// premover 0.4, erm 0.
double default_lambda(Method m);

void validate(const ExperimentConfig& cfg, Eigen::Index dataset_size);

Dataset load_experiment_dataset(const ExperimentConfig& cfg);

struct GapSummary {
    int n = 0;
    double mean_gap = 0.0;      // mean over z of the per-z mean gap
    double std_gap = 0.0;       // dispersion across z
    double mean_abs_gap = 0.0;  // mean over z of |per-z mean gap|
    double mean_train_loss = 0.0;
    double mean_test_loss = 0.0;
    double mean_test_acc = 0.0;
};

struct BoundSummary {
    int n = 0;
    BoundEstimate bound;
    double mean_abs_gap = 0.0;
    std::vector<double> abs_gap_per_z;
};

struct Table1Row {
    int n = 0;
    bool balanced = false;
    double mean_test_dp = 0.0;
    double std_test_dp = 0.0;
    double mean_test_acc = 0.0;
    std::vector<double> per_seed_test_dp;
};

// Streams one JSON object per line to <out>.jsonl and a plot table with
// columns n,mean_gap,std_gap,mean_bound,std_bound to <out>.csv. Output is a
// deterministic function of config + seed.
class Emitter {
public:
    explicit Emitter(const std::string& out_path);
    ~Emitter();
    void record(const std::string& json_line);
    void plot_row(int n, double mean_gap, double std_gap, std::optional<double> mean_bound,
                  std::optional<double> std_bound);
    const std::string& jsonl_path() const { return jsonl_path_; }
    const std::string& csv_path() const { return csv_path_; }

private:
    std::string jsonl_path_, csv_path_;
    void* jsonl_ = nullptr;  // FILE*
    void* csv_ = nullptr;
};

std::vector<GapSummary> run_gap_experiment(const ExperimentConfig& cfg, const Dataset& d, Emitter* emit);
std::vector<BoundSummary> run_bound_experiment(const ExperimentConfig& cfg, const Dataset& d, Emitter* emit);
std::vector<Table1Row> run_table1(const ExperimentConfig& cfg, const Dataset& d, Emitter* emit);

struct ScatterStats {
    double r = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
};

// Pearson r and least-squares fit; empty when either coordinate is degenerate.
std::optional<ScatterStats> scatter_stats(std::span<const std::pair<double, double>> pairs);

}  // namespace fairgen
