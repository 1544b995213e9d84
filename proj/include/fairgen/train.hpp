#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "fairgen/dataset.hpp"
#include "fairgen/model.hpp"

namespace fairgen {

enum class Method { ERM, DiffDP, DiffEopp, DiffEodd, HSIC, PRemover };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

enum class OptimizerKind { SGD, Adam };

struct TrainConfig {
    Method method = Method::ERM;
    double lambda = 0.0;
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool balanced = false;
    std::uint64_t seed = 0;
    // <= 0 selects the per-batch median heuristic (floored at 0.1).
    double hsic_bandwidth_pred = 0.0;
    double hsic_bandwidth_attr = 0.0;
};

// Each penalty returns its value and, when dpen_dp is non-null, the gradient
// with respect to the per-sample predictions.

// | mean_{t=0} p - mean_{t=1} p | with count+eps denominators; an absent
// group contributes an empty mean of 0.
double penalty_diffdp(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, Eigen::VectorXd* dpen_dp = nullptr);

// The same gap restricted to y = 1.
double penalty_diffeopp(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                        Eigen::VectorXd* dpen_dp = nullptr);

// Summed over y in {0,1}.
double penalty_diffeodd(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                        Eigen::VectorXd* dpen_dp = nullptr);

// Biased empirical HSIC with Gaussian kernels on predictions and on t:
// (1/b^2) tr(K H L H). Bandwidths are treated as constants of the batch.
double penalty_hsic(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, double bandwidth_pred,
                    double bandwidth_attr, Eigen::VectorXd* dpen_dp = nullptr);

// Plug-in prejudice index: sum_{t',c} P(t',c) ln(P(c|t')/P(c)) with soft class
// probabilities built from per-group batch means of (p, 1-p).
double penalty_premover(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, Eigen::VectorXd* dpen_dp = nullptr);

// Median of pairwise absolute differences, floored at 0.1.
double median_heuristic_bandwidth(const Eigen::VectorXd& values);

struct ObjectiveResult {
    double loss = 0.0;
    Eigen::VectorXd grad;
};

// Mean binary cross-entropy plus lambda * penalty(method); grad is the exact
// analytic gradient of that expression over the flat parameter vector.
ObjectiveResult objective(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXi& t,
                          const Eigen::VectorXi& y, const TrainConfig& cfg);

// One epoch worth of row-index batches. Unbalanced: uniform shuffle then
// chunk. Balanced: ceil(b/2) rows from t=0 and floor(b/2) from t=1 per batch,
// each group reshuffled and recycled on exhaustion.
std::vector<std::vector<int>> epoch_batches(const Dataset& d, const TrainConfig& cfg, Rng& rng);

Model train(Model init, const Dataset& d, const TrainConfig& cfg);

// Max relative error between the analytic gradient and central differences.
// HSIC bandwidths are resolved once from the batch and held fixed across the
// sweep so both sides differentiate the same function.
double grad_check(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                  TrainConfig cfg, double h = 1e-5);

double accuracy(const Model& m, const Dataset& d);

}  // namespace fairgen
