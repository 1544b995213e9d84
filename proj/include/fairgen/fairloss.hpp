#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

#include "fairgen/dataset.hpp"

namespace fairgen {

enum class Metric { DP, EO, EOPP, TVMulticlass };

Metric metric_from_string(const std::string& s);
std::string to_string(Metric m);

// Batch predictor: row-wise features -> scores in [0,1].
using Predictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;
// Row-wise features -> predicted class in {0,...,C-1}.
using ClassPredictor = std::function<Eigen::VectorXi(const Eigen::MatrixXd&)>;

// | sum_{t=0} f / (n_0+2) - sum_{t=1} f / (n_1+2) |. Empty groups contribute
// a zero sum; the +2 shift keeps every input valid.
double dp_loss(const Eigen::VectorXd& preds, const Eigen::VectorXi& t);

// Per-label DP-style gap with n_{t,y}+2 normalizers, summed over y in {0,1}.
double eo_loss(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const Eigen::VectorXi& y);

// The y = 1 term of eo_loss.
double eopp_loss(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const Eigen::VectorXi& y);

// (1/2) sum_c | n_{0,y,c}/(n_{0,y}+2) - n_{1,y,c}/(n_{1,y}+2) | for one label y.
double tv_label_loss(const Eigen::VectorXi& pred_class, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                     int label, int num_classes);

// Sum of tv_label_loss over all labels; in [0, C].
double tv_aggregate(const Eigen::VectorXi& pred_class, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                    int num_classes);

double dp_loss(const Predictor& predict, const Dataset& d);
double eo_loss(const Predictor& predict, const Dataset& d);
double eopp_loss(const Predictor& predict, const Dataset& d);
double tv_aggregate(const ClassPredictor& predict_class, const Dataset& d);

// Fairness loss under `metric` (TVMulticlass thresholds scores at 0.5 when
// given a scalar predictor via fairness_loss(Predictor, ...)).
double fairness_loss(Metric metric, const Predictor& predict, const Dataset& d);
double fairness_loss(Metric metric, const Eigen::VectorXd& preds, const Eigen::VectorXi& t,
                     const Eigen::VectorXi& y, int num_classes);

// Monte Carlo estimate of the population fairness risk: the mean of the
// metric over `reps` fresh size-n datasets resampled from `heldout`. This is
// an expectation over datasets of size n, not the loss on one big set.
double pop_risk_estimate(const Predictor& predict, Metric metric, const Dataset& heldout, Eigen::Index n,
                         int reps, Rng& rng);

struct GapRecord {
    double train_loss = 0.0;
    double test_loss = 0.0;
    double gap = 0.0;  // test - train; bound comparisons use |gap|
};

GapRecord gap(const Predictor& predict, Metric metric, const Dataset& train, const Dataset& test);

}  // namespace fairgen
