#include "fairgen/fairloss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fairgen/errors.hpp"

namespace fairgen {

Metric metric_from_string(const std::string& s) {
    if (s == "dp") return Metric::DP;
    if (s == "eo") return Metric::EO;
    if (s == "eopp") return Metric::EOPP;
    if (s == "tv") return Metric::TVMulticlass;
    throw ConfigError("unknown metric '" + s + "' (expected dp|eo|eopp|tv)");
}

std::string to_string(Metric m) {
    switch (m) {
        case Metric::DP: return "dp";
        case Metric::EO: return "eo";
        case Metric::EOPP: return "eopp";
        case Metric::TVMulticlass: return "tv";
    }
    return "?";
}

double dp_loss(const Eigen::VectorXd& preds, const Eigen::VectorXi& t) {
    double sum0 = 0.0, sum1 = 0.0;
    long n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < preds.size(); ++i) {
        if (t[i] == 0) {
            sum0 += preds[i];
            ++n0;
        } else {
            sum1 += preds[i];
            ++n1;
        }
    }
    return std::abs(sum0 / (static_cast<double>(n0) + 2.0) - sum1 / (static_cast<double>(n1) + 2.0));
}

namespace {

double dp_loss_for_label(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                         int label) {
    double sum0 = 0.0, sum1 = 0.0;
    long n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < preds.size(); ++i) {
        if (y[i] != label) continue;
        if (t[i] == 0) {
            sum0 += preds[i];
            ++n0;
        } else {
            sum1 += preds[i];
            ++n1;
        }
    }
    return std::abs(sum0 / (static_cast<double>(n0) + 2.0) - sum1 / (static_cast<double>(n1) + 2.0));
}

}  // namespace

double eo_loss(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const Eigen::VectorXi& y) {
    return dp_loss_for_label(preds, t, y, 0) + dp_loss_for_label(preds, t, y, 1);
}

double eopp_loss(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const Eigen::VectorXi& y) {
    return dp_loss_for_label(preds, t, y, 1);
}

double tv_label_loss(const Eigen::VectorXi& pred_class, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                     int label, int num_classes) {
    std::vector<long> h0(static_cast<std::size_t>(num_classes), 0);
    std::vector<long> h1(static_cast<std::size_t>(num_classes), 0);
    long n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < pred_class.size(); ++i) {
        if (y[i] != label) continue;
        const auto c = static_cast<std::size_t>(pred_class[i]);
        if (t[i] == 0) {
            ++h0[c];
            ++n0;
        } else {
            ++h1[c];
            ++n1;
        }
    }
    double tv = 0.0;
    for (int c = 0; c < num_classes; ++c)
        tv += std::abs(static_cast<double>(h0[static_cast<std::size_t>(c)]) / (static_cast<double>(n0) + 2.0) -
                       static_cast<double>(h1[static_cast<std::size_t>(c)]) / (static_cast<double>(n1) + 2.0));
    return 0.5 * tv;
}

double tv_aggregate(const Eigen::VectorXi& pred_class, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                    int num_classes) {
    double s = 0.0;
    for (int label = 0; label < num_classes; ++label) s += tv_label_loss(pred_class, t, y, label, num_classes);
    return s;
}

double dp_loss(const Predictor& predict, const Dataset& d) { return dp_loss(predict(d.features()), d.sensitive()); }

double eo_loss(const Predictor& predict, const Dataset& d) {
    return eo_loss(predict(d.features()), d.sensitive(), d.labels());
}

double eopp_loss(const Predictor& predict, const Dataset& d) {
    return eopp_loss(predict(d.features()), d.sensitive(), d.labels());
}

double tv_aggregate(const ClassPredictor& predict_class, const Dataset& d) {
    return tv_aggregate(predict_class(d.features()), d.sensitive(), d.labels(), d.num_classes());
}

double fairness_loss(Metric metric, const Eigen::VectorXd& preds, const Eigen::VectorXi& t,
                     const Eigen::VectorXi& y, int num_classes) {
    switch (metric) {
        case Metric::DP: return dp_loss(preds, t);
        case Metric::EO: return eo_loss(preds, t, y);
        case Metric::EOPP: return eopp_loss(preds, t, y);
        case Metric::TVMulticlass: {
            Eigen::VectorXi cls = (preds.array() >= 0.5).cast<int>();
            return tv_aggregate(cls, t, y, num_classes);
        }
    }
    return 0.0;
}

double fairness_loss(Metric metric, const Predictor& predict, const Dataset& d) {
    return fairness_loss(metric, predict(d.features()), d.sensitive(), d.labels(), d.num_classes());
}

double pop_risk_estimate(const Predictor& predict, Metric metric, const Dataset& heldout, Eigen::Index n,
                         int reps, Rng& rng) {
    if (n > heldout.size()) throw SizeError("pop_risk_estimate: n exceeds held-out size");
    if (reps < 1) throw std::invalid_argument("pop_risk_estimate: reps must be >= 1");
    std::vector<int> idx(static_cast<std::size_t>(heldout.size()));
    std::iota(idx.begin(), idx.end(), 0);
    double acc = 0.0;
    for (int r = 0; r < reps; ++r) {
        std::shuffle(idx.begin(), idx.end(), rng);
        Dataset draw = heldout.select(std::span<const int>(idx.data(), static_cast<std::size_t>(n)));
        acc += fairness_loss(metric, predict, draw);
    }
    return acc / reps;
}

GapRecord gap(const Predictor& predict, Metric metric, const Dataset& train, const Dataset& test) {
    GapRecord g;
    g.train_loss = fairness_loss(metric, predict, train);
    g.test_loss = fairness_loss(metric, predict, test);
    g.gap = g.test_loss - g.train_loss;
    return g;
}

}  // namespace fairgen
