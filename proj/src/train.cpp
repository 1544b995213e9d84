#include "fairgen/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairgen/errors.hpp"

namespace fairgen {

namespace {
constexpr double kCountEps = 1e-8;
constexpr double kLogEps = 1e-8;

inline double softplus(double z) {
    if (z > 30.0) return z;
    if (z < -30.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// DP-style gap on the rows selected by `use`; empty groups make the penalty 0.
double group_gap(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const std::vector<char>& use,
                 Eigen::VectorXd* dpen_dp) {
    double s0 = 0.0, s1 = 0.0;
    long c0 = 0, c1 = 0;
    for (Eigen::Index i = 0; i < preds.size(); ++i) {
        if (!use[static_cast<std::size_t>(i)]) continue;
        if (t[i] == 0) {
            s0 += preds[i];
            ++c0;
        } else {
            s1 += preds[i];
            ++c1;
        }
    }
    if (c0 == 0 || c1 == 0) return 0.0;
    const double d0 = static_cast<double>(c0) + kCountEps;
    const double d1 = static_cast<double>(c1) + kCountEps;
    const double gap = s0 / d0 - s1 / d1;
    if (dpen_dp) {
        const double s = sgn(gap);
        for (Eigen::Index i = 0; i < preds.size(); ++i) {
            if (!use[static_cast<std::size_t>(i)]) continue;
            (*dpen_dp)[i] += s * (t[i] == 0 ? 1.0 / d0 : -1.0 / d1);
        }
    }
    return std::abs(gap);
}

}  // namespace

Method method_from_string(const std::string& s) {
    if (s == "erm") return Method::ERM;
    if (s == "diffdp") return Method::DiffDP;
    if (s == "diffeopp") return Method::DiffEopp;
    if (s == "diffeodd") return Method::DiffEodd;
    if (s == "hsic") return Method::HSIC;
    if (s == "premover") return Method::PRemover;
    throw ConfigError("unknown method '" + s + "' (expected erm|diffdp|diffeopp|diffeodd|hsic|premover)");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::ERM: return "erm";
        case Method::DiffDP: return "diffdp";
        case Method::DiffEopp: return "diffeopp";
        case Method::DiffEodd: return "diffeodd";
        case Method::HSIC: return "hsic";
        case Method::PRemover: return "premover";
    }
    return "?";
}

double penalty_diffdp(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, Eigen::VectorXd* dpen_dp) {
    if (dpen_dp) dpen_dp->setZero(preds.size());
    std::vector<char> all(static_cast<std::size_t>(preds.size()), 1);
    return group_gap(preds, t, all, dpen_dp);
}

double penalty_diffeopp(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                        Eigen::VectorXd* dpen_dp) {
    if (dpen_dp) dpen_dp->setZero(preds.size());
    std::vector<char> use(static_cast<std::size_t>(preds.size()));
    for (Eigen::Index i = 0; i < preds.size(); ++i) use[static_cast<std::size_t>(i)] = y[i] == 1;
    return group_gap(preds, t, use, dpen_dp);
}

double penalty_diffeodd(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                        Eigen::VectorXd* dpen_dp) {
    if (dpen_dp) dpen_dp->setZero(preds.size());
    double pen = 0.0;
    for (int label = 0; label < 2; ++label) {
        std::vector<char> use(static_cast<std::size_t>(preds.size()));
        for (Eigen::Index i = 0; i < preds.size(); ++i) use[static_cast<std::size_t>(i)] = y[i] == label;
        pen += group_gap(preds, t, use, dpen_dp);
    }
    return pen;
}

double median_heuristic_bandwidth(const Eigen::VectorXd& values) {
    const Eigen::Index n = values.size();
    if (n < 2) return 0.1;
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) dists.push_back(std::abs(values[i] - values[j]));
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    return std::max(*mid, 0.1);
}

double penalty_hsic(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, double bandwidth_pred,
                    double bandwidth_attr, Eigen::VectorXd* dpen_dp) {
    const Eigen::Index b = preds.size();
    if (dpen_dp) dpen_dp->setZero(b);
    if (b < 2) return 0.0;
    const double sp2 = bandwidth_pred * bandwidth_pred;
    const double st2 = bandwidth_attr * bandwidth_attr;

    const Eigen::ArrayXXd dp =
        preds.array().replicate(1, b) - preds.transpose().array().replicate(b, 1);
    const Eigen::ArrayXXd dt = t.cast<double>().array().replicate(1, b) -
                               t.cast<double>().transpose().array().replicate(b, 1);
    const Eigen::ArrayXXd k = (-dp.square() / (2.0 * sp2)).exp();
    const Eigen::ArrayXXd l = (-dt.square() / (2.0 * st2)).exp();

    // M = H L H expressed through row/column centering.
    const double bn = static_cast<double>(b);
    const Eigen::ArrayXd row_mean = l.rowwise().mean();
    const double grand_mean = l.mean();
    const Eigen::ArrayXXd m = l - row_mean.replicate(1, b) - row_mean.transpose().replicate(b, 1) + grand_mean;

    const double hsic = (k * m).sum() / (bn * bn);
    if (dpen_dp) {
        const Eigen::ArrayXXd mk = m * k;
        const Eigen::VectorXd mk_row = mk.rowwise().sum();
        const Eigen::VectorXd mk_p = mk.matrix() * preds;
        *dpen_dp = (-2.0 / (sp2 * bn * bn)) * (mk_row.array() * preds.array() - mk_p.array()).matrix();
    }
    return hsic;
}

double penalty_premover(const Eigen::VectorXd& preds, const Eigen::VectorXi& t, Eigen::VectorXd* dpen_dp) {
    const Eigen::Index b = preds.size();
    if (dpen_dp) dpen_dp->setZero(b);
    double s[2] = {0.0, 0.0};
    long c[2] = {0, 0};
    for (Eigen::Index i = 0; i < b; ++i) {
        s[t[i]] += preds[i];
        ++c[t[i]];
    }
    if (c[0] == 0 || c[1] == 0) return 0.0;

    const double bn = static_cast<double>(b);
    double pi[2], q[2][2], qc[2];
    for (int g = 0; g < 2; ++g) {
        pi[g] = static_cast<double>(c[g]) / bn;
        q[g][1] = s[g] / static_cast<double>(c[g]);
        q[g][0] = 1.0 - q[g][1];
    }
    for (int cl = 0; cl < 2; ++cl) qc[cl] = pi[0] * q[0][cl] + pi[1] * q[1][cl];

    double pen = 0.0;
    for (int g = 0; g < 2; ++g)
        for (int cl = 0; cl < 2; ++cl)
            pen += pi[g] * q[g][cl] * (std::log(q[g][cl] + kLogEps) - std::log(qc[cl] + kLogEps));

    if (dpen_dp) {
        for (int g = 0; g < 2; ++g) {
            // d pen / d (group-g mean prediction), with all epsilon terms kept
            // so finite differences agree exactly.
            const double da =
                pi[g] * (std::log(q[g][1] + kLogEps) - std::log(qc[1] + kLogEps) - std::log(q[g][0] + kLogEps) +
                         std::log(qc[0] + kLogEps) + q[g][1] / (q[g][1] + kLogEps) - q[g][0] / (q[g][0] + kLogEps) -
                         qc[1] / (qc[1] + kLogEps) + qc[0] / (qc[0] + kLogEps));
            for (Eigen::Index i = 0; i < b; ++i)
                if (t[i] == g) (*dpen_dp)[i] = da / static_cast<double>(c[g]);
        }
    }
    return pen;
}

ObjectiveResult objective(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXi& t,
                          const Eigen::VectorXi& y, const TrainConfig& cfg) {
    const Eigen::Index b = x.rows();
    if (b == 0) throw SizeError("objective: empty batch");

    const auto fwd = m.forward(x);
    const Eigen::VectorXd& p = fwd.probs;

    double bce = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) bce += softplus(fwd.logits[i]) - y[i] * fwd.logits[i];
    bce /= static_cast<double>(b);

    Eigen::VectorXd dloss_dz = (p - y.cast<double>()) / static_cast<double>(b);

    double pen = 0.0;
    const bool penalized = cfg.method != Method::ERM && cfg.lambda != 0.0;
    if (penalized) {
        Eigen::VectorXd dpen_dp(b);
        switch (cfg.method) {
            case Method::DiffDP: pen = penalty_diffdp(p, t, &dpen_dp); break;
            case Method::DiffEopp: pen = penalty_diffeopp(p, t, y, &dpen_dp); break;
            case Method::DiffEodd: pen = penalty_diffeodd(p, t, y, &dpen_dp); break;
            case Method::HSIC: {
                const double bw_p =
                    cfg.hsic_bandwidth_pred > 0.0 ? cfg.hsic_bandwidth_pred : median_heuristic_bandwidth(p);
                const double bw_t = cfg.hsic_bandwidth_attr > 0.0 ? cfg.hsic_bandwidth_attr
                                                                  : median_heuristic_bandwidth(t.cast<double>());
                pen = penalty_hsic(p, t, bw_p, bw_t, &dpen_dp);
                break;
            }
            case Method::PRemover: pen = penalty_premover(p, t, &dpen_dp); break;
            case Method::ERM: break;
        }
        // Chain through the sigmoid: dz = dp * p(1-p).
        dloss_dz.array() += cfg.lambda * dpen_dp.array() * p.array() * (1.0 - p.array());
    }

    ObjectiveResult r;
    r.loss = bce + cfg.lambda * pen;
    r.grad = m.backward(x, fwd, dloss_dz);
    return r;
}

std::vector<std::vector<int>> epoch_batches(const Dataset& d, const TrainConfig& cfg, Rng& rng) {
    const int n = static_cast<int>(d.size());
    const int b = cfg.batch_size;
    if (b < 1) throw ConfigError("batch_size must be >= 1");
    const int num_batches = (n + b - 1) / b;
    std::vector<std::vector<int>> batches;
    batches.reserve(static_cast<std::size_t>(num_batches));

    if (!cfg.balanced) {
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int s = 0; s < n; s += b) {
            batches.emplace_back(idx.begin() + s, idx.begin() + std::min(n, s + b));
        }
        return batches;
    }

    std::vector<int> grp[2];
    for (int i = 0; i < n; ++i) grp[d.sensitive()[i]].push_back(i);
    if (grp[0].empty() || grp[1].empty())
        throw ConfigError("balanced batches require both sensitive groups to be nonempty");
    std::shuffle(grp[0].begin(), grp[0].end(), rng);
    std::shuffle(grp[1].begin(), grp[1].end(), rng);
    std::size_t cur[2] = {0, 0};
    const int want[2] = {(b + 1) / 2, b / 2};
    // The epoch ends when the scarcer group is exhausted, so no sample is
    // revisited within an epoch; revisiting the minority lets group-mean
    // penalties latch onto individual rows and inflates the held-out gap.
    int limited = num_batches;
    for (int g = 0; g < 2; ++g)
        limited = std::min(limited, static_cast<int>(grp[g].size()) / std::max(1, want[g]));
    limited = std::max(1, limited);
    for (int k = 0; k < limited; ++k) {
        std::vector<int> batch;
        batch.reserve(static_cast<std::size_t>(b));
        for (int g = 0; g < 2; ++g) {
            for (int j = 0; j < want[g]; ++j) {
                if (cur[g] == grp[g].size()) {  // only reachable when a group is smaller than one batch
                    std::shuffle(grp[g].begin(), grp[g].end(), rng);
                    cur[g] = 0;
                }
                batch.push_back(grp[g][cur[g]++]);
            }
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

namespace {

struct AdamState {
    Eigen::VectorXd m, v;
    long step = 0;
    explicit AdamState(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

}  // namespace

Model train(Model model, const Dataset& d, const TrainConfig& cfg) {
    if (d.size() == 0) throw SizeError("train: empty dataset");
    Rng rng(cfg.seed);
    AdamState adam(model.param_count());

    Eigen::MatrixXd xb;
    Eigen::VectorXi tb, yb;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& batch : epoch_batches(d, cfg, rng)) {
            const Eigen::Index bs = static_cast<Eigen::Index>(batch.size());
            xb.resize(bs, d.feature_dim());
            tb.resize(bs);
            yb.resize(bs);
            for (Eigen::Index i = 0; i < bs; ++i) {
                xb.row(i) = d.features().row(batch[static_cast<std::size_t>(i)]);
                tb[i] = d.sensitive()[batch[static_cast<std::size_t>(i)]];
                yb[i] = d.labels()[batch[static_cast<std::size_t>(i)]];
            }
            auto res = objective(model, xb, tb, yb, cfg);
            if (cfg.optimizer == OptimizerKind::SGD) {
                model.params() -= cfg.learning_rate * res.grad;
            } else {
                ++adam.step;
                adam.m = cfg.adam_beta1 * adam.m + (1.0 - cfg.adam_beta1) * res.grad;
                adam.v = cfg.adam_beta2 * adam.v + (1.0 - cfg.adam_beta2) * res.grad.array().square().matrix();
                const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.step));
                const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.step));
                model.params().array() -= cfg.learning_rate * (adam.m.array() / bc1) /
                                          ((adam.v.array() / bc2).sqrt() + cfg.adam_eps);
            }
        }
    }
    return model;
}

double grad_check(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXi& t, const Eigen::VectorXi& y,
                  TrainConfig cfg, double h) {
    // Pin data-dependent bandwidths so the sweep differentiates a fixed function.
    if (cfg.method == Method::HSIC) {
        const Eigen::VectorXd p = m.predict(x);
        if (cfg.hsic_bandwidth_pred <= 0.0) cfg.hsic_bandwidth_pred = median_heuristic_bandwidth(p);
        if (cfg.hsic_bandwidth_attr <= 0.0) cfg.hsic_bandwidth_attr = median_heuristic_bandwidth(t.cast<double>());
    }
    const Eigen::VectorXd analytic = objective(m, x, t, y, cfg).grad;
    Model probe = m;
    double max_err = 0.0;
    for (Eigen::Index j = 0; j < probe.params().size(); ++j) {
        const double orig = probe.params()[j];
        probe.params()[j] = orig + h;
        const double lp = objective(probe, x, t, y, cfg).loss;
        probe.params()[j] = orig - h;
        const double lm = objective(probe, x, t, y, cfg).loss;
        probe.params()[j] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double err = std::abs(analytic[j] - fd) / std::max(std::abs(analytic[j]) + std::abs(fd), 1e-6);
        max_err = std::max(max_err, err);
    }
    return max_err;
}

double accuracy(const Model& m, const Dataset& d) {
    const Eigen::VectorXd p = m.predict(d.features());
    long correct = 0;
    for (Eigen::Index i = 0; i < d.size(); ++i)
        if ((p[i] >= 0.5 ? 1 : 0) == d.labels()[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(d.size());
}

}  // namespace fairgen
