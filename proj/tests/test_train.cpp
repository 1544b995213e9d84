#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>

#include "fairgen/errors.hpp"
#include "fairgen/fairloss.hpp"
#include "fairgen/harness.hpp"
#include "fairgen/train.hpp"

using namespace fairgen;

namespace {

struct Batch {
    Eigen::MatrixXd x;
    Eigen::VectorXi t, y;
};

Batch random_batch(int n, int dim, std::uint64_t seed, double p_t0 = 0.4) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Batch b;
    b.x.resize(n, dim);
    b.t.resize(n);
    b.y.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) b.x(i, j) = normal(rng);
        b.t[i] = u(rng) < p_t0 ? 0 : 1;
        b.y[i] = u(rng) < 0.5 ? 0 : 1;
    }
    return b;
}

Dataset batch_dataset(const Batch& b) { return Dataset(b.x, b.t, b.y, 2); }

}  // namespace

TEST_CASE("predict basics") {
    Arch logreg;
    logreg.input_dim = 3;
    Model zero(logreg, Eigen::VectorXd::Zero(logreg.param_count()));
    Eigen::MatrixXd x(1, 3);
    x << 0.5, -1.0, 2.0;
    CHECK(zero.predict(x)[0] == doctest::Approx(0.5));

    // Large positive logit saturates towards 1 monotonically.
    Eigen::VectorXd w(4);
    w << 1.0, 0.0, 0.0, 0.0;
    Model m(logreg, w);
    double prev = 0.5;
    for (double scale : {1.0, 5.0, 25.0, 125.0}) {
        Eigen::MatrixXd xi(1, 3);
        xi << scale, 0.0, 0.0;
        const double p = m.predict(xi)[0];
        CHECK(p > prev);
        prev = p;
    }
    CHECK(prev > 1.0 - 1e-6);

    // Same seed gives a bit-identical MLP and predictions.
    const Arch mlp = Arch::parse("mlp-64", 5);
    const Model a = Model::init(mlp, 99), b = Model::init(mlp, 99);
    CHECK(a.params() == b.params());
    const Batch batch = random_batch(7, 5, 3);
    CHECK(a.predict(batch.x) == b.predict(batch.x));
    CHECK(a.digest() == b.digest());

    // Predictions stay in [0,1] whatever the parameters.
    for (std::uint64_t s : {1ULL, 2ULL, 3ULL}) {
        Model r = Model::init(mlp, s);
        r.params() *= 40.0;
        const Eigen::VectorXd p = r.predict(batch.x);
        CHECK((p.array() >= 0.0).all());
        CHECK((p.array() <= 1.0).all());
    }
}

TEST_CASE("multiclass head predicts argmax with low-index ties") {
    Arch multi;
    multi.input_dim = 2;
    multi.num_outputs = 3;
    // Zero parameters: uniform softmax, every row ties -> class 0.
    const Model m(multi, Eigen::VectorXd::Zero(multi.param_count()));
    Eigen::MatrixXd x(2, 2);
    x << 1.0, 2.0, -1.0, 0.5;
    const Eigen::VectorXi cls = m.predict_class(x);
    CHECK(cls[0] == 0);
    CHECK(cls[1] == 0);
    const Eigen::MatrixXd proba = m.predict_proba(x);
    CHECK(proba.rowwise().sum().isApprox(Eigen::VectorXd::Ones(2)));
}

TEST_CASE("model checkpoint round-trips bit-exactly") {
    const Arch mlp = Arch::parse("mlp-8x4", 6);
    const Model m = Model::init(mlp, 1234);
    const std::string path = "/tmp/fairgen_test_model.ckpt";
    m.save(path);
    const Model r = Model::load(path);
    CHECK(r.params() == m.params());
    CHECK(r.arch().hidden == m.arch().hidden);
    CHECK(r.digest() == m.digest());
    std::remove(path.c_str());
}

TEST_CASE("objective with lambda=0 is plain BCE") {
    // One-sample logreg: grad = (sigma(w.x) - y) x, bias grad = sigma - y.
    Arch logreg;
    logreg.input_dim = 2;
    Eigen::VectorXd w(3);
    w << 0.3, -0.7, 0.1;
    const Model m(logreg, w);
    Eigen::MatrixXd x(1, 2);
    x << 1.5, -0.5;
    Eigen::VectorXi t(1), y(1);
    t << 0;
    y << 1;
    TrainConfig cfg;
    cfg.method = Method::ERM;
    const auto res = objective(m, x, t, y, cfg);
    const double z = 0.3 * 1.5 + (-0.7) * (-0.5) + 0.1;
    const double p = 1.0 / (1.0 + std::exp(-z));
    CHECK(res.loss == doctest::Approx(-std::log(p)).epsilon(1e-12));
    CHECK(res.grad[0] == doctest::Approx((p - 1.0) * 1.5).epsilon(1e-12));
    CHECK(res.grad[1] == doctest::Approx((p - 1.0) * -0.5).epsilon(1e-12));
    CHECK(res.grad[2] == doctest::Approx(p - 1.0).epsilon(1e-12));

    CHECK_THROWS_AS(objective(m, Eigen::MatrixXd(0, 2), Eigen::VectorXi(), Eigen::VectorXi(), cfg), SizeError);
}

TEST_CASE("penalty values") {
    Eigen::VectorXd p(4);
    Eigen::VectorXi t(4), y(4);

    SUBCASE("diffdp") {
        p << 0.2, 0.4, 0.9, 0.5;
        t << 0, 0, 1, 1;
        CHECK(penalty_diffdp(p, t) == doctest::Approx(std::abs(0.3 - 0.7)).epsilon(1e-6));
        // Symmetric batch.
        Eigen::VectorXd ps(4);
        ps << 0.3, 0.8, 0.3, 0.8;
        CHECK(penalty_diffdp(ps, t) == doctest::Approx(0.0).epsilon(1e-9));
        // One-group batch is 0 by convention.
        Eigen::VectorXi t1 = Eigen::VectorXi::Zero(4);
        CHECK(penalty_diffdp(p, t1) == doctest::Approx(0.0));
    }

    SUBCASE("diffeopp and diffeodd strata") {
        p << 0.9, 0.1, 0.6, 0.2;
        t << 0, 0, 1, 1;
        y << 1, 0, 1, 0;
        // y=1 rows: (t0, 0.9), (t1, 0.6); y=0 rows: (t0, 0.1), (t1, 0.2).
        CHECK(penalty_diffeopp(p, t, y) == doctest::Approx(0.3).epsilon(1e-6));
        CHECK(penalty_diffeodd(p, t, y) == doctest::Approx(0.3 + 0.1).epsilon(1e-6));
        // No y=1 rows: eopp term vanishes.
        Eigen::VectorXi y0 = Eigen::VectorXi::Zero(4);
        CHECK(penalty_diffeopp(p, t, y0) == doctest::Approx(0.0));
    }

    SUBCASE("hsic") {
        // Constant predictions: centered kernel vanishes.
        Eigen::VectorXd pc = Eigen::VectorXd::Constant(4, 0.3);
        t << 0, 1, 0, 1;
        CHECK(penalty_hsic(pc, t, 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
        // Single-sample batch.
        Eigen::VectorXd p1(1);
        p1 << 0.7;
        Eigen::VectorXi t1(1);
        t1 << 1;
        CHECK(penalty_hsic(p1, t1, 1.0, 1.0) == doctest::Approx(0.0));
        // preds = t exactly, bandwidth 8: dense-matrix evaluation in-test.
        const int n = 8;
        Eigen::VectorXd p8(n);
        Eigen::VectorXi t8(n);
        for (int i = 0; i < n; ++i) {
            t8[i] = i % 2;
            p8[i] = t8[i];
        }
        const double bw = 8.0;
        Eigen::MatrixXd K(n, n), L(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double dp = p8[i] - p8[j];
                const double dt = t8[i] - t8[j];
                K(i, j) = std::exp(-dp * dp / (2.0 * bw * bw));
                L(i, j) = std::exp(-dt * dt / (2.0 * bw * bw));
            }
        Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
        const double expect = (K * H * L * H).trace() / (n * n);
        CHECK(expect > 0.0);
        CHECK(penalty_hsic(p8, t8, bw, bw) == doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("premover") {
        // Group-independent predictions give zero prejudice index.
        p << 0.4, 0.4, 0.4, 0.4;
        t << 0, 0, 1, 1;
        CHECK(penalty_premover(p, t) == doctest::Approx(0.0).epsilon(1e-9));
        // Single-group batch.
        Eigen::VectorXi t1 = Eigen::VectorXi::Ones(4);
        CHECK(penalty_premover(p, t1) == doctest::Approx(0.0));
        // Hand value from the plug-in formula (eps negligible at this scale):
        // group0 mean 0.3, group1 mean 0.7, pi = (1/2, 1/2), q1 = q0 = 0.5.
        p << 0.2, 0.4, 0.9, 0.5;
        double expect = 0.0;
        const double pi[2] = {0.5, 0.5}, mean[2] = {0.3, 0.7};
        for (int g = 0; g < 2; ++g)
            for (int c = 0; c < 2; ++c) {
                const double q = c == 1 ? mean[g] : 1.0 - mean[g];
                expect += pi[g] * q * std::log(q / 0.5);
            }
        CHECK(penalty_premover(p, t) == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("gradient fidelity across methods and architectures") {
    const int dim = 6;
    std::map<Method, double> worst;
    for (Method method : {Method::ERM, Method::DiffDP, Method::DiffEopp, Method::DiffEodd, Method::HSIC,
                          Method::PRemover}) {
        for (const char* arch_name : {"logreg", "mlp-16"}) {
            for (int rep = 0; rep < 8; ++rep) {
                const Batch b = random_batch(12, dim, 1000 + static_cast<std::uint64_t>(rep));
                const Arch arch = Arch::parse(arch_name, dim);
                const Model m = Model::init(arch, 55 + static_cast<std::uint64_t>(rep));
                TrainConfig cfg;
                cfg.method = method;
                cfg.lambda = method == Method::ERM ? 0.0 : default_lambda(method);
                const double err = grad_check(m, b.x, b.t, b.y, cfg);
                worst[method] = std::max(worst[method], err);
            }
        }
        CHECK(worst[method] < 1e-4);
    }
    // Convex ERM cases are much tighter.
    const Batch b = random_batch(20, dim, 77);
    Arch logreg;
    logreg.input_dim = dim;
    TrainConfig erm;
    erm.method = Method::ERM;
    CHECK(grad_check(Model::init(logreg, 5), b.x, b.t, b.y, erm) < 1e-7);
}

TEST_CASE("grad check at a stationary point") {
    // w = 0 with label pairs (x,0),(x,1): BCE gradient vanishes exactly.
    Arch logreg;
    logreg.input_dim = 2;
    const Model m(logreg, Eigen::VectorXd::Zero(3));
    Eigen::MatrixXd x(2, 2);
    x << 0.7, -0.2, 0.7, -0.2;
    Eigen::VectorXi t(2), y(2);
    t << 0, 1;
    y << 0, 1;
    TrainConfig cfg;
    const auto res = objective(m, x, t, y, cfg);
    CHECK(res.grad.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
    // Central differences agree in the absolute sense.
    Model probe = m;
    for (int j = 0; j < 3; ++j) {
        const double h = 1e-5;
        probe.params()[j] = h;
        const double lp = objective(probe, x, t, y, cfg).loss;
        probe.params()[j] = -h;
        const double lm = objective(probe, x, t, y, cfg).loss;
        probe.params()[j] = 0.0;
        CHECK(std::abs((lp - lm) / (2 * h) - res.grad[j]) < 1e-8);
    }
}

TEST_CASE("epoch batches") {
    const Batch b = random_batch(100, 3, 9, 0.9);  // 90/10 imbalance
    const Dataset d = batch_dataset(b);

    TrainConfig cfg;
    cfg.batch_size = 8;

    SUBCASE("unbalanced epoch covers the dataset exactly once") {
        Rng rng(1);
        std::vector<int> seen;
        for (const auto& batch : epoch_batches(d, cfg, rng))
            seen.insert(seen.end(), batch.begin(), batch.end());
        std::sort(seen.begin(), seen.end());
        std::vector<int> want(100);
        std::iota(want.begin(), want.end(), 0);
        CHECK(seen == want);
    }

    SUBCASE("balanced batches hold the declared per-group counts") {
        cfg.balanced = true;
        Rng rng(2);
        const auto batches = epoch_batches(d, cfg, rng);
        // The scarcer group caps the epoch; no row repeats inside it.
        const auto counts = group_counts(d);
        const long expect = std::min(counts.dp[0] / 4, counts.dp[1] / 4);
        CHECK(static_cast<long>(batches.size()) == expect);
        std::map<int, int> occurrences;
        for (const auto& batch : batches) {
            int c0 = 0, c1 = 0;
            for (int i : batch) (d.sensitive()[i] == 0 ? c0 : c1)++;
            CHECK(c0 == 4);
            CHECK(c1 == 4);
            for (int i : batch) ++occurrences[i];
        }
        for (const auto& [i, cnt] : occurrences) CHECK(cnt == 1);
    }

    SUBCASE("a group smaller than one batch still yields a full batch") {
        Batch tinyb = random_batch(20, 3, 6);
        tinyb.t.setOnes();
        tinyb.t[3] = 0;
        tinyb.t[11] = 0;  // two minority rows, want 4 per batch
        const Dataset dt = batch_dataset(tinyb);
        cfg.balanced = true;
        Rng rng(4);
        const auto batches = epoch_batches(dt, cfg, rng);
        CHECK(batches.size() == 1);
        int c0 = 0;
        for (int i : batches[0]) c0 += dt.sensitive()[i] == 0;
        CHECK(c0 == 4);  // the tiny group refills to reach its quota
    }

    SUBCASE("balanced with an empty group is a config error") {
        Batch one = random_batch(10, 3, 4);
        one.t.setZero();
        const Dataset d1 = batch_dataset(one);
        cfg.balanced = true;
        Rng rng(3);
        CHECK_THROWS_AS(epoch_batches(d1, cfg, rng), ConfigError);
    }
}

TEST_CASE("training behavior") {
    SUBCASE("zero epochs returns the initial model") {
        const Batch b = random_batch(30, 4, 11);
        const Dataset d = batch_dataset(b);
        const Model init = Model::init(Arch::parse("mlp-8", 4), 7);
        TrainConfig cfg;
        cfg.epochs = 0;
        const Model out = train(init, d, cfg);
        CHECK(out.params() == init.params());
    }

    SUBCASE("full-batch logistic regression descends monotonically") {
        Eigen::MatrixXd x(2, 1);
        x << -1.0, 1.0;
        Eigen::VectorXi t(2), y(2);
        t << 0, 1;
        y << 0, 1;
        const Dataset d(x, t, y, 2);
        Arch logreg;
        logreg.input_dim = 1;
        Model m = Model::init(logreg, 3);
        TrainConfig cfg;
        cfg.optimizer = OptimizerKind::SGD;
        cfg.learning_rate = 0.5;
        cfg.batch_size = 2;
        cfg.epochs = 1;
        auto bce = [&](const Model& mm) {
            TrainConfig erm;
            return objective(mm, x, t, y, erm).loss;
        };
        double prev = bce(m);
        for (int e = 0; e < 30; ++e) {
            m = train(m, d, cfg);
            const double cur = bce(m);
            CHECK(cur < prev);
            prev = cur;
        }
    }

    SUBCASE("training is deterministic and ERM == lambda 0") {
        const Batch b = random_batch(120, 5, 13);
        const Dataset d = batch_dataset(b);
        const Model init = Model::init(Arch::parse("mlp-16", 5), 21);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.seed = 77;
        cfg.method = Method::DiffDP;
        cfg.lambda = 0.0;
        const Model a = train(init, d, cfg);
        TrainConfig erm = cfg;
        erm.method = Method::ERM;
        const Model c = train(init, d, erm);
        CHECK(a.params() == c.params());
        const Model rerun = train(init, d, cfg);
        CHECK(a.params() == rerun.params());
    }

    SUBCASE("a dominant DiffDP penalty drives the training DP gap to zero") {
        // Biased data: t is highly predictive of y, so unpenalized training
        // separates the groups.
        Rng rng(29);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const int n = 300;
        Eigen::MatrixXd x(n, 2);
        Eigen::VectorXi t(n), y(n);
        for (int i = 0; i < n; ++i) {
            t[i] = u(rng) < 0.5 ? 0 : 1;
            x(i, 0) = t[i] * 2.0 - 1.0 + 0.3 * normal(rng);
            x(i, 1) = normal(rng);
            y[i] = u(rng) < (t[i] ? 0.8 : 0.2) ? 1 : 0;
        }
        const Dataset d(x, t, y, 2);
        TrainConfig cfg;
        cfg.method = Method::DiffDP;
        cfg.lambda = 1000.0;
        cfg.epochs = 60;
        cfg.seed = 5;
        const Model m = train(Model::init(Arch::parse("mlp-16", 2), 9), d, cfg);
        CHECK(dp_loss(m.predictor(), d) < 0.01);
    }
}
