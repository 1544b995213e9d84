#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairgen/errors.hpp"
#include "fairgen/mi.hpp"
#include "fairgen/rng.hpp"

using namespace fairgen;

namespace {

// Differential entropy of the two-component Gaussian mixture 0.5 N(-mu,1) +
// 0.5 N(mu,1) by composite Simpson quadrature, giving the true MI
// I = h(X) - 0.5 ln(2 pi e) for the balanced binary-conditional model.
double gaussian_mixture_mi(double mu) {
    const double lo = -mu - 12.0, hi = mu + 12.0;
    const int steps = 40000;  // even
    const double h = (hi - lo) / steps;
    auto p = [mu](double x) {
        const double a = std::exp(-0.5 * (x - mu) * (x - mu));
        const double b = std::exp(-0.5 * (x + mu) * (x + mu));
        return 0.5 * (a + b) / std::sqrt(2.0 * M_PI);
    };
    auto f = [&](double x) {
        const double v = p(x);
        return v > 0.0 ? -v * std::log(v) : 0.0;
    };
    double acc = f(lo) + f(hi);
    for (int i = 1; i < steps; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
    const double entropy = acc * h / 3.0;
    return entropy - 0.5 * std::log(2.0 * M_PI * std::exp(1.0));
}

struct DiscContSample {
    std::vector<int> b;
    std::vector<double> x;
};

DiscContSample gaussian_pair(int n, double mu, double noise_sd, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> bit(0, 1);
    DiscContSample s;
    s.b.resize(static_cast<std::size_t>(n));
    s.x.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        s.b[static_cast<std::size_t>(i)] = bit(rng);
        s.x[static_cast<std::size_t>(i)] =
            (s.b[static_cast<std::size_t>(i)] ? mu : -mu) + noise_sd * normal(rng);
    }
    return s;
}

}  // namespace

TEST_CASE("digamma reference values") {
    const double euler = 0.57721566490153286;
    CHECK(digamma(1.0) == doctest::Approx(-euler).epsilon(1e-10));
    CHECK(digamma(2.0) == doctest::Approx(1.0 - euler).epsilon(1e-10));
    CHECK(digamma(0.5) == doctest::Approx(-euler - 2.0 * std::log(2.0)).epsilon(1e-10));
    // Recurrence psi(x+1) = psi(x) + 1/x on scattered points.
    for (double x : {0.3, 1.7, 4.2, 11.0, 150.0})
        CHECK(digamma(x + 1.0) == doctest::Approx(digamma(x) + 1.0 / x).epsilon(1e-10));
    CHECK_THROWS_AS(digamma(0.0), std::invalid_argument);
}

TEST_CASE("plugin MI on discrete pairs") {
    // Independent uniform pair over the full cross product.
    std::vector<std::pair<int, int>> indep;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 2; ++b)
            for (int rep = 0; rep < 5; ++rep) indep.push_back({a, b});
    CHECK(mi_plugin_discrete(indep).value == doctest::Approx(0.0).epsilon(1e-12));

    // Perfect binary copy: ln 2.
    std::vector<std::pair<int, int>> copy;
    for (int i = 0; i < 10; ++i) copy.push_back({i % 2, i % 2});
    CHECK(mi_plugin_discrete(copy).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // Arbitrary 3x2 empirical table, hand-evaluated:
    // counts: (0,0):2 (0,1):1 (1,0):1 (1,1):3 (2,0):2 (2,1):1, n=10.
    std::vector<std::pair<int, int>> table;
    auto add = [&table](int a, int b, int c) {
        for (int i = 0; i < c; ++i) table.push_back({a, b});
    };
    add(0, 0, 2);
    add(0, 1, 1);
    add(1, 0, 1);
    add(1, 1, 3);
    add(2, 0, 2);
    add(2, 1, 1);
    double expect = 0.0;
    const double pa[3] = {0.3, 0.4, 0.3};
    const double pb[2] = {0.5, 0.5};
    const double pj[3][2] = {{0.2, 0.1}, {0.1, 0.3}, {0.2, 0.1}};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 2; ++b) expect += pj[a][b] * std::log(pj[a][b] / (pa[a] * pb[b]));
    CHECK(mi_plugin_discrete(table).raw == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("knn MI estimator sanity at N=5000") {
    // Independent pair: |I| <= 0.02 nats.
    const auto indep = gaussian_pair(5000, 0.0, 1.0, 101);
    const MIEstimate e0 = mi_disc_cont(indep.b, indep.x, 3);
    CHECK(std::abs(e0.value) <= 0.02);

    // Near-deterministic binary copy: within 5% of ln 2.
    const auto copy = gaussian_pair(5000, 0.5, std::sqrt(1e-3), 202);
    const MIEstimate e1 = mi_disc_cont(copy.b, copy.x, 3);
    CHECK(e1.value >= 0.95 * std::log(2.0));
    CHECK(e1.value <= 1.05 * std::log(2.0));

    // Monotone in information at matched sample size.
    const auto noisy = gaussian_pair(5000, 1.0, 1.0, 303);
    const MIEstimate e2 = mi_disc_cont(noisy.b, noisy.x, 3);
    CHECK(e1.value > e2.value);
    CHECK(e2.value > e0.value);
}

TEST_CASE("knn MI matches the quadrature oracle for the Gaussian mixture") {
    const double mu = 1.0;
    const double truth = gaussian_mixture_mi(mu);
    const auto s = gaussian_pair(10000, mu, 1.0, 404);
    const MIEstimate e = mi_disc_cont(s.b, s.x, 3);
    CHECK(std::abs(e.value - truth) <= 0.03);
}

TEST_CASE("knn MI permutation invariance") {
    auto s = gaussian_pair(600, 0.8, 1.0, 505);
    const double base = mi_disc_cont(s.b, s.x, 3).value;
    Rng rng(66);
    std::vector<int> perm(s.b.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    DiscContSample sp;
    sp.b.resize(s.b.size());
    sp.x.resize(s.x.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        sp.b[i] = s.b[static_cast<std::size_t>(perm[i])];
        sp.x[i] = s.x[static_cast<std::size_t>(perm[i])];
    }
    CHECK(mi_disc_cont(sp.b, sp.x, 3).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("knn MI on discretized inputs tracks the plugin value") {
    // Three-level x correlated with b; ties dominate, the jitter rule decides.
    Rng rng(707);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int> b(10000);
    std::vector<double> x(10000);
    std::vector<std::pair<int, int>> pairs(10000);
    for (std::size_t i = 0; i < b.size(); ++i) {
        b[i] = u(rng) < 0.5 ? 0 : 1;
        const double r = u(rng);
        int level;
        if (b[i] == 0)
            level = r < 0.6 ? 0 : (r < 0.9 ? 1 : 2);
        else
            level = r < 0.2 ? 0 : (r < 0.5 ? 1 : 2);
        x[i] = static_cast<double>(level);
        pairs[i] = {b[i], level};
    }
    const double plugin = mi_plugin_discrete(pairs).value;
    const double knn = mi_disc_cont(b, x, 3).value;
    CHECK(std::abs(knn - plugin) <= 0.05);
}

TEST_CASE("knn MI guards") {
    std::vector<int> b = {0, 0, 0, 0, 1};
    std::vector<double> x = {0.1, 0.2, 0.3, 0.4, 0.5};
    CHECK_THROWS_AS(mi_disc_cont(b, x, 3), EstimationError);  // class 1 has <= k members
    std::vector<int> b2 = {0, 1};
    std::vector<double> x2 = {0.0, 1.0};
    CHECK_THROWS_AS(mi_disc_cont(b2, x2, 1), EstimationError);  // N < 2(k+1)
}

TEST_CASE("partitioning estimator mirrors the knn cases at looser tolerance") {
    const auto indep = gaussian_pair(5000, 0.0, 1.0, 808);
    Eigen::MatrixXd xi(5000, 1);
    for (int i = 0; i < 5000; ++i) xi(i, 0) = indep.x[static_cast<std::size_t>(i)];
    CHECK(mi_partitioning(indep.b, xi, 6).value <= 0.05);

    const auto copy = gaussian_pair(5000, 0.5, std::sqrt(1e-3), 909);
    Eigen::MatrixXd xc(5000, 1);
    for (int i = 0; i < 5000; ++i) xc(i, 0) = copy.x[static_cast<std::size_t>(i)];
    const double est = mi_partitioning(copy.b, xc, 6).value;
    CHECK(std::abs(est - std::log(2.0)) <= 0.05);

    const double truth = gaussian_mixture_mi(1.0);
    const auto mix = gaussian_pair(10000, 1.0, 1.0, 1010);
    Eigen::MatrixXd xm(10000, 1);
    for (int i = 0; i < 10000; ++i) xm(i, 0) = mix.x[static_cast<std::size_t>(i)];
    CHECK(std::abs(mi_partitioning(mix.b, xm, 6).value - truth) <= 0.05);
}
