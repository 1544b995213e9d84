#include "fairgen/mi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>

#include "fairgen/errors.hpp"
#include "fairgen/rng.hpp"

namespace fairgen {

double digamma(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("digamma: requires x > 0");
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x, inv2 = inv * inv;
    // ln x - 1/(2x) - 1/(12x^2) + 1/(120x^4) - 1/(252x^6) + 1/(240x^8)
    return acc + std::log(x) - 0.5 * inv -
           inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
}

namespace {

// Rank each point by lexicographic row value; exact-tie groups are ordered by
// interleaving their classes proportionally (stratified by the (j+1/2)/c_b
// rule), so the jitter neither separates classes artificially nor depends on
// the input permutation — identical points are interchangeable.
std::vector<double> tie_jitter(const std::vector<int>& labels, const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto value_less = [&](int a, int b) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
        }
        return false;
    };
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (value_less(a, b)) return true;
        if (value_less(b, a)) return false;
        return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)];
    });

    // Reorder each run of identical values by a hash of (value, class,
    // occurrence index). A regular class interleave would make the neighbor
    // counts deterministic and skew the digamma terms; the hash order behaves
    // like the usual random tie-breaking noise while staying reproducible.
    for (std::size_t run = 0; run < order.size();) {
        std::size_t end = run + 1;
        while (end < order.size() && !value_less(order[run], order[end])) ++end;
        if (end - run > 1) {
            std::uint64_t h = 0x51ed270b76a48c33ULL;
            const int rep = order[run];
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                std::uint64_t bits;
                const double v = x(rep, c);
                std::memcpy(&bits, &v, sizeof bits);
                h = mix64(h ^ bits);
            }
            std::map<int, long> seen;
            std::vector<std::pair<std::uint64_t, int>> keyed;
            keyed.reserve(end - run);
            for (std::size_t i = run; i < end; ++i) {
                const int lbl = labels[static_cast<std::size_t>(order[i])];
                const long j = seen[lbl]++;
                keyed.emplace_back(mix64(h ^ mix64(static_cast<std::uint64_t>(lbl) * 0x9e3779b97f4a7c15ULL +
                                                   static_cast<std::uint64_t>(j))),
                                   order[i]);
            }
            std::sort(keyed.begin(), keyed.end());
            for (std::size_t i = run; i < end; ++i) order[i] = keyed[i - run].second;
        }
        run = end;
    }

    // Base scale: far below the smallest nonzero coordinate gap.
    double min_gap = std::numeric_limits<double>::infinity();
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = x(i, c);
        std::sort(col.begin(), col.end());
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            const double g = col[static_cast<std::size_t>(i + 1)] - col[static_cast<std::size_t>(i)];
            if (g > 0.0) min_gap = std::min(min_gap, g);
        }
    }
    const double base = std::isfinite(min_gap) ? min_gap * 1e-4 / static_cast<double>(n) : 1e-12;

    std::vector<double> jitter(static_cast<std::size_t>(n));
    for (std::size_t rank = 0; rank < order.size(); ++rank)
        jitter[static_cast<std::size_t>(order[rank])] = base * static_cast<double>(rank);
    return jitter;
}

}  // namespace

MIEstimate mi_disc_cont(const std::vector<int>& labels, const Eigen::MatrixXd& x, int k) {
    const Eigen::Index n = x.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw SizeError("mi_disc_cont: label/point count mismatch");
    if (k < 1) throw std::invalid_argument("mi_disc_cont: k must be >= 1");
    if (n < 2 * (k + 1))
        throw EstimationError("mi_disc_cont: need at least 2(k+1) samples, got " + std::to_string(n));

    std::map<int, long> class_count;
    for (int b : labels) ++class_count[b];
    for (const auto& [b, cnt] : class_count) {
        if (cnt <= k)
            throw EstimationError("mi_disc_cont: class " + std::to_string(b) + " has " + std::to_string(cnt) +
                                  " members, need > k = " + std::to_string(k));
    }

    const std::vector<double> jitter = tie_jitter(labels, x);

    // Max-norm distance with the diagonal jitter applied to every coordinate.
    auto dist = [&](Eigen::Index i, Eigen::Index j) {
        double d = 0.0;
        const double dj = jitter[static_cast<std::size_t>(i)] - jitter[static_cast<std::size_t>(j)];
        for (Eigen::Index c = 0; c < x.cols(); ++c) d = std::max(d, std::abs(x(i, c) - x(j, c) + dj));
        return d;
    };

    std::vector<double> same;
    double sum_psi_nb = 0.0, sum_psi_m = 0.0;
    std::vector<double> drow(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        same.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = dist(i, j);
            drow[static_cast<std::size_t>(j)] = d;
            if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) same.push_back(d);
        }
        auto kth = same.begin() + (k - 1);
        std::nth_element(same.begin(), kth, same.end());
        const double radius = *kth;
        const double threshold = radius > 0.0 ? std::nextafter(radius, 0.0) : 0.0;
        long m = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i && drow[static_cast<std::size_t>(j)] <= threshold) ++m;
        sum_psi_m += digamma(static_cast<double>(m + 1));
        sum_psi_nb += digamma(static_cast<double>(class_count[labels[static_cast<std::size_t>(i)]]));
    }

    MIEstimate e;
    e.estimator = "knn-ross";
    e.k = k;
    e.n_samples = static_cast<int>(n);
    e.raw = digamma(static_cast<double>(n)) - sum_psi_nb / static_cast<double>(n) + digamma(static_cast<double>(k)) -
            sum_psi_m / static_cast<double>(n);
    e.value = std::max(0.0, e.raw);
    return e;
}

MIEstimate mi_disc_cont(const std::vector<int>& labels, const std::vector<double>& x, int k) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
    return mi_disc_cont(labels, m, k);
}

MIEstimate mi_plugin_discrete(const std::vector<std::pair<int, int>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("mi_plugin_discrete: empty input");
    std::map<std::pair<int, int>, long> joint;
    std::map<int, long> ma, mb;
    for (const auto& p : pairs) {
        ++joint[p];
        ++ma[p.first];
        ++mb[p.second];
    }
    const double n = static_cast<double>(pairs.size());
    double mi = 0.0;
    for (const auto& [ab, cnt] : joint) {
        const double pab = static_cast<double>(cnt) / n;
        const double pa = static_cast<double>(ma[ab.first]) / n;
        const double pb = static_cast<double>(mb[ab.second]) / n;
        mi += pab * std::log(pab / (pa * pb));
    }
    MIEstimate e;
    e.estimator = "plugin-discrete";
    e.n_samples = static_cast<int>(pairs.size());
    e.raw = mi;
    e.value = std::max(0.0, mi);
    return e;
}

namespace {

void partition_cells(const Eigen::MatrixXd& x, const std::vector<double>& jitter, std::vector<int>& points,
                     int depth, int next_id, std::vector<int>& cell, int* id_counter) {
    if (depth == 0 || points.size() < 8) {
        for (int p : points) cell[static_cast<std::size_t>(p)] = next_id;
        return;
    }
    // Widest dimension in this cell.
    Eigen::Index dim = 0;
    double best_span = -1.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int p : points) {
            lo = std::min(lo, x(p, c));
            hi = std::max(hi, x(p, c));
        }
        if (hi - lo > best_span) {
            best_span = hi - lo;
            dim = c;
        }
    }
    auto key = [&](int p) { return x(p, dim) + jitter[static_cast<std::size_t>(p)]; };
    auto mid = points.begin() + static_cast<std::ptrdiff_t>(points.size() / 2);
    std::nth_element(points.begin(), mid, points.end(), [&](int a, int b) { return key(a) < key(b); });
    std::vector<int> left(points.begin(), mid), right(mid, points.end());
    const int left_id = (*id_counter)++;
    const int right_id = (*id_counter)++;
    partition_cells(x, jitter, left, depth - 1, left_id, cell, id_counter);
    partition_cells(x, jitter, right, depth - 1, right_id, cell, id_counter);
}

}  // namespace

MIEstimate mi_partitioning(const std::vector<int>& labels, const Eigen::MatrixXd& x, int depth) {
    const Eigen::Index n = x.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw SizeError("mi_partitioning: label/point count mismatch");
    if (n < 2) throw EstimationError("mi_partitioning: need at least 2 samples");
    const std::vector<double> jitter = tie_jitter(labels, x);
    std::vector<int> points(static_cast<std::size_t>(n));
    std::iota(points.begin(), points.end(), 0);
    std::vector<int> cell(static_cast<std::size_t>(n), 0);
    int id_counter = 1;
    partition_cells(x, jitter, points, depth, 0, cell, &id_counter);

    std::vector<std::pair<int, int>> pairs(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i] = {labels[i], cell[i]};
    MIEstimate e = mi_plugin_discrete(pairs);
    e.estimator = "partitioning";
    return e;
}

}  // namespace fairgen
