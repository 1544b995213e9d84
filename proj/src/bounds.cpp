#include "fairgen/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fairgen/errors.hpp"
#include "fairgen/mi.hpp"

namespace fairgen {

namespace {

double binomial_at_most(int n, int m, long cap) {
    double c = 1.0;
    for (int i = 0; i < m; ++i) {
        c *= static_cast<double>(n - i) / static_cast<double>(i + 1);
        if (c > static_cast<double>(cap)) return static_cast<double>(cap) + 1.0;
    }
    return c;
}

}  // namespace

std::vector<SubsetContext> subsets(int n, int m, int budget, Rng& rng) {
    if (m > n) throw SizeError("subsets: m exceeds n");
    if (m < 1) throw std::invalid_argument("subsets: m must be >= 1");
    std::vector<SubsetContext> out;
    const double total = binomial_at_most(n, m, budget);
    if (total <= static_cast<double>(budget)) {
        // Full enumeration in lexicographic order.
        std::vector<int> idx(static_cast<std::size_t>(m));
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            out.push_back(SubsetContext{idx});
            int i = m - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - m + i) --i;
            if (i < 0) break;
            ++idx[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < m; ++j)
                idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
        return out;
    }
    // Distinct uniform samples (rejection on the sorted index vector).
    std::set<std::vector<int>> seen;
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    while (static_cast<int>(out.size()) < budget) {
        // Partial Fisher-Yates for the first m slots.
        for (int i = 0; i < m; ++i) {
            std::uniform_int_distribution<int> pick(i, n - 1);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
        }
        std::vector<int> idx(pool.begin(), pool.begin() + m);
        std::sort(idx.begin(), idx.end());
        if (seen.insert(idx).second) out.push_back(SubsetContext{std::move(idx)});
    }
    return out;
}

std::vector<std::uint8_t> PhiPattern::minus_mask() const {
    std::vector<std::uint8_t> m(phi.size() + 1);
    m[0] = 0;
    std::copy(phi.begin(), phi.end(), m.begin() + 1);
    return m;
}

std::vector<std::uint8_t> PhiPattern::plus_mask() const {
    std::vector<std::uint8_t> m(phi.size() + 1);
    m[0] = 1;
    for (std::size_t i = 0; i < phi.size(); ++i) m[i + 1] = static_cast<std::uint8_t>(phi[i] ^ 1);
    return m;
}

PhiPattern phi_of(const SelectionVector& r, const SubsetContext& u) {
    if (u.indices.empty()) throw SizeError("phi_of: empty subset");
    for (int i : u.indices)
        if (i < 0 || i >= static_cast<int>(r.size())) throw SizeError("phi_of: subset index out of range");
    PhiPattern p;
    const std::uint8_t r1 = r[static_cast<std::size_t>(u.indices[0])];
    p.phi.resize(u.indices.size() - 1);
    for (std::size_t i = 1; i < u.indices.size(); ++i)
        p.phi[i - 1] = static_cast<std::uint8_t>(r1 ^ r[static_cast<std::size_t>(u.indices[i])]);
    return p;
}

namespace {

struct MaskedSet {
    Eigen::VectorXd preds;
    Eigen::VectorXi t, y;
    int num_classes = 2;
};

MaskedSet masked_set(const Eigen::VectorXd& preds0, const Eigen::VectorXd& preds1, const SuperSample& ss,
                     const SubsetContext& u, const std::vector<std::uint8_t>& mask) {
    MaskedSet s;
    const auto m = static_cast<Eigen::Index>(u.indices.size());
    s.preds.resize(m);
    s.t.resize(m);
    s.y.resize(m);
    s.num_classes = ss.side0.num_classes();
    for (Eigen::Index i = 0; i < m; ++i) {
        const int idx = u.indices[static_cast<std::size_t>(i)];
        if (mask[static_cast<std::size_t>(i)]) {
            s.preds[i] = preds1[idx];
            s.t[i] = ss.side1.sensitive()[idx];
            s.y[i] = ss.side1.labels()[idx];
        } else {
            s.preds[i] = preds0[idx];
            s.t[i] = ss.side0.sensitive()[idx];
            s.y[i] = ss.side0.labels()[idx];
        }
    }
    return s;
}

long min_subgroup(const Eigen::VectorXi& t, const Eigen::VectorXi& y) {
    long cnt[2][2] = {{0, 0}, {0, 0}};
    for (Eigen::Index i = 0; i < t.size(); ++i) ++cnt[t[i]][y[i] == 0 ? 0 : 1];
    return std::min({cnt[0][0], cnt[0][1], cnt[1][0], cnt[1][1]});
}

double sum_inv_shifted(std::span<const long> counts) {
    double s = 0.0;
    for (long c : counts) s += 1.0 / (static_cast<double>(c) + 2.0);
    return s;
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

BoundEstimate bound_deltal(const std::vector<std::vector<SubsetSamples>>& per_z, int m, int k, double scale,
                           const std::string& theorem) {
    if (per_z.empty()) throw std::invalid_argument("bound: no supersample draws");
    BoundEstimate b;
    b.theorem = theorem;
    b.m = m;
    double coeff_acc = 0.0, mi_acc = 0.0;
    long cells = 0;
    for (const auto& us : per_z) {
        if (us.empty()) throw std::invalid_argument("bound: supersample draw with no subsets");
        double z_acc = 0.0;
        for (const auto& s : us) {
            const MIEstimate mi = mi_disc_cont(s.r_u1, s.delta, k);
            z_acc += std::sqrt(scale * s.coeff * mi.value);
            coeff_acc += s.coeff;
            mi_acc += mi.value;
            ++cells;
        }
        b.per_z.push_back(z_acc / static_cast<double>(us.size()));
    }
    b.value = std::accumulate(b.per_z.begin(), b.per_z.end(), 0.0) / static_cast<double>(b.per_z.size());
    b.stddev = sample_std(b.per_z, b.value);
    b.coefficient = coeff_acc / static_cast<double>(cells);
    b.mi = mi_acc / static_cast<double>(cells);
    return b;
}

}  // namespace

LossPair loss_pair(const Predictor& predict, const SuperSample& ss, const SelectionVector& r,
                   const SubsetContext& u, Metric metric) {
    return loss_pair(predict(ss.side0.features()), predict(ss.side1.features()), ss, r, u, metric);
}

LossPair loss_pair(const Eigen::VectorXd& preds0, const Eigen::VectorXd& preds1, const SuperSample& ss,
                   const SelectionVector& r, const SubsetContext& u, Metric metric) {
    if (static_cast<Eigen::Index>(r.size()) != ss.size())
        throw SizeError("loss_pair: selection vector length mismatch");
    const PhiPattern phi = phi_of(r, u);

    LossPair lp;
    lp.r_u1 = r[static_cast<std::size_t>(u.indices[0])];
    const MaskedSet minus = masked_set(preds0, preds1, ss, u, phi.minus_mask());
    const MaskedSet plus = masked_set(preds0, preds1, ss, u, phi.plus_mask());
    lp.l_minus = fairness_loss(metric, minus.preds, minus.t, minus.y, minus.num_classes);
    lp.l_plus = fairness_loss(metric, plus.preds, plus.t, plus.y, plus.num_classes);
    lp.delta = lp.l_plus - lp.l_minus;
    for (Eigen::Index i = 0; i < minus.t.size(); ++i) ++lp.minus_dp_counts[static_cast<std::size_t>(minus.t[i])];
    for (Eigen::Index i = 0; i < plus.t.size(); ++i) ++lp.plus_dp_counts[static_cast<std::size_t>(plus.t[i])];
    lp.minus_min_subgroup = min_subgroup(minus.t, minus.y);
    lp.plus_min_subgroup = min_subgroup(plus.t, plus.y);
    return lp;
}

double coeff_dp(std::span<const std::array<long, 4>> counts) {
    if (counts.empty()) throw std::invalid_argument("coeff_dp: no draws");
    double acc = 0.0;
    for (const auto& row : counts) {
        const double s = sum_inv_shifted(std::span<const long>(row.data(), row.size()));
        acc += s * s;
    }
    return acc / static_cast<double>(counts.size());
}

double coeff_eo(std::span<const std::array<long, 2>> minima) {
    if (minima.empty()) throw std::invalid_argument("coeff_eo: no draws");
    double acc = 0.0;
    for (const auto& row : minima) {
        const double s = sum_inv_shifted(std::span<const long>(row.data(), row.size()));
        acc += s * s;
    }
    return acc / static_cast<double>(minima.size());
}

BoundEstimate bound_deltal_dp(const std::vector<std::vector<SubsetSamples>>& per_z, int m, int k) {
    return bound_deltal(per_z, m, k, static_cast<double>(m) / 2.0, "deltal-cmi-dp");
}

BoundEstimate bound_deltal_eo(const std::vector<std::vector<SubsetSamples>>& per_z, int m, int k) {
    if (m < 4) throw std::invalid_argument("bound_deltal_eo: requires m >= 4");
    return bound_deltal(per_z, m, k, 2.0 * static_cast<double>(m), "deltal-cmi-eo");
}

BoundEstimate bound_ecmi_dp(const std::vector<std::vector<EcmiSamples>>& per_z, int m, int k) {
    if (per_z.empty()) throw std::invalid_argument("bound_ecmi_dp: no supersample draws");
    BoundEstimate b;
    b.theorem = "e-cmi-dp";
    b.m = m;
    const double scale = static_cast<double>(m) / 2.0;
    double coeff_acc = 0.0, mi_acc = 0.0;
    long cells = 0;
    for (const auto& us : per_z) {
        double z_acc = 0.0;
        for (const auto& s : us) {
            Eigen::MatrixXd x(static_cast<Eigen::Index>(s.losses.size()), 2);
            for (std::size_t i = 0; i < s.losses.size(); ++i) {
                x(static_cast<Eigen::Index>(i), 0) = s.losses[i][0];
                x(static_cast<Eigen::Index>(i), 1) = s.losses[i][1];
            }
            const MIEstimate mi = mi_disc_cont(s.r_pattern, x, k);
            z_acc += std::sqrt(scale * s.coeff * mi.value);
            coeff_acc += s.coeff;
            mi_acc += mi.value;
            ++cells;
        }
        b.per_z.push_back(z_acc / static_cast<double>(us.size()));
    }
    b.value = std::accumulate(b.per_z.begin(), b.per_z.end(), 0.0) / static_cast<double>(b.per_z.size());
    b.stddev = sample_std(b.per_z, b.value);
    b.coefficient = coeff_acc / static_cast<double>(cells);
    b.mi = mi_acc / static_cast<double>(cells);
    return b;
}

double coeff_only(CoeffTheorem theorem, int m, std::span<const std::vector<long>> count_rows) {
    if (count_rows.empty()) throw std::invalid_argument("coeff_only: no draws");
    double acc = 0.0;
    for (const auto& row : count_rows) {
        const double s = sum_inv_shifted(row);
        acc += s * s;
    }
    acc /= static_cast<double>(count_rows.size());
    switch (theorem) {
        case CoeffTheorem::MIBound:
        case CoeffTheorem::CMIBound:
        case CoeffTheorem::FCMIBound: return 0.5 * static_cast<double>(m) * acc;
        case CoeffTheorem::EOMIBound: return 2.0 * static_cast<double>(m) * acc;
    }
    return 0.0;
}

}  // namespace fairgen
