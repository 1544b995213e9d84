#include "fairgen/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "fairgen/rng.hpp"

namespace fairgen {

namespace {

constexpr double kSlackTol = 1e-12;

// Visit every count vector over `atoms` atoms summing to m.
void for_each_multiset(int atoms, int m, std::vector<int>& counts, int atom,
                       const std::function<void(const std::vector<int>&)>& visit) {
    if (atom == atoms - 1) {
        counts[static_cast<std::size_t>(atom)] = m;
        visit(counts);
        return;
    }
    for (int c = 0; c <= m; ++c) {
        counts[static_cast<std::size_t>(atom)] = c;
        for_each_multiset(atoms, m - c, counts, atom + 1, visit);
    }
}

double inv_shift(long c) { return 1.0 / (static_cast<double>(c) + 2.0); }

void observe(OracleReport& r, double observed, double bound) {
    const double slack = bound - observed;
    if (slack < r.slack) {
        r.slack = slack;
        r.max_observed = observed;
        r.bound = bound;
    }
    r.pass = r.pass && slack >= -kSlackTol;
    ++r.instances_checked;
}

double logsumexp(std::span<const double> v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace

void merge_into(OracleReport& agg, const OracleReport& r) {
    if (agg.lemma.empty()) agg.lemma = r.lemma;
    if (r.slack < agg.slack) {
        agg.slack = r.slack;
        agg.max_observed = r.max_observed;
        agg.bound = r.bound;
    }
    agg.instances_checked += r.instances_checked;
    agg.pass = agg.pass && r.pass;
}

std::string format(const OracleReport& r) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%-22s %-4s max_observed=%.6g bound=%.6g slack=%.3e checked=%ld", r.lemma.c_str(),
                  r.pass ? "PASS" : "FAIL", r.max_observed, r.bound, r.slack, r.instances_checked);
    return buf;
}

OracleReport check_lemma3(int m, std::span<const double> fgrid) {
    OracleReport rep;
    rep.lemma = "lemma3-dp-sensitivity";
    const int g = static_cast<int>(fgrid.size());
    const int atoms = 2 * g;  // (t, f); atom a = t * g + fi
    auto atom_t = [g](int a) { return a / g; };
    auto atom_f = [&fgrid, g](int a) { return fgrid[static_cast<std::size_t>(a % g)]; };

    auto dp_of = [&](const std::vector<int>& counts) {
        double s[2] = {0.0, 0.0};
        long n[2] = {0, 0};
        for (int a = 0; a < atoms; ++a) {
            s[atom_t(a)] += counts[static_cast<std::size_t>(a)] * atom_f(a);
            n[atom_t(a)] += counts[static_cast<std::size_t>(a)];
        }
        return std::abs(s[0] * inv_shift(n[0]) - s[1] * inv_shift(n[1]));
    };

    std::vector<int> counts(static_cast<std::size_t>(atoms));
    for_each_multiset(atoms, m, counts, 0, [&](const std::vector<int>& k) {
        long n0 = 0;
        for (int a = 0; a < atoms; ++a)
            if (atom_t(a) == 0) n0 += k[static_cast<std::size_t>(a)];
        const double base = dp_of(k);
        const double bnd = inv_shift(n0) + inv_shift(m - n0);  // 1/H(n0, n1)
        std::vector<int> pert = k;
        for (int a = 0; a < atoms; ++a) {
            if (k[static_cast<std::size_t>(a)] == 0) continue;
            for (int b = 0; b < atoms; ++b) {
                if (b == a) continue;
                pert[static_cast<std::size_t>(a)] -= 1;
                pert[static_cast<std::size_t>(b)] += 1;
                observe(rep, std::abs(base - dp_of(pert)), bnd);
                pert[static_cast<std::size_t>(a)] += 1;
                pert[static_cast<std::size_t>(b)] -= 1;
            }
        }
    });
    return rep;
}

OracleReport check_lemma5(int m, std::span<const double> fgrid) {
    OracleReport rep;
    rep.lemma = "lemma5-eo-sensitivity";
    const int g = static_cast<int>(fgrid.size());
    const int atoms = 4 * g;  // atom a = (t * 2 + y) * g + fi
    auto atom_t = [g](int a) { return a / (2 * g); };
    auto atom_y = [g](int a) { return (a / g) % 2; };
    auto atom_f = [&fgrid, g](int a) { return fgrid[static_cast<std::size_t>(a % g)]; };

    auto eo_of = [&](const std::vector<int>& counts) {
        double s[2][2] = {{0, 0}, {0, 0}};
        long n[2][2] = {{0, 0}, {0, 0}};
        for (int a = 0; a < atoms; ++a) {
            s[atom_t(a)][atom_y(a)] += counts[static_cast<std::size_t>(a)] * atom_f(a);
            n[atom_t(a)][atom_y(a)] += counts[static_cast<std::size_t>(a)];
        }
        double loss = 0.0;
        for (int y = 0; y < 2; ++y)
            loss += std::abs(s[0][y] * inv_shift(n[0][y]) - s[1][y] * inv_shift(n[1][y]));
        return loss;
    };

    std::vector<int> counts(static_cast<std::size_t>(atoms));
    for_each_multiset(atoms, m, counts, 0, [&](const std::vector<int>& k) {
        long n[2][2] = {{0, 0}, {0, 0}};
        for (int a = 0; a < atoms; ++a) n[atom_t(a)][atom_y(a)] += k[static_cast<std::size_t>(a)];
        const long mn = std::min({n[0][0], n[0][1], n[1][0], n[1][1]});
        const double bnd = 2.0 * inv_shift(mn);
        const double base = eo_of(k);
        std::vector<int> pert = k;
        for (int a = 0; a < atoms; ++a) {
            if (k[static_cast<std::size_t>(a)] == 0) continue;
            for (int b = 0; b < atoms; ++b) {
                if (b == a) continue;
                pert[static_cast<std::size_t>(a)] -= 1;
                pert[static_cast<std::size_t>(b)] += 1;
                observe(rep, std::abs(base - eo_of(pert)), bnd);
                pert[static_cast<std::size_t>(a)] += 1;
                pert[static_cast<std::size_t>(b)] -= 1;
            }
        }
    });
    return rep;
}

OracleReport check_lemma2(int m, std::span<const double> fgrid, std::span<const double> probs) {
    OracleReport rep;
    rep.lemma = "lemma2-efron-stein";
    const int g = static_cast<int>(fgrid.size());
    const int atoms = 2 * g;
    if (static_cast<int>(probs.size()) != atoms)
        throw std::invalid_argument("check_lemma2: need one probability per (t, f) atom");
    auto atom_t = [g](int a) { return a / g; };
    auto atom_f = [&fgrid, g](int a) { return fgrid[static_cast<std::size_t>(a % g)]; };

    // log multinomial weight of a count vector.
    auto log_weight = [&](const std::vector<int>& k) {
        double lw = std::lgamma(static_cast<double>(m) + 1.0);
        for (int a = 0; a < atoms; ++a) {
            const int c = k[static_cast<std::size_t>(a)];
            lw -= std::lgamma(static_cast<double>(c) + 1.0);
            if (c > 0) lw += c * std::log(probs[static_cast<std::size_t>(a)]);
        }
        return lw;
    };

    double e_g = 0.0, e_g2 = 0.0, e_beta2 = 0.0;
    std::vector<int> counts(static_cast<std::size_t>(atoms));
    for_each_multiset(atoms, m, counts, 0, [&](const std::vector<int>& k) {
        double s[2] = {0.0, 0.0};
        long n[2] = {0, 0};
        for (int a = 0; a < atoms; ++a) {
            s[atom_t(a)] += k[static_cast<std::size_t>(a)] * atom_f(a);
            n[atom_t(a)] += k[static_cast<std::size_t>(a)];
        }
        const double val = std::abs(s[0] * inv_shift(n[0]) - s[1] * inv_shift(n[1]));
        const double beta = inv_shift(n[0]) + inv_shift(n[1]);
        const double w = std::exp(log_weight(k));
        e_g += w * val;
        e_g2 += w * val * val;
        e_beta2 += w * beta * beta;
    });

    const double var = e_g2 - e_g * e_g;
    observe(rep, var, 0.25 * static_cast<double>(m) * e_beta2);
    return rep;
}

OracleReport check_lemma4(std::span<const std::array<TFAtom, 2>> pairs, std::span<const double> lambdas) {
    OracleReport rep;
    rep.lemma = "lemma4-mgf";
    const int m = static_cast<int>(pairs.size());
    const long total = 1L << m;

    std::vector<double> diff(static_cast<std::size_t>(total));
    double coeff = 0.0;
    for (long r = 0; r < total; ++r) {
        double s_tr[2] = {0, 0}, s_te[2] = {0, 0};
        long n_tr[2] = {0, 0}, n_te[2] = {0, 0};
        for (int i = 0; i < m; ++i) {
            const TFAtom& sel = pairs[static_cast<std::size_t>(i)][(r >> i) & 1];
            const TFAtom& oth = pairs[static_cast<std::size_t>(i)][1 - ((r >> i) & 1)];
            s_tr[sel.t] += sel.f;
            ++n_tr[sel.t];
            s_te[oth.t] += oth.f;
            ++n_te[oth.t];
        }
        const double l_tr = std::abs(s_tr[0] * inv_shift(n_tr[0]) - s_tr[1] * inv_shift(n_tr[1]));
        const double l_te = std::abs(s_te[0] * inv_shift(n_te[0]) - s_te[1] * inv_shift(n_te[1]));
        diff[static_cast<std::size_t>(r)] = l_tr - l_te;
        const double h = inv_shift(n_tr[0]) + inv_shift(n_tr[1]) + inv_shift(n_te[0]) + inv_shift(n_te[1]);
        coeff += h * h;
    }
    coeff /= static_cast<double>(total);

    std::vector<double> scaled(diff.size());
    for (double lambda : lambdas) {
        for (std::size_t i = 0; i < diff.size(); ++i) scaled[i] = lambda * diff[i];
        const double lhs = logsumexp(scaled) - std::log(static_cast<double>(total));
        const double rhs = lambda * lambda * static_cast<double>(m) / 8.0 * coeff;
        observe(rep, lhs, rhs);
    }
    return rep;
}

OracleReport check_multiclass_sensitivity(int m, int num_labels, int num_classes) {
    OracleReport rep;
    rep.lemma = "multiclass-tv-sensitivity";
    const int atoms = 2 * num_labels * num_classes;  // (t, y, yhat)
    auto atom_t = [=](int a) { return a / (num_labels * num_classes); };
    auto atom_y = [=](int a) { return (a / num_classes) % num_labels; };
    auto atom_c = [=](int a) { return a % num_classes; };

    auto tv_of = [&](const std::vector<int>& k) {
        double loss = 0.0;
        for (int y = 0; y < num_labels; ++y) {
            long n[2] = {0, 0};
            for (int a = 0; a < atoms; ++a)
                if (atom_y(a) == y) n[atom_t(a)] += k[static_cast<std::size_t>(a)];
            double tv = 0.0;
            for (int c = 0; c < num_classes; ++c) {
                long h[2] = {0, 0};
                for (int a = 0; a < atoms; ++a)
                    if (atom_y(a) == y && atom_c(a) == c) h[atom_t(a)] += k[static_cast<std::size_t>(a)];
                tv += std::abs(h[0] * inv_shift(n[0]) - h[1] * inv_shift(n[1]));
            }
            loss += 0.5 * tv;
        }
        return loss;
    };

    std::vector<int> counts(static_cast<std::size_t>(atoms));
    for_each_multiset(atoms, m, counts, 0, [&](const std::vector<int>& k) {
        long mn = std::numeric_limits<long>::max();
        for (int t = 0; t < 2; ++t)
            for (int y = 0; y < num_labels; ++y) {
                long n = 0;
                for (int a = 0; a < atoms; ++a)
                    if (atom_t(a) == t && atom_y(a) == y) n += k[static_cast<std::size_t>(a)];
                mn = std::min(mn, n);
            }
        const double bnd = 2.0 * inv_shift(mn);
        const double base = tv_of(k);
        std::vector<int> pert = k;
        for (int a = 0; a < atoms; ++a) {
            if (k[static_cast<std::size_t>(a)] == 0) continue;
            for (int b = 0; b < atoms; ++b) {
                if (b == a) continue;
                pert[static_cast<std::size_t>(a)] -= 1;
                pert[static_cast<std::size_t>(b)] += 1;
                observe(rep, std::abs(base - tv_of(pert)), bnd);
                pert[static_cast<std::size_t>(a)] += 1;
                pert[static_cast<std::size_t>(b)] -= 1;
            }
        }
    });
    return rep;
}

namespace {

// Instance sampling keeps the exhaustive enumeration small: multiset count
// times the perturbation fan-out stays under a fixed work cap.
double multiset_count(int atoms, int m) {
    double c = 1.0;
    for (int i = 1; i <= m; ++i) c *= static_cast<double>(atoms - 1 + i) / static_cast<double>(i);
    return c;
}

std::vector<double> sample_fgrid(Rng& rng, int max_values) {
    // Endpoints 0 and 1 attain the worst cases; favor them.
    std::uniform_int_distribution<int> size_d(1, max_values);
    const int size = size_d(rng);
    std::vector<double> pool = {0.0, 1.0, 0.5, 0.25, 0.75};
    std::shuffle(pool.begin() + 2, pool.end(), rng);
    std::vector<double> grid;
    if (size >= 2) {
        grid = {0.0, 1.0};
        for (int i = 2; i < size; ++i) grid.push_back(pool[static_cast<std::size_t>(i)]);
    } else {
        grid = {std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : 0.0};
    }
    std::sort(grid.begin(), grid.end());
    return grid;
}

int sample_m(Rng& rng, int atoms, double work_cap, int max_m = 10) {
    std::vector<int> feasible;
    for (int m = 2; m <= max_m; ++m) {
        const double work = multiset_count(atoms, m) * m * atoms;
        if (work <= work_cap) feasible.push_back(m);
    }
    if (feasible.empty()) return 2;
    std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
    return feasible[pick(rng)];
}

}  // namespace

OracleReport run_lemma_oracle(const std::string& lemma, int instances, std::uint64_t seed) {
    OracleReport agg;
    for (int inst = 0; inst < instances; ++inst) {
        Rng rng(derive_seed(seed, {std::hash<std::string>{}(lemma), static_cast<std::uint64_t>(inst)}));
        if (lemma == "lemma2") {
            const auto grid = sample_fgrid(rng, 3);
            const int atoms = 2 * static_cast<int>(grid.size());
            const int m = sample_m(rng, atoms, 3e5);
            std::vector<double> probs(static_cast<std::size_t>(atoms));
            std::gamma_distribution<double> gam(1.0, 1.0);
            double tot = 0.0;
            for (auto& p : probs) {
                p = gam(rng) + 1e-3;
                tot += p;
            }
            for (auto& p : probs) p /= tot;
            merge_into(agg, check_lemma2(m, grid, probs));
        } else if (lemma == "lemma3") {
            const auto grid = sample_fgrid(rng, 3);
            const int m = sample_m(rng, 2 * static_cast<int>(grid.size()), 5e5);
            merge_into(agg, check_lemma3(m, grid));
        } else if (lemma == "lemma4") {
            std::uniform_int_distribution<int> m_d(2, 10);
            const int m = m_d(rng);
            const auto grid = sample_fgrid(rng, 3);
            std::uniform_int_distribution<int> bit(0, 1);
            std::uniform_int_distribution<std::size_t> fpick(0, grid.size() - 1);
            std::vector<std::array<TFAtom, 2>> pairs(static_cast<std::size_t>(m));
            for (auto& p : pairs)
                for (auto& a : p) a = TFAtom{bit(rng), grid[fpick(rng)]};
            const double lambdas[] = {-4.0, -2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0, 4.0};
            merge_into(agg, check_lemma4(pairs, lambdas));
        } else if (lemma == "lemma5") {
            const auto grid = sample_fgrid(rng, 3);
            const int m = sample_m(rng, 4 * static_cast<int>(grid.size()), 5e5);
            merge_into(agg, check_lemma5(m, grid));
        } else if (lemma == "multiclass") {
            std::uniform_int_distribution<int> labels_d(2, 4), classes_d(2, 4);
            const int ny = labels_d(rng), nc = classes_d(rng);
            const int m = sample_m(rng, 2 * ny * nc, 5e5, 6);
            merge_into(agg, check_multiclass_sensitivity(m, ny, nc));
        } else {
            throw std::invalid_argument("run_lemma_oracle: unknown lemma '" + lemma + "'");
        }
    }
    return agg;
}

std::vector<OracleReport> run_all_oracles(int instances, std::uint64_t seed) {
    std::vector<OracleReport> out;
    for (const char* lemma : {"lemma2", "lemma3", "lemma4", "lemma5", "multiclass"})
        out.push_back(run_lemma_oracle(lemma, instances, seed));
    return out;
}

}  // namespace fairgen
