#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace fairgen {

// Brute-force verification of the concentration lemmas on exhaustively
// enumerable instances. Prediction values are taken from a small grid so the
// suprema are exact; the grid extrema {0,1} attain the worst cases.
struct OracleReport {
    std::string lemma;
    double max_observed = 0.0;
    double bound = std::numeric_limits<double>::infinity();
    double slack = std::numeric_limits<double>::infinity();  // bound - max_observed at the worst point
    long instances_checked = 0;
    bool pass = true;
};

void merge_into(OracleReport& agg, const OracleReport& r);
std::string format(const OracleReport& r);

// sup over single-coordinate replacements of |dp_loss(v) - dp_loss(v~)| vs
// 1/H(n_0, n_1), bucketed by the original group counts.
OracleReport check_lemma3(int m, std::span<const double> fgrid);

// Same for the EO loss vs 2/(min_{t,y} n_{t,y} + 2).
OracleReport check_lemma5(int m, std::span<const double> fgrid);

// Exact Var(dp_loss) over the product distribution given by `probs` over the
// (t, f) atoms, against (m/4) E[beta^2] with beta = 1/H(n_0, n_1).
OracleReport check_lemma2(int m, std::span<const double> fgrid, std::span<const double> probs);

// One supersample atom: sensitive bit and prediction value.
struct TFAtom {
    int t = 0;
    double f = 0.0;
};

// log E_R[exp(lambda (l(S_u) - l(S-bar_u)))] vs (lambda^2 m / 8) E_R[1/H^2]
// over all 2^m selection vectors, for every lambda in the grid.
OracleReport check_lemma4(std::span<const std::array<TFAtom, 2>> pairs, std::span<const double> lambdas);

// Single-coordinate perturbation of the TV-aggregate loss over the full
// (t, y, yhat) grid vs 2/(min_{t,y} n_{t,y} + 2).
OracleReport check_multiclass_sensitivity(int m, int num_labels, int num_classes);

// Randomized instance drivers used by the `oracles` subcommand and CI.
OracleReport run_lemma_oracle(const std::string& lemma, int instances, std::uint64_t seed);
std::vector<OracleReport> run_all_oracles(int instances, std::uint64_t seed);

}  // namespace fairgen
