#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "fairgen/dataset.hpp"
#include "fairgen/fairloss.hpp"
#include "fairgen/rng.hpp"

namespace fairgen {

// m distinct sorted indices into [0, n).
struct SubsetContext {
    std::vector<int> indices;
    int m() const { return static_cast<int>(indices.size()); }
};

// Full enumeration when C(n, m) fits the budget, otherwise `budget` distinct
// uniform subsets.
std::vector<SubsetContext> subsets(int n, int m, int budget, Rng& rng);

// Phi = (r_{u1} xor r_{ui})_{i>=2}; the two derived masks are b (x) Phi =
// (b, Phi xor b) for b in {0,1}. Exactly one of them equals r restricted to u.
struct PhiPattern {
    std::vector<std::uint8_t> phi;  // m-1 bits
    std::vector<std::uint8_t> minus_mask() const;
    std::vector<std::uint8_t> plus_mask() const;
};

PhiPattern phi_of(const SelectionVector& r, const SubsetContext& u);

// Loss pair on the two Phi-masked size-m datasets, with the group counts
// needed by the bound coefficients.
struct LossPair {
    double l_minus = 0.0;
    double l_plus = 0.0;
    double delta = 0.0;  // l_plus - l_minus
    int r_u1 = 0;
    std::array<long, 2> minus_dp_counts{0, 0};
    std::array<long, 2> plus_dp_counts{0, 0};
    long minus_min_subgroup = 0;  // min_{t,y} n_{t,y} of the minus set
    long plus_min_subgroup = 0;
};

LossPair loss_pair(const Predictor& predict, const SuperSample& ss, const SelectionVector& r,
                   const SubsetContext& u, Metric metric);

// Same, with model scores on the two supersample sides already in hand.
LossPair loss_pair(const Eigen::VectorXd& preds0, const Eigen::VectorXd& preds1, const SuperSample& ss,
                   const SelectionVector& r, const SubsetContext& u, Metric metric);

// Empirical mean over selection draws of (sum_i 1/(count_i + 2))^2, counts
// being the four per-group sizes of (S_u, S-bar_u).
double coeff_dp(std::span<const std::array<long, 4>> counts);

// Same with the two smallest (t, y) subgroup sizes of S_u and S-bar_u.
double coeff_eo(std::span<const std::array<long, 2>> minima);

struct BoundEstimate {
    std::string theorem;
    double value = 0.0;        // mean over supersample draws
    double stddev = 0.0;       // dispersion across supersample draws
    double coefficient = 0.0;  // mean coefficient term
    double mi = 0.0;           // mean clamped MI estimate, nats
    int m = 0;
    std::vector<double> per_z;
};

// One (z, u) cell of samples collected across the m2 selection draws.
struct SubsetSamples {
    std::vector<double> delta;
    std::vector<int> r_u1;
    double coeff = 0.0;
};

// sqrt((m/2) coeff I(delta; r_u1)) per (z, u), averaged over u inside each z,
// then mean +- std across z.
BoundEstimate bound_deltal_dp(const std::vector<std::vector<SubsetSamples>>& per_z, int m, int k);

// sqrt(2m coeff I(delta; r_u1)); requires m >= 4.
BoundEstimate bound_deltal_eo(const std::vector<std::vector<SubsetSamples>>& per_z, int m, int k);

// Loss pairs on the fixed sides of the pairs in u against the m-bit selection
// pattern; practical only when the 2^m patterns are populated (m <= 5).
struct EcmiSamples {
    std::vector<std::array<double, 2>> losses;  // (side-0 loss, side-1 loss)
    std::vector<int> r_pattern;                 // encoded m-bit pattern
    double coeff = 0.0;
};

BoundEstimate bound_ecmi_dp(const std::vector<std::vector<EcmiSamples>>& per_z, int m, int k);

// Coefficient-only theorems: the scalar multiplying the (unestimated)
// information term. Each count row holds the group sizes the theorem sums
// reciprocals over: (n_0, n_1) draws for the MI bound, the four supersample
// group sizes for the CMI and f-CMI bounds, the smallest (t, y) subgroup for
// the EO MI bound.
enum class CoeffTheorem { MIBound, CMIBound, FCMIBound, EOMIBound };

double coeff_only(CoeffTheorem theorem, int m, std::span<const std::vector<long>> count_rows);

}  // namespace fairgen
