#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

namespace fairgen {

struct MIEstimate {
    double value = 0.0;  // nats, clamped at 0 from below
    double raw = 0.0;    // pre-clamp estimate
    std::string estimator;
    int k = 0;
    int n_samples = 0;
};

// Accurate for x > 0 (recurrence into the asymptotic regime).
double digamma(double x);

// kNN mutual information between a discrete symbol and a continuous vector:
// I = psi(N) - <psi(N_b)> + psi(k) - <psi(m_i)>, with m_i counting the points
// of any class within the radius of i's k-th same-class neighbor (max-norm,
// the k-th neighbor itself included). Exact ties are broken by an
// infinitesimal index-free jitter over the lexicographic (value, class) order,
// so the estimate is invariant to the input permutation.
// Requires every class to have more than k members and N >= 2(k+1).
MIEstimate mi_disc_cont(const std::vector<int>& labels, const Eigen::MatrixXd& x, int k = 3);
MIEstimate mi_disc_cont(const std::vector<int>& labels, const std::vector<double>& x, int k = 3);

// Exact plug-in MI of the empirical joint over symbol pairs; 0 ln 0 = 0.
MIEstimate mi_plugin_discrete(const std::vector<std::pair<int, int>>& pairs);

// Adaptive-grid plug-in: recursive equal-count splits on the widest dimension
// down to `depth`, then discrete plug-in MI between the symbol and the cell.
MIEstimate mi_partitioning(const std::vector<int>& labels, const Eigen::MatrixXd& x, int depth = 6);

}  // namespace fairgen
