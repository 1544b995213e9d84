#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fairgen/rng.hpp"

namespace fairgen {

// One labeled sample: standardized features x, binary sensitive attribute t,
// label y in {0,...,C-1}.
struct Sample {
    Eigen::VectorXd x;
    int t = 0;
    int y = 0;
};

// Column-oriented, index-addressable dataset. Rows keep a deterministic order.
class Dataset {
public:
    Dataset() = default;
    Dataset(Eigen::MatrixXd x, Eigen::VectorXi t, Eigen::VectorXi y, int num_classes = 2);

    Eigen::Index size() const { return x_.rows(); }
    Eigen::Index feature_dim() const { return x_.cols(); }
    int num_classes() const { return num_classes_; }

    const Eigen::MatrixXd& features() const { return x_; }
    const Eigen::VectorXi& sensitive() const { return t_; }
    const Eigen::VectorXi& labels() const { return y_; }

    Sample sample(Eigen::Index i) const { return Sample{x_.row(i).transpose(), t_[i], y_[i]}; }

    // Row-subset copy, preserving the order of `idx`.
    Dataset select(std::span<const int> idx) const;

    // Row-wise concatenation; feature dims and class counts must agree.
    static Dataset concat(const Dataset& a, const Dataset& b);

private:
    Eigen::MatrixXd x_;
    Eigen::VectorXi t_;
    Eigen::VectorXi y_;
    int num_classes_ = 2;
};

// n positionally paired samples (z_i^0, z_i^1) drawn from the same source.
struct SuperSample {
    Dataset side0;
    Dataset side1;
    Eigen::Index size() const { return side0.size(); }
};

// n bits; bit i picks side r_i of pair i for training.
using SelectionVector = std::vector<std::uint8_t>;

// Group sizes: dp marginal (n_0, n_1) and the full (t, y) table.
struct GroupCounts {
    std::array<long, 2> dp{0, 0};
    Eigen::MatrixX<long> eo;  // 2 x num_classes
};

GroupCounts group_counts(const Dataset& d);

// 1 / sum_i 1/(a_i + 2). Defined for any nonnegative counts; the +2 shift
// keeps every term finite. Throws on an empty argument list.
double shifted_harmonic_mean(std::span<const long> counts);

// 2n samples drawn uniformly without replacement, paired positionally.
SuperSample draw_supersample(const Dataset& d, Eigen::Index n, Rng& rng);

SelectionVector draw_selection(Eigen::Index n, Rng& rng);
SelectionVector complement(const SelectionVector& r);

// train = (z_i^{r_i})_i, test = (z_i^{1-r_i})_i, both of size n.
std::pair<Dataset, Dataset> split(const SuperSample& ss, const SelectionVector& r);

}  // namespace fairgen
