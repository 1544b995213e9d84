#include "fairgen/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "fairgen/errors.hpp"

namespace fairgen {

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXi t, Eigen::VectorXi y, int num_classes)
    : x_(std::move(x)), t_(std::move(t)), y_(std::move(y)), num_classes_(num_classes) {
    if (x_.rows() != t_.size() || x_.rows() != y_.size())
        throw SizeError("dataset: feature/sensitive/label row counts differ");
    for (Eigen::Index i = 0; i < t_.size(); ++i) {
        if (t_[i] != 0 && t_[i] != 1) throw DataError("dataset: sensitive attribute must be 0 or 1");
        if (y_[i] < 0 || y_[i] >= num_classes_) throw DataError("dataset: label out of range");
    }
}

Dataset Dataset::select(std::span<const int> idx) const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), x_.cols());
    Eigen::VectorXi t(static_cast<Eigen::Index>(idx.size()));
    Eigen::VectorXi y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        x.row(static_cast<Eigen::Index>(j)) = x_.row(idx[j]);
        t[static_cast<Eigen::Index>(j)] = t_[idx[j]];
        y[static_cast<Eigen::Index>(j)] = y_[idx[j]];
    }
    return Dataset(std::move(x), std::move(t), std::move(y), num_classes_);
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b) {
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    if (a.feature_dim() != b.feature_dim()) throw SizeError("concat: feature dims differ");
    if (a.num_classes() != b.num_classes()) throw SizeError("concat: class counts differ");
    Eigen::MatrixXd x(a.size() + b.size(), a.feature_dim());
    x << a.features(), b.features();
    Eigen::VectorXi t(a.size() + b.size());
    t << a.sensitive(), b.sensitive();
    Eigen::VectorXi y(a.size() + b.size());
    y << a.labels(), b.labels();
    return Dataset(std::move(x), std::move(t), std::move(y), a.num_classes());
}

GroupCounts group_counts(const Dataset& d) {
    GroupCounts c;
    c.eo = Eigen::MatrixX<long>::Zero(2, std::max(1, d.num_classes()));
    const auto& t = d.sensitive();
    const auto& y = d.labels();
    for (Eigen::Index i = 0; i < d.size(); ++i) c.eo(t[i], y[i]) += 1;
    c.dp[0] = c.eo.row(0).sum();
    c.dp[1] = c.eo.row(1).sum();
    return c;
}

double shifted_harmonic_mean(std::span<const long> counts) {
    if (counts.empty()) throw std::invalid_argument("shifted_harmonic_mean: empty argument list");
    double s = 0.0;
    for (long a : counts) {
        if (a < 0) throw std::invalid_argument("shifted_harmonic_mean: negative count");
        s += 1.0 / (static_cast<double>(a) + 2.0);
    }
    return 1.0 / s;
}

SuperSample draw_supersample(const Dataset& d, Eigen::Index n, Rng& rng) {
    if (2 * n > d.size()) throw SizeError("draw_supersample: 2n exceeds dataset size");
    std::vector<int> idx(static_cast<std::size_t>(d.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<int> first(idx.begin(), idx.begin() + n);
    std::vector<int> second(idx.begin() + n, idx.begin() + 2 * n);
    return SuperSample{d.select(first), d.select(second)};
}

SelectionVector draw_selection(Eigen::Index n, Rng& rng) {
    SelectionVector r(static_cast<std::size_t>(n));
    std::uniform_int_distribution<int> bit(0, 1);
    for (auto& b : r) b = static_cast<std::uint8_t>(bit(rng));
    return r;
}

SelectionVector complement(const SelectionVector& r) {
    SelectionVector c(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) c[i] = static_cast<std::uint8_t>(1 - r[i]);
    return c;
}

std::pair<Dataset, Dataset> split(const SuperSample& ss, const SelectionVector& r) {
    if (static_cast<Eigen::Index>(r.size()) != ss.size())
        throw SizeError("split: selection vector length differs from supersample size");
    const Eigen::Index n = ss.size();
    Eigen::MatrixXd xt(n, ss.side0.feature_dim()), xe(n, ss.side0.feature_dim());
    Eigen::VectorXi tt(n), te(n), yt(n), ye(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Dataset& tr = r[static_cast<std::size_t>(i)] ? ss.side1 : ss.side0;
        const Dataset& ts = r[static_cast<std::size_t>(i)] ? ss.side0 : ss.side1;
        xt.row(i) = tr.features().row(i);
        tt[i] = tr.sensitive()[i];
        yt[i] = tr.labels()[i];
        xe.row(i) = ts.features().row(i);
        te[i] = ts.sensitive()[i];
        ye[i] = ts.labels()[i];
    }
    const int nc = ss.side0.num_classes();
    return {Dataset(std::move(xt), std::move(tt), std::move(yt), nc),
            Dataset(std::move(xe), std::move(te), std::move(ye), nc)};
}

}  // namespace fairgen
