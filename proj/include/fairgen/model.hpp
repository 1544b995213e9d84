#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "fairgen/fairloss.hpp"

namespace fairgen {

// logreg when hidden is empty; otherwise a tanh MLP. num_outputs 1 gives a
// logistic score, >= 2 a softmax simplex (prediction only; training is binary).
struct Arch {
    int input_dim = 0;
    std::vector<int> hidden;
    int num_outputs = 1;

    int param_count() const;
    std::string to_string() const;
    static Arch parse(const std::string& s, int input_dim);
};

class Model {
public:
    Model() = default;
    Model(Arch arch, Eigen::VectorXd params);

    static Model init(const Arch& arch, std::uint64_t seed);

    const Arch& arch() const { return arch_; }
    const Eigen::VectorXd& params() const { return params_; }
    Eigen::VectorXd& params() { return params_; }
    int param_count() const { return static_cast<int>(params_.size()); }

    // Scores in [0,1]; binary output only.
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    double predict_one(const Eigen::VectorXd& x) const;
    // Probability rows on the simplex (binary models return [1-p, p]).
    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;
    // argmax class, ties to the lowest index.
    Eigen::VectorXi predict_class(const Eigen::MatrixXd& x) const;

    Predictor predictor() const;
    ClassPredictor class_predictor() const;

    // Raw pre-sigmoid outputs plus hidden activations, for backprop.
    struct Forward {
        std::vector<Eigen::MatrixXd> activations;  // per hidden layer
        Eigen::VectorXd logits;
        Eigen::VectorXd probs;
    };
    Forward forward(const Eigen::MatrixXd& x) const;
    // Gradient of sum_i g[i] * logit_i with respect to the flat parameters.
    Eigen::VectorXd backward(const Eigen::MatrixXd& x, const Forward& fwd, const Eigen::VectorXd& g) const;

    // Versioned textual checkpoint; parameter bits round-trip exactly.
    void save(const std::string& path) const;
    static Model load(const std::string& path);

    std::string digest() const;

private:
    Arch arch_;
    Eigen::VectorXd params_;
};

}  // namespace fairgen
