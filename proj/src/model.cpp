#include "fairgen/model.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fairgen/errors.hpp"
#include "fairgen/rng.hpp"

namespace fairgen {

namespace {

// W (out x in) then b (out), layer by layer.
struct Layout {
    std::vector<int> sizes;  // input_dim, hidden..., num_outputs
    int params = 0;
};

Layout layout_of(const Arch& a) {
    Layout l;
    l.sizes.push_back(a.input_dim);
    for (int h : a.hidden) l.sizes.push_back(h);
    l.sizes.push_back(a.num_outputs);
    for (std::size_t i = 0; i + 1 < l.sizes.size(); ++i) l.params += l.sizes[i] * l.sizes[i + 1] + l.sizes[i + 1];
    return l;
}

inline Eigen::Map<const Eigen::MatrixXd> weight(const Eigen::VectorXd& p, int offset, int out, int in) {
    return Eigen::Map<const Eigen::MatrixXd>(p.data() + offset, out, in);
}
inline Eigen::Map<const Eigen::VectorXd> bias(const Eigen::VectorXd& p, int offset, int out) {
    return Eigen::Map<const Eigen::VectorXd>(p.data() + offset, out);
}

// tanh(z) = 1 - 2/(exp(2z)+1); Eigen vectorizes exp for doubles but not tanh.
inline Eigen::ArrayXXd tanh_fast(const Eigen::MatrixXd& z) {
    return 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
}

}  // namespace

int Arch::param_count() const { return layout_of(*this).params; }

std::string Arch::to_string() const {
    std::ostringstream os;
    if (hidden.empty()) {
        os << "logreg";
    } else {
        os << "mlp";
        for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "x" : "-") << hidden[i];
    }
    os << ":in=" << input_dim << ":out=" << num_outputs;
    return os.str();
}

Arch Arch::parse(const std::string& s, int input_dim) {
    Arch a;
    a.input_dim = input_dim;
    if (s == "logreg") return a;
    if (s.rfind("mlp", 0) == 0) {
        std::string rest = s.size() > 3 && (s[3] == '-' || s[3] == ':') ? s.substr(4) : "";
        if (rest.empty()) {
            a.hidden = {64};
            return a;
        }
        std::stringstream ss(rest);
        std::string tok;
        while (std::getline(ss, tok, 'x')) a.hidden.push_back(std::stoi(tok));
        return a;
    }
    throw ConfigError("unknown architecture '" + s + "' (expected logreg or mlp[-HxH...])");
}

Model::Model(Arch arch, Eigen::VectorXd params) : arch_(std::move(arch)), params_(std::move(params)) {
    if (params_.size() != arch_.param_count()) throw SizeError("model: parameter vector size mismatch");
}

Model Model::init(const Arch& arch, std::uint64_t seed) {
    const Layout l = layout_of(arch);
    Eigen::VectorXd p(l.params);
    Rng rng(seed);
    int off = 0;
    for (std::size_t i = 0; i + 1 < l.sizes.size(); ++i) {
        const int fan_in = l.sizes[i];
        const int out = l.sizes[i + 1];
        const double s = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
        std::uniform_real_distribution<double> u(-s, s);
        for (int j = 0; j < out * fan_in; ++j) p[off + j] = u(rng);
        off += out * fan_in;
        for (int j = 0; j < out; ++j) p[off + j] = 0.0;
        off += out;
    }
    return Model(arch, std::move(p));
}

Model::Forward Model::forward(const Eigen::MatrixXd& x) const {
    if (x.cols() != arch_.input_dim) throw SizeError("model: input dimension mismatch");
    if (arch_.num_outputs != 1) throw ConfigError("model: forward/backward expects a binary head");
    const Layout l = layout_of(arch_);
    Forward f;
    int off = 0;
    Eigen::MatrixXd a = x;
    for (std::size_t i = 0; i + 2 < l.sizes.size(); ++i) {
        const int in = l.sizes[i], out = l.sizes[i + 1];
        Eigen::MatrixXd z = a * weight(params_, off, out, in).transpose();
        z.rowwise() += bias(params_, off + out * in, out).transpose();
        off += out * in + out;
        a = tanh_fast(z);
        f.activations.push_back(a);
    }
    const int in = l.sizes[l.sizes.size() - 2];
    f.logits = a * weight(params_, off, 1, in).transpose();
    f.logits.array() += bias(params_, off + in, 1)[0];
    f.probs = 1.0 / (1.0 + (-f.logits.array()).exp());
    return f;
}

Eigen::VectorXd Model::backward(const Eigen::MatrixXd& x, const Forward& fwd, const Eigen::VectorXd& g) const {
    const Layout l = layout_of(arch_);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
    // Offsets of each layer's parameter block.
    std::vector<int> offs;
    int off = 0;
    for (std::size_t i = 0; i + 1 < l.sizes.size(); ++i) {
        offs.push_back(off);
        off += l.sizes[i] * l.sizes[i + 1] + l.sizes[i + 1];
    }
    const std::size_t last = l.sizes.size() - 2;
    Eigen::MatrixXd delta = g;  // b x out, starting at the logit layer
    for (std::size_t li = last + 1; li-- > 0;) {
        const int in = l.sizes[li], out = l.sizes[li + 1];
        const Eigen::MatrixXd& a_prev = (li == 0) ? x : fwd.activations[li - 1];
        Eigen::Map<Eigen::MatrixXd> dw(grad.data() + offs[li], out, in);
        Eigen::Map<Eigen::VectorXd> db(grad.data() + offs[li] + out * in, out);
        dw = delta.transpose() * a_prev;
        db = delta.colwise().sum();
        if (li > 0) {
            delta = (delta * weight(params_, offs[li], out, in)).eval();
            delta.array() *= (1.0 - fwd.activations[li - 1].array().square());
        }
    }
    return grad;
}

Eigen::VectorXd Model::predict(const Eigen::MatrixXd& x) const {
    if (arch_.num_outputs != 1) throw ConfigError("model: predict() expects a binary head; use predict_proba");
    return forward(x).probs;
}

double Model::predict_one(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd row = x.transpose();
    return predict(row)[0];
}

Eigen::MatrixXd Model::predict_proba(const Eigen::MatrixXd& x) const {
    if (arch_.num_outputs == 1) {
        Eigen::VectorXd p = predict(x);
        Eigen::MatrixXd out(x.rows(), 2);
        out.col(0) = 1.0 - p.array();
        out.col(1) = p;
        return out;
    }
    if (x.cols() != arch_.input_dim) throw SizeError("model: input dimension mismatch");
    const Layout l = layout_of(arch_);
    int off = 0;
    Eigen::MatrixXd a = x;
    for (std::size_t i = 0; i + 2 < l.sizes.size(); ++i) {
        const int in = l.sizes[i], out = l.sizes[i + 1];
        Eigen::MatrixXd z = a * weight(params_, off, out, in).transpose();
        z.rowwise() += bias(params_, off + out * in, out).transpose();
        off += out * in + out;
        a = tanh_fast(z);
    }
    const int in = l.sizes[l.sizes.size() - 2];
    const int out = l.sizes.back();
    Eigen::MatrixXd z = a * weight(params_, off, out, in).transpose();
    z.rowwise() += bias(params_, off + out * in, out).transpose();
    Eigen::MatrixXd e = (z.colwise() - z.rowwise().maxCoeff()).array().exp();
    return e.array().colwise() / e.rowwise().sum().array();
}

Eigen::VectorXi Model::predict_class(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd proba = predict_proba(x);
    Eigen::VectorXi cls(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        int best = 0;
        for (Eigen::Index c = 1; c < proba.cols(); ++c)
            if (proba(i, c) > proba(i, best)) best = static_cast<int>(c);
        cls[i] = best;
    }
    return cls;
}

Predictor Model::predictor() const {
    return [m = *this](const Eigen::MatrixXd& x) { return m.predict(x); };
}

ClassPredictor Model::class_predictor() const {
    return [m = *this](const Eigen::MatrixXd& x) { return m.predict_class(x); };
}

void Model::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("model: cannot write '" + path + "'");
    out << "fairgen-model v1\n";
    out << "input_dim " << arch_.input_dim << "\n";
    out << "hidden";
    for (int h : arch_.hidden) out << " " << h;
    out << "\n";
    out << "num_outputs " << arch_.num_outputs << "\n";
    out << "params " << params_.size() << "\n";
    char buf[40];
    for (Eigen::Index i = 0; i < params_.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &params_[i], sizeof bits);
        std::snprintf(buf, sizeof buf, "%016" PRIx64 "\n", bits);
        out << buf;
    }
}

Model Model::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("model: cannot read '" + path + "'");
    std::string header;
    std::getline(in, header);
    if (header != "fairgen-model v1") throw DataError("model: bad checkpoint header '" + header + "'");
    Arch arch;
    std::string key;
    in >> key >> arch.input_dim;
    if (key != "input_dim") throw DataError("model: malformed checkpoint");
    in >> key;
    if (key != "hidden") throw DataError("model: malformed checkpoint");
    std::string rest;
    std::getline(in, rest);
    std::stringstream hs(rest);
    int h;
    while (hs >> h) arch.hidden.push_back(h);
    Eigen::Index n;
    in >> key >> arch.num_outputs;
    if (key != "num_outputs") throw DataError("model: malformed checkpoint");
    in >> key >> n;
    if (key != "params") throw DataError("model: malformed checkpoint");
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::string hex;
        in >> hex;
        std::uint64_t bits = std::stoull(hex, nullptr, 16);
        std::memcpy(&p[i], &bits, sizeof bits);
    }
    if (!in) throw DataError("model: truncated checkpoint");
    return Model(arch, std::move(p));
}

std::string Model::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mixin = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
        h = mix64(h);
    };
    mixin(static_cast<std::uint64_t>(arch_.input_dim));
    for (int hid : arch_.hidden) mixin(static_cast<std::uint64_t>(hid));
    for (Eigen::Index i = 0; i < params_.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &params_[i], sizeof bits);
        mixin(bits);
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

}  // namespace fairgen
