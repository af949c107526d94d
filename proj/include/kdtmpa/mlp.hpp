#pragma once

// Multilayer perceptron classifier (ReLU hidden layers, softmax output),
// trained with mini-batch Adam on cross-entropy.

#include "kdtmpa/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>

namespace kdtmpa {

class Mlp {
public:
    Mlp() = default;

    /// Xavier-uniform weights, zero biases.
    Mlp(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng) {
        if (input_dim < 1 || output_dim < 1) throw ValidationError("mlp: dimensions must be positive");
        int in = input_dim;
        std::vector<int> dims = hidden;
        dims.push_back(output_dim);
        for (int out : dims) {
            if (out < 1) throw ValidationError("mlp: layer widths must be positive");
            const double a = std::sqrt(6.0 / (in + out));
            Eigen::MatrixXd w(out, in);
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * a;
            W_.push_back(std::move(w));
            b_.push_back(Eigen::VectorXd::Zero(out));
            in = out;
        }
    }

    Mlp(std::vector<Eigen::MatrixXd> W, std::vector<Eigen::VectorXd> b) : W_(std::move(W)), b_(std::move(b)) {
        if (W_.empty() || W_.size() != b_.size()) throw ValidationError("mlp: inconsistent layer lists");
        for (std::size_t l = 0; l < W_.size(); ++l) {
            if (W_[l].rows() != b_[l].size()) throw ValidationError("mlp: bias size mismatch");
            if (l > 0 && W_[l].cols() != W_[l - 1].rows()) throw ValidationError("mlp: layer shape mismatch");
        }
    }

    int input_dim() const { return static_cast<int>(W_.front().cols()); }
    int output_dim() const { return static_cast<int>(W_.back().rows()); }
    std::size_t layer_count() const { return W_.size(); }
    std::vector<int> hidden_widths() const {
        std::vector<int> w;
        for (std::size_t l = 0; l + 1 < W_.size(); ++l) w.push_back(static_cast<int>(W_[l].rows()));
        return w;
    }
    const std::vector<Eigen::MatrixXd>& weights() const { return W_; }
    const std::vector<Eigen::VectorXd>& biases() const { return b_; }
    std::vector<Eigen::MatrixXd>& weights() { return W_; }
    std::vector<Eigen::VectorXd>& biases() { return b_; }

    /// Logits for one input vector.
    void forward(const double* x, Eigen::VectorXd& logits) const {
        thread_local Eigen::VectorXd a, z;
        a = Eigen::Map<const Eigen::VectorXd>(x, input_dim());
        for (std::size_t l = 0; l < W_.size(); ++l) {
            z.noalias() = W_[l] * a;
            z += b_[l];
            if (l + 1 < W_.size()) a = z.cwiseMax(0.0);
        }
        logits = z;
    }

    /// Logits for a batch; one sample per column.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X) const {
        Eigen::MatrixXd a = X;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            Eigen::MatrixXd z = W_[l] * a;
            z.colwise() += b_[l];
            a = l + 1 < W_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
        }
        return a;
    }

    /// Mean softmax cross-entropy over the columns of X and its gradient.
    double loss_and_gradient(const Eigen::MatrixXd& X, const std::vector<int>& labels, std::vector<Eigen::MatrixXd>& gW,
                             std::vector<Eigen::VectorXd>& gb) const {
        const std::size_t L = W_.size();
        const double n = static_cast<double>(X.cols());
        std::vector<Eigen::MatrixXd> acts(L + 1);
        acts[0] = X;
        for (std::size_t l = 0; l < L; ++l) {
            Eigen::MatrixXd z = W_[l] * acts[l];
            z.colwise() += b_[l];
            acts[l + 1] = l + 1 < L ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
        }
        Eigen::MatrixXd delta = acts[L];
        double loss = 0.0;
        for (Eigen::Index c = 0; c < delta.cols(); ++c) {
            auto col = delta.col(c);
            const double mx = col.maxCoeff();
            col = (col.array() - mx).exp().matrix();
            const double sum = col.sum();
            col /= sum;
            const int y = labels[static_cast<std::size_t>(c)];
            loss -= std::log(std::max(col(y), std::numeric_limits<double>::min()));
            col(y) -= 1.0;
        }
        delta /= n;
        gW.resize(L);
        gb.resize(L);
        for (std::size_t l = L; l-- > 0;) {
            gW[l].noalias() = delta * acts[l].transpose();
            gb[l] = delta.rowwise().sum();
            if (l > 0) {
                Eigen::MatrixXd back = W_[l].transpose() * delta;
                delta = back.array() * (acts[l].array() > 0.0).cast<double>();
            }
        }
        return loss / n;
    }

    double loss(const Eigen::MatrixXd& X, const std::vector<int>& labels) const {
        const Eigen::MatrixXd z = forward_batch(X);
        double s = 0.0;
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            const double mx = z.col(c).maxCoeff();
            const double lse = mx + std::log((z.col(c).array() - mx).exp().sum());
            s += lse - z(labels[static_cast<std::size_t>(c)], c);
        }
        return s / static_cast<double>(z.cols());
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < W_.size(); ++l) n += static_cast<std::size_t>(W_[l].size() + b_[l].size());
        return n;
    }

    /// Flat parameter vector: per layer, W (column-major) then b.
    std::vector<double> parameters() const {
        std::vector<double> p;
        p.reserve(parameter_count());
        for (std::size_t l = 0; l < W_.size(); ++l) {
            p.insert(p.end(), W_[l].data(), W_[l].data() + W_[l].size());
            p.insert(p.end(), b_[l].data(), b_[l].data() + b_[l].size());
        }
        return p;
    }

    void set_parameters(const std::vector<double>& p) {
        if (p.size() != parameter_count()) throw ValidationError("mlp: parameter vector has the wrong length");
        std::size_t i = 0;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            for (Eigen::Index j = 0; j < W_[l].size(); ++j) W_[l].data()[j] = p[i++];
            for (Eigen::Index j = 0; j < b_[l].size(); ++j) b_[l].data()[j] = p[i++];
        }
    }

    /// Rounds every parameter to single precision (the storage format).
    void round_to_float() {
        for (std::size_t l = 0; l < W_.size(); ++l) {
            W_[l] = W_[l].cast<float>().cast<double>();
            b_[l] = b_[l].cast<float>().cast<double>();
        }
    }

    bool operator==(const Mlp& o) const {
        if (W_.size() != o.W_.size()) return false;
        for (std::size_t l = 0; l < W_.size(); ++l)
            if (W_[l] != o.W_[l] || b_[l] != o.b_[l]) return false;
        return true;
    }

private:
    std::vector<Eigen::MatrixXd> W_;
    std::vector<Eigen::VectorXd> b_;
};

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double mx = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - mx).exp().matrix();
    return p / p.sum();
}

struct TrainConfig {
    std::vector<int> hidden{128, 64, 64};
    int batch = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double test_fraction = 0.1;
    int patience = 5;
    int max_epochs = 200;
    bool standardize = true; ///< train on standardized inputs, folded into layer 1 afterwards
};

struct TrainResult {
    Mlp net;
    double best_test_loss = 0.0;
    double test_accuracy = 0.0;
    double train_accuracy = 0.0;
    int epochs = 0;
    int best_epoch = 0;
    std::vector<double> train_loss; ///< mean mini-batch loss per epoch
    std::vector<double> test_loss;
};

inline double accuracy(const Mlp& net, const Eigen::MatrixXd& X, const std::vector<int>& y) {
    if (X.cols() == 0) return 0.0;
    const Eigen::MatrixXd z = net.forward_batch(X);
    long hit = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        Eigen::Index arg;
        z.col(c).maxCoeff(&arg);
        hit += arg == y[static_cast<std::size_t>(c)];
    }
    return static_cast<double>(hit) / static_cast<double>(z.cols());
}

/// Fits an MLP to (X, y), X holding one sample per column. The data are split
/// into training and test parts (shuffled by rng); training stops once the
/// test loss has not improved for `patience` epochs and the best parameters
/// are returned, rounded to single precision.
inline TrainResult train_classifier(const Eigen::MatrixXd& X, const std::vector<int>& y, int output_dim,
                                    const TrainConfig& cfg, Rng& rng) {
    const Eigen::Index n = X.cols(), d = X.rows();
    if (n < 2) throw ValidationError("train: dataset needs at least two samples");
    if (static_cast<Eigen::Index>(y.size()) != n) throw ValidationError("train: label count does not match samples");
    for (int v : y)
        if (v < 0 || v >= output_dim) throw ValidationError("train: label outside the output range");
    if (cfg.batch < 1 || cfg.patience < 1 || cfg.max_epochs < 1) throw ValidationError("train: invalid hyperparameters");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const Eigen::Index n_test = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::llround(cfg.test_fraction * n)), 1, n - 1);
    const Eigen::Index n_train = n - n_test;

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d), sigma = Eigen::VectorXd::Ones(d);
    if (cfg.standardize) {
        for (Eigen::Index i = 0; i < n_train; ++i) mu += X.col(order[static_cast<std::size_t>(i)]);
        mu /= static_cast<double>(n_train);
        Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
        for (Eigen::Index i = 0; i < n_train; ++i) var += (X.col(order[static_cast<std::size_t>(i)]) - mu).array().square().matrix();
        var /= static_cast<double>(n_train);
        for (Eigen::Index j = 0; j < d; ++j) sigma(j) = var(j) > 1e-12 ? std::sqrt(var(j)) : 1.0;
    }
    auto gather = [&](Eigen::Index from, Eigen::Index to, Eigen::MatrixXd& Xs, std::vector<int>& ys) {
        Xs.resize(d, to - from);
        ys.resize(static_cast<std::size_t>(to - from));
        for (Eigen::Index i = from; i < to; ++i) {
            const auto src = order[static_cast<std::size_t>(i)];
            Xs.col(i - from) = ((X.col(src) - mu).array() / sigma.array()).matrix();
            ys[static_cast<std::size_t>(i - from)] = y[static_cast<std::size_t>(src)];
        }
    };
    Eigen::MatrixXd Xtrain, Xtest;
    std::vector<int> ytrain, ytest;
    gather(0, n_train, Xtrain, ytrain);
    gather(n_train, n, Xtest, ytest);

    TrainResult res;
    Mlp net(static_cast<int>(d), cfg.hidden, output_dim, rng);
    std::vector<Eigen::MatrixXd> mW, vW, gW;
    std::vector<Eigen::VectorXd> mb, vb, gb;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        mW.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
        vW.push_back(mW.back());
        mb.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
        vb.push_back(mb.back());
    }
    long step = 0;
    Mlp best = net;
    res.best_test_loss = net.loss(Xtest, ytest);
    int since_best = 0;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n_train));
    std::iota(perm.begin(), perm.end(), 0);
    Eigen::MatrixXd Xb;
    std::vector<int> yb;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double sum = 0.0;
        long batches = 0;
        for (Eigen::Index start = 0; start < n_train; start += cfg.batch) {
            const Eigen::Index end = std::min<Eigen::Index>(n_train, start + cfg.batch);
            Xb.resize(d, end - start);
            yb.resize(static_cast<std::size_t>(end - start));
            for (Eigen::Index i = start; i < end; ++i) {
                Xb.col(i - start) = Xtrain.col(perm[static_cast<std::size_t>(i)]);
                yb[static_cast<std::size_t>(i - start)] = ytrain[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
            }
            sum += net.loss_and_gradient(Xb, yb, gW, gb);
            ++batches;
            ++step;
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t l = 0; l < net.layer_count(); ++l) {
                mW[l] = cfg.beta1 * mW[l] + (1.0 - cfg.beta1) * gW[l];
                vW[l] = cfg.beta2 * vW[l] + (1.0 - cfg.beta2) * gW[l].cwiseAbs2();
                net.weights()[l].array() -=
                    cfg.learning_rate * (mW[l].array() / c1) / ((vW[l].array() / c2).sqrt() + cfg.adam_eps);
                mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * gb[l];
                vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * gb[l].cwiseAbs2();
                net.biases()[l].array() -=
                    cfg.learning_rate * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + cfg.adam_eps);
            }
        }
        res.train_loss.push_back(sum / static_cast<double>(batches));
        const double tl = net.loss(Xtest, ytest);
        res.test_loss.push_back(tl);
        res.epochs = epoch;
        if (tl < res.best_test_loss) {
            res.best_test_loss = tl;
            res.best_epoch = epoch;
            best = net;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    res.test_accuracy = accuracy(best, Xtest, ytest);
    res.train_accuracy = accuracy(best, Xtrain, ytrain);
    // Fold the standardization into the first layer so the network takes raw features.
    auto& W0 = best.weights()[0];
    best.biases()[0] -= W0 * (mu.array() / sigma.array()).matrix();
    W0 = W0.array().rowwise() / sigma.transpose().array();
    best.round_to_float();
    res.net = std::move(best);
    return res;
}

} // namespace kdtmpa
