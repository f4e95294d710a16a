#pragma once

#include <activesplit/error.hpp>
#include <activesplit/rng.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace activesplit {

struct MlpSpec {
    std::vector<int> hidden_sizes{128, 16};
    std::string activation = "relu";
    bool standardize = true;
    double learning_rate = 1e-3;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 0;
    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Fully connected ReLU network with a single linear output, trained on
/// mean squared error. Activations are laid out one sample per column.
class DenseNetwork {
public:
    DenseNetwork() = default;

    /// Glorot-uniform weights, zero biases.
    DenseNetwork(int inputs, const std::vector<int>& hidden, Rng& rng) {
        std::vector<int> sizes{inputs};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(1);
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const double limit = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
            Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-limit, limit);
            weights_.push_back(std::move(w));
            biases_.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
        }
    }

    std::size_t layers() const noexcept { return weights_.size(); }
    Eigen::MatrixXd& weight(std::size_t l) { return weights_[l]; }
    Eigen::VectorXd& bias(std::size_t l) { return biases_[l]; }
    const Eigen::MatrixXd& weight(std::size_t l) const { return weights_[l]; }
    const Eigen::VectorXd& bias(std::size_t l) const { return biases_[l]; }

    Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
        return n;
    }

    /// Inputs: features x samples. Returns a row of predictions.
    Eigen::RowVectorXd forward(const Eigen::MatrixXd& inputs) const {
        Eigen::MatrixXd a = inputs;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            Eigen::MatrixXd z = weights_[l] * a;
            z.colwise() += biases_[l];
            a = l + 1 < weights_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
        }
        return a.row(0);
    }

    struct Gradient {
        std::vector<Eigen::MatrixXd> weights;
        std::vector<Eigen::VectorXd> biases;
    };

    /// Mean squared error over the columns of `inputs` and its gradient.
    double loss_and_gradient(const Eigen::MatrixXd& inputs, const Eigen::RowVectorXd& targets, Gradient& grad) const {
        const std::size_t depth = weights_.size();
        std::vector<Eigen::MatrixXd> acts(depth + 1);
        std::vector<Eigen::MatrixXd> pre(depth);
        acts[0] = inputs;
        for (std::size_t l = 0; l < depth; ++l) {
            pre[l] = weights_[l] * acts[l];
            pre[l].colwise() += biases_[l];
            acts[l + 1] = l + 1 < depth ? Eigen::MatrixXd(pre[l].cwiseMax(0.0)) : pre[l];
        }
        const auto batch = static_cast<double>(inputs.cols());
        const Eigen::RowVectorXd residual = acts[depth].row(0) - targets;
        const double loss = residual.squaredNorm() / batch;

        grad.weights.resize(depth);
        grad.biases.resize(depth);
        Eigen::MatrixXd delta = (2.0 / batch) * residual;
        for (std::size_t l = depth; l-- > 0;) {
            grad.weights[l] = delta * acts[l].transpose();
            grad.biases[l] = delta.rowwise().sum();
            if (l > 0) {
                delta = weights_[l].transpose() * delta;
                delta = delta.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
            }
        }
        return loss;
    }

    /// Parameters flattened layer by layer (weights column-major, then bias).
    Eigen::VectorXd flatten() const {
        Eigen::VectorXd out(parameter_count());
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            out.segment(k, weights_[l].size()) = weights_[l].reshaped();
            k += weights_[l].size();
            out.segment(k, biases_[l].size()) = biases_[l];
            k += biases_[l].size();
        }
        return out;
    }

    void assign(const Eigen::VectorXd& flat) {
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            weights_[l].reshaped() = flat.segment(k, weights_[l].size());
            k += weights_[l].size();
            biases_[l] = flat.segment(k, biases_[l].size());
            k += biases_[l].size();
        }
    }

    static Eigen::VectorXd flatten(const Gradient& g) {
        Eigen::Index n = 0;
        for (std::size_t l = 0; l < g.weights.size(); ++l) n += g.weights[l].size() + g.biases[l].size();
        Eigen::VectorXd out(n);
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < g.weights.size(); ++l) {
            out.segment(k, g.weights[l].size()) = g.weights[l].reshaped();
            k += g.weights[l].size();
            out.segment(k, g.biases[l].size()) = g.biases[l];
            k += g.biases[l].size();
        }
        return out;
    }

private:
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
};

struct MlpModel {
    DenseNetwork network;
    Eigen::RowVectorXd feature_mean;
    Eigen::RowVectorXd feature_scale;
    int epochs_run = 0;

    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
        return ((x.rowwise() - feature_mean).array().rowwise() / feature_scale.array()).matrix().transpose();
    }

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const { return network.forward(transform(x)).transpose(); }
};

/// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-7) for a fixed number of
/// epochs, reshuffling every epoch. The output bias starts at the mean
/// training target.
inline MlpModel fit_mlp(const MlpSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (spec.activation != "relu") throw DomainError("mlp activation must be relu, got '" + spec.activation + "'");
    if (spec.hidden_sizes.empty()) throw DomainError("mlp needs at least one hidden layer");
    for (int h : spec.hidden_sizes)
        if (h < 1) throw DomainError("mlp hidden sizes must be >= 1");
    if (!(spec.learning_rate > 0.0)) throw DomainError("mlp learning_rate must be > 0");
    if (spec.epochs < 1 || spec.batch_size < 1) throw DomainError("mlp epochs and batch_size must be >= 1");

    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-7;
    const Eigen::Index n = x.rows();

    MlpModel model;
    if (spec.standardize) {
        model.feature_mean = x.colwise().mean();
        const Eigen::MatrixXd centred = x.rowwise() - model.feature_mean;
        model.feature_scale = (centred.array().square().colwise().sum() / static_cast<double>(n)).sqrt();
        for (Eigen::Index c = 0; c < model.feature_scale.size(); ++c)
            if (model.feature_scale(c) == 0.0) model.feature_scale(c) = 1.0;
    } else {
        model.feature_mean = Eigen::RowVectorXd::Zero(x.cols());
        model.feature_scale = Eigen::RowVectorXd::Ones(x.cols());
    }
    const Eigen::MatrixXd inputs = model.transform(x);
    const Eigen::RowVectorXd targets = y.transpose();

    Rng rng(spec.seed);
    model.network = DenseNetwork(static_cast<int>(x.cols()), spec.hidden_sizes, rng);
    auto& net = model.network;
    net.bias(net.layers() - 1)(0) = y.mean();

    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    for (std::size_t l = 0; l < net.layers(); ++l) {
        m_w.push_back(Eigen::MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols()));
        v_w.push_back(m_w.back());
        m_b.push_back(Eigen::VectorXd::Zero(net.bias(l).size()));
        v_b.push_back(m_b.back());
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    DenseNetwork::Gradient grad;
    long step = 0;
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (Eigen::Index start = 0; start < n; start += spec.batch_size) {
            const Eigen::Index size = std::min<Eigen::Index>(spec.batch_size, n - start);
            Eigen::MatrixXd bx(inputs.rows(), size);
            Eigen::RowVectorXd by(size);
            for (Eigen::Index k = 0; k < size; ++k) {
                const auto idx = order[static_cast<std::size_t>(start + k)];
                bx.col(k) = inputs.col(idx);
                by(k) = targets(idx);
            }
            epoch_loss += net.loss_and_gradient(bx, by, grad) * static_cast<double>(size);
            ++step;
            const double corr1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double corr2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            const double lr = spec.learning_rate * std::sqrt(corr2) / corr1;
            for (std::size_t l = 0; l < net.layers(); ++l) {
                m_w[l] = kBeta1 * m_w[l] + (1.0 - kBeta1) * grad.weights[l];
                v_w[l] = kBeta2 * v_w[l] + (1.0 - kBeta2) * grad.weights[l].cwiseAbs2();
                net.weight(l).array() -= lr * m_w[l].array() / (v_w[l].array().sqrt() + kEps);
                m_b[l] = kBeta1 * m_b[l] + (1.0 - kBeta1) * grad.biases[l];
                v_b[l] = kBeta2 * v_b[l] + (1.0 - kBeta2) * grad.biases[l].cwiseAbs2();
                net.bias(l).array() -= lr * m_b[l].array() / (v_b[l].array().sqrt() + kEps);
            }
        }
        if (!std::isfinite(epoch_loss))
            throw TrainingError("mlp training diverged (non-finite loss) at epoch " + std::to_string(epoch));
        model.epochs_run = epoch + 1;
    }
    return model;
}

}  // namespace activesplit
