#pragma once

// Fully connected networks with hand-written backpropagation. Parameters live
// in one flat vector (per layer: W as out x in column-major, then b) so that
// soft updates, Adam and finite-difference checks work on a single array.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sorl/errors.hpp"

namespace sorl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class OutputHead { Linear, Sigmoid };

struct MLPSpec {
    std::vector<int> widths;  // input, hidden..., output
    std::string activation = "tanh";
    OutputHead head = OutputHead::Linear;
    double init_scale = 1.0;
    double learning_rate = 3e-4;
};

class Mlp {
public:
    struct Tape {
        Matrix input;
        std::vector<Matrix> post;  // activation output of every layer (last = network output)
    };

    Mlp() = default;

    Mlp(MLPSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
        if (spec_.widths.size() < 2) throw InputError("MLPSpec needs at least input and output widths");
        for (int w : spec_.widths)
            if (w < 1) throw InputError("MLPSpec widths must be positive");
        if (spec_.activation != "tanh" && spec_.activation != "relu")
            throw InputError("unknown activation '" + spec_.activation + "'");
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
            offsets_.push_back(total);
            total += static_cast<std::size_t>(spec_.widths[l + 1]) * (spec_.widths[l] + 1);
        }
        params_ = Vector::Zero(static_cast<Eigen::Index>(total));
        grads_ = Vector::Zero(static_cast<Eigen::Index>(total));
        for (std::size_t l = 0; l < layers(); ++l) {
            const double bound = spec_.init_scale / std::sqrt(static_cast<double>(in(l)));
            std::uniform_real_distribution<double> u(-bound, bound);
            auto w = weight(l);
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
        }
    }

    const MLPSpec& spec() const noexcept { return spec_; }
    std::size_t layers() const noexcept { return offsets_.size(); }
    int in(std::size_t l) const { return spec_.widths[l]; }
    int out(std::size_t l) const { return spec_.widths[l + 1]; }
    int input_dim() const { return spec_.widths.front(); }
    int output_dim() const { return spec_.widths.back(); }

    Eigen::Map<Matrix> weight(std::size_t l) { return {params_.data() + offsets_[l], out(l), in(l)}; }
    Eigen::Map<const Matrix> weight(std::size_t l) const { return {params_.data() + offsets_[l], out(l), in(l)}; }
    Eigen::Map<Vector> bias(std::size_t l) { return {params_.data() + offsets_[l] + out(l) * in(l), out(l)}; }
    Eigen::Map<const Vector> bias(std::size_t l) const {
        return {params_.data() + offsets_[l] + out(l) * in(l), out(l)};
    }

    Vector& params() noexcept { return params_; }
    const Vector& params() const noexcept { return params_; }
    Vector& grads() noexcept { return grads_; }
    const Vector& grads() const noexcept { return grads_; }
    void zero_grad() { grads_.setZero(); }

    /// Columns of x are samples.
    Matrix forward(const Matrix& x) const {
        Tape t;
        return forward(x, t);
    }

    Matrix forward(const Matrix& x, Tape& tape) const {
        if (x.rows() != input_dim()) throw InputError("network input has wrong dimension");
        tape.input = x;
        tape.post.clear();
        const Matrix* h = &tape.input;
        for (std::size_t l = 0; l < layers(); ++l) {
            Matrix z = weight(l) * (*h);
            z.colwise() += bias(l);
            if (l + 1 < layers()) activate(z);
            else if (spec_.head == OutputHead::Sigmoid) z = z.unaryExpr([](double v) { return sigmoid(v); });
            tape.post.push_back(std::move(z));
            h = &tape.post.back();
        }
        return tape.post.back();
    }

    /// Backpropagates dL/d(output). Adds parameter gradients into grads()
    /// when accumulate is set and returns dL/d(input).
    Matrix backward(const Tape& tape, const Matrix& d_out, bool accumulate = true) {
        Matrix delta = d_out;
        for (std::size_t l = layers(); l-- > 0;) {
            const Matrix& y = tape.post[l];
            if (l + 1 == layers()) {
                if (spec_.head == OutputHead::Sigmoid) delta = delta.cwiseProduct(y.unaryExpr([](double v) { return v * (1.0 - v); }));
            } else {
                delta = delta.cwiseProduct(activation_derivative(y));
            }
            const Matrix& h = l == 0 ? tape.input : tape.post[l - 1];
            if (accumulate) {
                Eigen::Map<Matrix> gw(grads_.data() + offsets_[l], out(l), in(l));
                Eigen::Map<Vector> gb(grads_.data() + offsets_[l] + out(l) * in(l), out(l));
                gw.noalias() += delta * h.transpose();
                gb += delta.rowwise().sum();
            }
            delta = weight(l).transpose() * delta;
        }
        return delta;
    }

    /// target <- rho * online + (1 - rho) * target.
    void soft_update_from(const Mlp& online, double rho) {
        if (!(rho > 0.0 && rho <= 1.0)) throw InputError("soft-update coefficient must lie in (0,1]");
        if (online.params_.size() != params_.size()) throw InputError("soft update between different shapes");
        params_ = rho * online.params_ + (1.0 - rho) * params_;
    }

    bool finite() const { return params_.allFinite(); }

    static double sigmoid(double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    }

private:
    void activate(Matrix& z) const {
        if (spec_.activation == "tanh") z = z.array().tanh().matrix();
        else z = z.cwiseMax(0.0);
    }
    Matrix activation_derivative(const Matrix& y) const {
        if (spec_.activation == "tanh") return (1.0 - y.array().square()).matrix();
        return (y.array() > 0.0).cast<double>().matrix();
    }

    MLPSpec spec_;
    std::vector<std::size_t> offsets_;
    Vector params_;
    Vector grads_;
};

class Adam {
public:
    Adam() = default;
    Adam(std::size_t n, double lr) : lr_(lr), m_(Vector::Zero(static_cast<Eigen::Index>(n))), v_(m_) {}

    void step(Vector& params, const Vector& grads) {
        ++t_;
        m_ = b1_ * m_ + (1.0 - b1_) * grads;
        v_ = b2_ * v_ + (1.0 - b2_) * grads.cwiseProduct(grads);
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }

    double learning_rate() const noexcept { return lr_; }
    long steps() const noexcept { return t_; }

private:
    double lr_ = 3e-4;
    double b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    Vector m_, v_;
    long t_ = 0;
};

}  // namespace sorl
