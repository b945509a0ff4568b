#pragma once

#include <cmath>
#include <vector>

#include "vap/nn/mlp.hpp"

namespace vap::nn {

enum class OptimizerKind { sgd, adam };

// Single-writer parameter updater. State buffers are keyed by layer order and
// sized lazily from the first step; one optimizer instance per model.
template <typename S>
class Optimizer {
public:
    explicit Optimizer(OptimizerKind kind, S learning_rate)
        : kind_(kind), lr_(learning_rate) {}

    void step(Mlp<S>& params, const MlpGrads<S>& grads) {
        if (grads.dW.size() != params.layers.size())
            throw ShapeError("gradient store does not match model depth");
        if (kind_ == OptimizerKind::sgd) {
            for (std::size_t l = 0; l < params.layers.size(); ++l) {
                params.layers[l].W -= lr_ * grads.dW[l];
                params.layers[l].b -= lr_ * grads.db[l];
            }
            return;
        }
        if (mW_.empty()) {
            for (const auto& layer : params.layers) {
                mW_.push_back(MatX<S>::Zero(layer.W.rows(), layer.W.cols()));
                vW_.push_back(MatX<S>::Zero(layer.W.rows(), layer.W.cols()));
                mb_.push_back(VecX<S>::Zero(layer.b.size()));
                vb_.push_back(VecX<S>::Zero(layer.b.size()));
            }
        }
        ++t_;
        const S c1 = S(1) - static_cast<S>(std::pow(double(beta1_), double(t_)));
        const S c2 = S(1) - static_cast<S>(std::pow(double(beta2_), double(t_)));
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
                m = beta1_ * m + (S(1) - beta1_) * g;
                v = (beta2_ * v.array() + (S(1) - beta2_) * g.array().square()).matrix();
                p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
            };
            update(params.layers[l].W, mW_[l], vW_[l], grads.dW[l]);
            update(params.layers[l].b, mb_[l], vb_[l], grads.db[l]);
        }
    }

private:
    OptimizerKind kind_;
    S lr_;
    S beta1_ = S(0.9);
    S beta2_ = S(0.999);
    S eps_ = S(1e-8);
    long t_ = 0;
    std::vector<MatX<S>> mW_, vW_;
    std::vector<VecX<S>> mb_, vb_;
};

}  // namespace vap::nn
