#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "vap/nn/losses.hpp"
#include "vap/nn/mlp.hpp"
#include "vap/nn/optim.hpp"

namespace vap::nn {

struct TrainConfig {
    int epochs = 0;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;

    void validate() const {
        if (epochs < 0) throw ShapeError("epochs must be >= 0");
        if (batch_size < 1) throw ShapeError("batch_size must be >= 1");
        if (!(learning_rate > 0)) throw ShapeError("learning_rate must be > 0");
    }
};

template <typename S>
struct RegressionBatch {
    MatX<S> X;  // input width x n
    MatX<S> T;  // output width x n
};

// Splits columns into contiguous batches; order is the caller's (shuffle the
// columns first for stochastic training).
template <typename DA, typename DB>
std::vector<RegressionBatch<typename DA::Scalar>> make_batches(const Eigen::MatrixBase<DA>& X,
                                                               const Eigen::MatrixBase<DB>& T,
                                                               int batch_size) {
    using S = typename DA::Scalar;
    if (X.cols() != T.cols()) throw ShapeError("inputs and targets differ in sample count");
    if (batch_size < 1) throw ShapeError("batch_size must be >= 1");
    std::vector<RegressionBatch<S>> out;
    for (Eigen::Index start = 0; start < X.cols(); start += batch_size) {
        const Eigen::Index n = std::min<Eigen::Index>(batch_size, X.cols() - start);
        out.push_back({X.middleCols(start, n), T.middleCols(start, n)});
    }
    return out;
}

// Generic minibatch loop. loss_fn(output, batch) returns the batch loss and
// the gradient wrt the output; the input store is never mutated (the updated
// copy is returned). Throws DivergenceError on a non-finite loss.
template <typename S, typename Batch, typename LossFn>
Mlp<S> train(Mlp<S> params, const std::vector<Batch>& batches, const TrainConfig& cfg,
             LossFn&& loss_fn, std::vector<double>* loss_trace = nullptr) {
    cfg.validate();
    Optimizer<S> opt(cfg.optimizer, static_cast<S>(cfg.learning_rate));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0;
        for (const auto& batch : batches) {
            ForwardCache<S> cache;
            const MatX<S> out = forward(params, batch.X, &cache);
            auto [loss, d_out] = loss_fn(out, batch);
            if (!std::isfinite(static_cast<double>(loss)))
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
            MlpGrads<S> grads = backward(params, cache, d_out);
            opt.step(params, grads);
            epoch_loss += static_cast<double>(loss);
        }
        if (loss_trace)
            loss_trace->push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(
                                                   1, batches.size())));
    }
    return params;
}

// Mean-per-sample squared error regression; the default loss for the latent
// prediction model and the unit tests.
template <typename S>
std::pair<S, MatX<S>> regression_mse(const MatX<S>& out, const RegressionBatch<S>& batch) {
    const S inv_n = S(1) / static_cast<S>(out.cols());
    return {mse(out, batch.T) * inv_n, mse_grad(out, batch.T) * inv_n};
}

}  // namespace vap::nn
