#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "vap/errors.hpp"
#include "vap/rng.hpp"

namespace vap::nn {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class Activation { linear, leaky_relu };

// slope of the negative half of the leaky rectifier
inline constexpr double kLeakySlope = 0.01;

template <typename S>
MatX<S> activate(const MatX<S>& pre, Activation act) {
    switch (act) {
        case Activation::linear: return pre;
        case Activation::leaky_relu:
            return (pre.array() >= S(0))
                .select(pre, pre * static_cast<S>(kLeakySlope));
    }
    return pre;
}

// upstream gradient through the activation, given the pre-activation values
template <typename S>
MatX<S> activate_backward(const MatX<S>& pre, const MatX<S>& d_post, Activation act) {
    switch (act) {
        case Activation::linear: return d_post;
        case Activation::leaky_relu:
            return (pre.array() >= S(0))
                .select(d_post, d_post * static_cast<S>(kLeakySlope));
    }
    return d_post;
}

template <typename S>
struct Dense {
    MatX<S> W;  // out x in
    VecX<S> b;
    Activation act = Activation::linear;
};

struct LayerSpec {
    Eigen::Index in = 0;
    Eigen::Index out = 0;
    Activation act = Activation::linear;
};

// Dense chain; the parameter store for every learned model in the project.
template <typename S>
struct Mlp {
    std::vector<Dense<S>> layers;

    Eigen::Index input_width() const { return layers.empty() ? 0 : layers.front().W.cols(); }
    Eigen::Index output_width() const { return layers.empty() ? 0 : layers.back().W.rows(); }

    std::vector<LayerSpec> arch() const {
        std::vector<LayerSpec> spec;
        spec.reserve(layers.size());
        for (const auto& l : layers) spec.push_back({l.W.cols(), l.W.rows(), l.act});
        return spec;
    }

    Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (const auto& l : layers) n += l.W.size() + l.b.size();
        return n;
    }

    bool all_finite() const {
        for (const auto& l : layers)
            if (!l.W.allFinite() || !l.b.allFinite()) return false;
        return true;
    }
};

// Scaled uniform fan-in initialization, biases zero. Hidden layers use
// `hidden`, the last layer is linear.
template <typename S>
Mlp<S> make_mlp(const std::vector<Eigen::Index>& widths, Rng& rng,
                Activation hidden = Activation::leaky_relu) {
    if (widths.size() < 2) throw ShapeError("mlp needs at least input and output widths");
    Mlp<S> mlp;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Dense<S> layer;
        const Eigen::Index in = widths[l], out = widths[l + 1];
        if (in < 1 || out < 1) throw ShapeError("mlp widths must be positive");
        const double bound = std::sqrt(1.0 / static_cast<double>(in));
        layer.W = MatX<S>::NullaryExpr(
            out, in, [&]() { return static_cast<S>(rng.uniform(-bound, bound)); });
        layer.b = VecX<S>::Zero(out);
        layer.act = (l + 2 < widths.size()) ? hidden : Activation::linear;
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

// Everything backward needs: per-layer inputs and pre-activations.
// xs[0] is the network input; xs[l+1] = activate(pre[l]).
template <typename S>
struct ForwardCache {
    std::vector<MatX<S>> xs;
    std::vector<MatX<S>> pre;
};

// Batched forward pass; columns are samples.
template <typename S>
MatX<S> forward(const Mlp<S>& mlp, const MatX<S>& x, ForwardCache<S>* cache = nullptr) {
    if (mlp.layers.empty()) throw ShapeError("forward through an empty mlp");
    if (x.rows() != mlp.input_width())
        throw ShapeError("input width " + std::to_string(x.rows()) + " != mlp input " +
                         std::to_string(mlp.input_width()));
    if (cache) {
        cache->xs.clear();
        cache->pre.clear();
        cache->xs.push_back(x);
    }
    MatX<S> h = x;
    for (const auto& layer : mlp.layers) {
        MatX<S> pre = (layer.W * h).colwise() + layer.b;
        h = activate(pre, layer.act);
        if (cache) {
            cache->pre.push_back(std::move(pre));
            cache->xs.push_back(h);
        }
    }
    return h;
}

template <typename S>
VecX<S> forward(const Mlp<S>& mlp, const VecX<S>& x, ForwardCache<S>* cache = nullptr) {
    return forward(mlp, MatX<S>(x), cache).col(0);
}

template <typename S>
struct MlpGrads {
    std::vector<MatX<S>> dW;
    std::vector<VecX<S>> db;
    MatX<S> dX;  // gradient wrt the forward input

    MlpGrads& operator+=(const MlpGrads& o) {
        for (std::size_t l = 0; l < dW.size(); ++l) {
            dW[l] += o.dW[l];
            db[l] += o.db[l];
        }
        dX += o.dX;
        return *this;
    }

    MlpGrads& operator*=(S c) {
        for (std::size_t l = 0; l < dW.size(); ++l) {
            dW[l] *= c;
            db[l] *= c;
        }
        dX *= c;
        return *this;
    }
};

template <typename S>
MlpGrads<S> zero_grads(const Mlp<S>& mlp, Eigen::Index batch = 1) {
    MlpGrads<S> g;
    for (const auto& l : mlp.layers) {
        g.dW.push_back(MatX<S>::Zero(l.W.rows(), l.W.cols()));
        g.db.push_back(VecX<S>::Zero(l.b.size()));
    }
    g.dX = MatX<S>::Zero(mlp.input_width(), batch);
    return g;
}

// Exact reverse-mode gradients for the cached forward pass. d_out has the
// same shape as the forward output.
template <typename S, typename D>
MlpGrads<S> backward(const Mlp<S>& mlp, const ForwardCache<S>& cache,
                     const Eigen::MatrixBase<D>& d_out) {
    if (cache.pre.size() != mlp.layers.size())
        throw ShapeError("cache does not match mlp depth");
    if (d_out.rows() != mlp.output_width() || d_out.cols() != cache.xs.front().cols())
        throw ShapeError("upstream gradient shape mismatch");

    MlpGrads<S> g;
    g.dW.resize(mlp.layers.size());
    g.db.resize(mlp.layers.size());
    MatX<S> delta = d_out;
    for (std::size_t l = mlp.layers.size(); l-- > 0;) {
        delta = activate_backward(cache.pre[l], delta, mlp.layers[l].act);
        g.dW[l].noalias() = delta * cache.xs[l].transpose();
        g.db[l] = delta.rowwise().sum();
        delta = MatX<S>(mlp.layers[l].W.transpose() * delta);
    }
    g.dX = std::move(delta);
    return g;
}

}  // namespace vap::nn
