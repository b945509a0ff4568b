#pragma once

#include <algorithm>
#include <utility>

#include "vap/nn/mlp.hpp"

namespace vap::nn {

template <typename S>
VecX<S> flatten(const Mlp<S>& mlp) {
    VecX<S> flat(mlp.parameter_count());
    Eigen::Index pos = 0;
    for (const auto& l : mlp.layers) {
        flat.segment(pos, l.W.size()) = Eigen::Map<const VecX<S>>(l.W.data(), l.W.size());
        pos += l.W.size();
        flat.segment(pos, l.b.size()) = l.b;
        pos += l.b.size();
    }
    return flat;
}

template <typename S>
void unflatten(const VecX<S>& flat, Mlp<S>* mlp) {
    if (flat.size() != mlp->parameter_count())
        throw ShapeError("flat parameter vector does not match model");
    Eigen::Index pos = 0;
    for (auto& l : mlp->layers) {
        l.W = Eigen::Map<const MatX<S>>(flat.data() + pos, l.W.rows(), l.W.cols());
        pos += l.W.size();
        l.b = flat.segment(pos, l.b.size());
        pos += l.b.size();
    }
}

template <typename S>
VecX<S> flatten_grads(const MlpGrads<S>& g) {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < g.dW.size(); ++l) total += g.dW[l].size() + g.db[l].size();
    VecX<S> flat(total);
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
        flat.segment(pos, g.dW[l].size()) =
            Eigen::Map<const VecX<S>>(g.dW[l].data(), g.dW[l].size());
        pos += g.dW[l].size();
        flat.segment(pos, g.db[l].size()) = g.db[l];
        pos += g.db[l].size();
    }
    return flat;
}

// Central-difference check of analytic gradients. `f(params)` returns the
// scalar loss and its gradients; the result is the worst per-coordinate
// relative error against (f(p+h) - f(p-h)) / 2h. Run with S = double; the
// tolerance regime is below float resolution.
template <typename S, typename F>
S gradient_check_rel_error(const Mlp<S>& params, F&& f, S h) {
    const auto [loss0, grads] = f(params);
    (void)loss0;
    const VecX<S> analytic = flatten_grads(grads);
    VecX<S> flat = flatten(params);
    Mlp<S> probe = params;

    S worst = 0;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        const S saved = flat[i];
        flat[i] = saved + h;
        unflatten(flat, &probe);
        const S up = f(probe).first;
        flat[i] = saved - h;
        unflatten(flat, &probe);
        const S down = f(probe).first;
        flat[i] = saved;

        const S numeric = (up - down) / (S(2) * h);
        const S denom = std::max({std::abs(numeric), std::abs(analytic[i]), S(1e-3)});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace vap::nn
