#pragma once

#include <algorithm>
#include <cmath>

#include "vap/nn/mlp.hpp"

namespace vap::nn {

// Sum-reduced squared error; callers normalize by batch size where needed.
template <typename DA, typename DB>
typename DA::Scalar mse(const Eigen::MatrixBase<DA>& x, const Eigen::MatrixBase<DB>& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw ShapeError("mse operands differ in shape");
    return (x - y).squaredNorm();
}

template <typename DA, typename DB>
MatX<typename DA::Scalar> mse_grad(const Eigen::MatrixBase<DA>& x,
                                   const Eigen::MatrixBase<DB>& y) {
    using S = typename DA::Scalar;
    return S(2) * (x - y);
}

// KL(N(mean, diag(exp(logvar))) || N(0, I)), summed over entries.
template <typename DA, typename DB>
typename DA::Scalar kl_standard_normal(const Eigen::MatrixBase<DA>& mean,
                                       const Eigen::MatrixBase<DB>& logvar) {
    using S = typename DA::Scalar;
    if (mean.rows() != logvar.rows() || mean.cols() != logvar.cols())
        throw ShapeError("kl operands differ in shape");
    return S(-0.5) *
           (S(1) + logvar.array() - mean.array().square() - logvar.array().exp()).sum();
}

template <typename D>
MatX<typename D::Scalar> kl_grad_mean(const Eigen::MatrixBase<D>& mean) {
    return mean;
}

template <typename D>
MatX<typename D::Scalar> kl_grad_logvar(const Eigen::MatrixBase<D>& logvar) {
    using S = typename D::Scalar;
    return S(0.5) * (logvar.array().exp() - S(1)).matrix();
}

// Contrastive terms over a nonnegative distance d.
template <typename S>
S attract(S d) {
    return d * d;
}

template <typename S>
S attract_deriv(S d) {
    return S(2) * d;
}

template <typename S>
S hinge_repel(S d, S d_m) {
    const S gap = std::max(S(0), d_m - d);
    return gap * gap;
}

template <typename S>
S hinge_repel_deriv(S d, S d_m) {
    return S(-2) * std::max(S(0), d_m - d);
}

}  // namespace vap::nn
