#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace vap {

// Application-wide scalar. Persisted tensors are little-endian f32, so the
// in-memory representation matches the container format bit for bit.
using Scalar = float;

using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar l1_distance(const Eigen::MatrixBase<DerivedA>& a,
                                      const Eigen::MatrixBase<DerivedB>& b) {
    return (a - b).cwiseAbs().sum();
}

}  // namespace vap
