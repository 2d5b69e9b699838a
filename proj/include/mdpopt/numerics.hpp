#pragma once

// Small scalar-generic kernels shared by every module. All exponentials are
// evaluated after subtracting the maximum, so no argument to exp is positive.

#include "mdpopt/types.hpp"

#include <cmath>
#include <limits>

namespace mdpopt {

/// log(sum_i exp(x_i)).
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
    using T = typename Derived::Scalar;
    const T m = x.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((x.array() - m).exp().sum());
}

/// exp(x) / sum(exp(x)), max-shifted.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
softmax(const Eigen::MatrixBase<Derived>& x) {
    using T = typename Derived::Scalar;
    const T m = x.maxCoeff();
    Eigen::Matrix<T, Eigen::Dynamic, 1> p = (x.array() - m).exp().matrix();
    return p / p.sum();
}

/// Negative conditional entropy h(rho) = sum_a rho_a log(rho_a / sum_b rho_b),
/// with 0 log 0 = 0. Precondition: rho >= 0 and not all zero.
template <typename Derived>
typename Derived::Scalar entropy_unchecked(const Eigen::MatrixBase<Derived>& rho) {
    using T = typename Derived::Scalar;
    const T total = rho.sum();
    T h = 0;
    for (Index i = 0; i < rho.size(); ++i) {
        const T x = rho(i);
        if (x > 0) h += x * std::log(x / total);
    }
    return h;
}

/// Sup-norm, zero for empty inputs.
template <typename Derived>
typename Derived::Scalar sup_norm(const Eigen::MatrixBase<Derived>& x) {
    return x.size() == 0 ? typename Derived::Scalar(0) : x.cwiseAbs().maxCoeff();
}

inline constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

} // namespace mdpopt
