#pragma once

#include "cgl/error.hpp"

#include <Eigen/Dense>

#include <vector>

namespace cgl {

struct BjorckConfig {
    int p_order = 1;
    int iterations = 15;
    /// Divide by the spectral norm before iterating.
    bool prescale = true;
};

/// Coefficient of Q^i in the truncated series of (I - Q)^{-1/2}:
/// 1, 1/2, 3/8, 5/16, 35/128, ...
inline double bjorck_coefficient(int i) {
    double c = 1.0;
    for (int k = 1; k <= i; ++k) c *= (2.0 * k - 1.0) / (2.0 * k);
    return c;
}

/// Largest singular value.
template <class Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& w) {
    using Scalar = typename Derived::Scalar;
    if (w.size() == 0) return Scalar(0);
    Eigen::JacobiSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> svd(w.eval());
    return svd.singularValues()(0);
}

/// Björck iteration W <- W sum_i c_i Q^i with Q = I - W^T W. Wide matrices
/// are processed through their transpose so the iteration drives the rows
/// to an orthonormal set. Residuals ||W^T W - I||_F are appended per step
/// (index 0 is the starting residual). Throws ConvergenceError when the
/// residual grows.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> bjorck_orthonormalize(
    const Eigen::MatrixBase<Derived>& w, const BjorckConfig& cfg,
    std::vector<typename Derived::Scalar>* residuals = nullptr) {
    using Scalar = typename Derived::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (cfg.p_order < 1 || cfg.iterations < 0) throw std::invalid_argument("bjorck: need p_order >= 1, iterations >= 0");
    const bool wide = w.rows() < w.cols();
    Mat cur = wide ? Mat(w.transpose()) : Mat(w);
    if (cfg.prescale) {
        const Scalar norm = spectral_norm(cur);
        if (norm > Scalar(0)) cur /= norm;
    }
    const Mat id = Mat::Identity(cur.cols(), cur.cols());
    Mat q = id - cur.transpose() * cur;
    Scalar prev = q.norm();
    if (residuals) residuals->push_back(prev);
    for (int k = 0; k < cfg.iterations; ++k) {
        Mat series = id;
        Mat power = id;
        for (int i = 1; i <= cfg.p_order; ++i) {
            power = power * q;
            series += Scalar(bjorck_coefficient(i)) * power;
        }
        cur = cur * series;
        q = id - cur.transpose() * cur;
        const Scalar res = q.norm();
        if (residuals) residuals->push_back(res);
        if (res > prev * Scalar(1 + 1e-9) + Scalar(1e-12)) {
            throw ConvergenceError("bjorck: residual increased", static_cast<double>(res));
        }
        prev = res;
    }
    return wide ? Mat(cur.transpose()) : cur;
}

}  // namespace cgl
