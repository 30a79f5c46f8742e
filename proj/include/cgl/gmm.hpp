#pragma once

#include "cgl/graph.hpp"

#include <cstdint>
#include <vector>

namespace cgl {

/// Gaussian mixture with full covariances.
struct Gmm {
    VectorXd weights;
    MatrixXd means;  // K x d
    std::vector<MatrixXd> covariances;

    int components() const { return static_cast<int>(weights.size()); }
    Index dim() const { return means.cols(); }
};

struct GmmOptions {
    int max_iter = 100;
    /// Stop once the mean per-point log-likelihood gains less than this.
    double tol = 1e-3;
    /// Floor on covariance eigenvalues.
    double reg = 1e-6;
};

struct GmmFit {
    Gmm gmm;
    /// Mean per-point log-likelihood before each M step.
    std::vector<double> log_likelihood;
    int iterations = 0;
    bool converged = false;
};

/// EM initialized from k-means.
GmmFit fit_gmm(const MatrixXd& points, int components, std::uint64_t seed, const GmmOptions& options = {});

MatrixXd sample_gmm(const Gmm& gmm, Index count, std::uint64_t seed);

/// Mean per-point log-density.
double gmm_log_likelihood(const Gmm& gmm, const MatrixXd& points);

}  // namespace cgl
