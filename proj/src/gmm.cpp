#include "cgl/gmm.hpp"

#include "cgl/clustering.hpp"
#include "cgl/error.hpp"
#include "cgl/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cgl {

namespace {

MatrixXd floor_eigenvalues(const MatrixXd& cov, double reg) {
    const MatrixXd sym = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    const VectorXd vals = es.eigenvalues().cwiseMax(reg);
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

// log N(x_i | mu, cov) for every row.
VectorXd log_density(const MatrixXd& points, const VectorXd& mu, const MatrixXd& cov) {
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw std::runtime_error("gmm: covariance is not positive definite");
    const MatrixXd& l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const double d = static_cast<double>(points.cols());
    MatrixXd centered = points.rowwise() - mu.transpose();
    const MatrixXd z = llt.matrixL().solve(centered.transpose());
    const VectorXd maha = z.colwise().squaredNorm().transpose();
    return (-0.5 * (maha.array() + log_det + d * std::log(2.0 * std::numbers::pi))).matrix();
}

// Per-component log(pi_k) + log N, as an m x K matrix.
MatrixXd joint_log(const Gmm& gmm, const MatrixXd& points) {
    MatrixXd out(points.rows(), gmm.components());
    for (int k = 0; k < gmm.components(); ++k) {
        const double lw = gmm.weights[k] > 0.0 ? std::log(gmm.weights[k]) : -std::numeric_limits<double>::infinity();
        out.col(k) = (log_density(points, gmm.means.row(k).transpose(), gmm.covariances[k]).array() + lw).matrix();
    }
    return out;
}

VectorXd log_sum_exp_rows(const MatrixXd& m) {
    VectorXd out(m.rows());
    for (Index i = 0; i < m.rows(); ++i) {
        const double top = m.row(i).maxCoeff();
        out[i] = top + std::log((m.row(i).array() - top).exp().sum());
    }
    return out;
}

}  // namespace

GmmFit fit_gmm(const MatrixXd& points, int components, std::uint64_t seed, const GmmOptions& options) {
    if (components < 1) throw std::invalid_argument("fit_gmm: need at least one component");
    if (points.rows() < components) throw std::invalid_argument("fit_gmm: fewer points than components");
    if (!(options.reg > 0.0)) throw std::invalid_argument("fit_gmm: reg must be positive");
    const Index m = points.rows();
    const Index d = points.cols();

    const ClusterResult init = kmeans(points, components, seed);
    MatrixXd resp = MatrixXd::Zero(m, components);
    for (Index i = 0; i < m; ++i) resp(i, init.partition.assignment[i]) = 1.0;

    GmmFit fit;
    Gmm& gmm = fit.gmm;
    gmm.weights = VectorXd::Zero(components);
    gmm.means = MatrixXd::Zero(components, d);
    gmm.covariances.assign(static_cast<std::size_t>(components), MatrixXd::Identity(d, d));

    const auto m_step = [&] {
        for (int k = 0; k < components; ++k) {
            const double nk = resp.col(k).sum();
            gmm.weights[k] = nk / static_cast<double>(m);
            if (nk <= 1e-300) continue;
            gmm.means.row(k) = (resp.col(k).transpose() * points) / nk;
            const MatrixXd centered = points.rowwise() - gmm.means.row(k);
            const MatrixXd cov = centered.transpose() * resp.col(k).asDiagonal() * centered / nk;
            gmm.covariances[k] = floor_eigenvalues(cov, options.reg);
        }
        gmm.weights /= gmm.weights.sum();
    };

    m_step();
    for (int it = 0; it < options.max_iter; ++it) {
        const MatrixXd joint = joint_log(gmm, points);
        const VectorXd norm = log_sum_exp_rows(joint);
        const double ll = norm.mean();
        fit.iterations = it + 1;
        if (!fit.log_likelihood.empty() && ll - fit.log_likelihood.back() < options.tol) {
            fit.log_likelihood.push_back(ll);
            fit.converged = true;
            break;
        }
        fit.log_likelihood.push_back(ll);
        resp = (joint.colwise() - norm).array().exp().matrix();
        m_step();
    }
    return fit;
}

MatrixXd sample_gmm(const Gmm& gmm, Index count, std::uint64_t seed) {
    if (count < 0) throw std::invalid_argument("sample_gmm: negative count");
    const Index d = gmm.dim();
    MatrixXd out(count, d);
    if (count == 0) return out;
    std::vector<MatrixXd> factors;
    for (const auto& cov : gmm.covariances) {
        Eigen::LLT<MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) throw std::runtime_error("sample_gmm: covariance is not positive definite");
        factors.push_back(llt.matrixL());
    }
    Rng rng(seed);
    VectorXd z(d);
    for (Index i = 0; i < count; ++i) {
        const double u = rng.uniform();
        int k = 0;
        double acc = gmm.weights[0];
        while (u >= acc && k + 1 < gmm.components()) acc += gmm.weights[++k];
        for (Index j = 0; j < d; ++j) z[j] = rng.normal();
        out.row(i) = gmm.means.row(k) + (factors[k] * z).transpose();
    }
    return out;
}

double gmm_log_likelihood(const Gmm& gmm, const MatrixXd& points) {
    if (points.cols() != gmm.dim()) throw ShapeError("gmm_log_likelihood: dimension mismatch");
    return log_sum_exp_rows(joint_log(gmm, points)).mean();
}

}  // namespace cgl
