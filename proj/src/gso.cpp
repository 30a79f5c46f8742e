#include "cgl/gso.hpp"

#include "cgl/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cgl {

namespace {

constexpr double kZeroTol = 1e-9;
constexpr Index kMaxExhaustive = 20;

void require_positive(const VectorXd& v, Index n, const char* who) {
    if (v.size() != n) throw ShapeError(std::string(who) + ": centrality length must equal node count");
    for (Index i = 0; i < n; ++i) {
        if (!(v[i] > 0.0) || !std::isfinite(v[i])) {
            throw std::domain_error(std::string(who) + ": centrality must be strictly positive and finite");
        }
    }
}

VectorXd floored_degrees(const Graph& g, double clamp_eps) {
    VectorXd d = g.degrees();
    for (Index i = 0; i < d.size(); ++i) {
        if (d[i] > 0.0) continue;
        if (clamp_eps <= 0.0) throw std::domain_error("classical_gso: zero degree at node " + std::to_string(i));
        d[i] = clamp_eps;
    }
    return d;
}

void check_connected_small(const Graph& g, const char* who) {
    if (g.num_nodes() > kMaxExhaustive) throw ScaleError(std::string(who) + ": at most 20 nodes");
    if (g.num_nodes() == 0) throw std::domain_error(std::string(who) + ": empty graph");
    int count = 0;
    connected_components(g, &count);
    if (count != 1) throw std::domain_error(std::string(who) + ": graph must be connected");
    for (Index i = 0; i < g.num_nodes(); ++i) {
        if (g.degree(i) == 0) throw std::domain_error(std::string(who) + ": isolated node");
    }
}

}  // namespace

GsoKind parse_gso_kind(const std::string& name) {
    if (name == "A") return GsoKind::adjacency;
    if (name == "L") return GsoKind::laplacian;
    if (name == "Q") return GsoKind::signless_laplacian;
    if (name == "Lrw") return GsoKind::rw_laplacian;
    if (name == "Lsym") return GsoKind::sym_laplacian;
    if (name == "Ahat") return GsoKind::normalized_adjacency;
    if (name == "H") return GsoKind::mean_aggregation;
    throw std::invalid_argument("unknown shift operator: " + name);
}

MatrixXd classical_gso(const Graph& g, GsoKind kind, double clamp_eps) {
    const Index n = g.num_nodes();
    const MatrixXd a = g.dense_adjacency();
    const MatrixXd id = MatrixXd::Identity(n, n);
    switch (kind) {
        case GsoKind::adjacency: return a;
        case GsoKind::laplacian: return MatrixXd(g.degrees().asDiagonal()) - a;
        case GsoKind::signless_laplacian: return MatrixXd(g.degrees().asDiagonal()) + a;
        case GsoKind::rw_laplacian: {
            const VectorXd inv = floored_degrees(g, clamp_eps).cwiseInverse();
            return id - inv.asDiagonal() * a;
        }
        case GsoKind::sym_laplacian: {
            const VectorXd s = floored_degrees(g, clamp_eps).cwiseSqrt().cwiseInverse();
            return id - s.asDiagonal() * a * s.asDiagonal();
        }
        case GsoKind::normalized_adjacency: {
            const VectorXd s = (g.degrees().array() + 1.0).sqrt().inverse().matrix();
            return s.asDiagonal() * (a + id) * s.asDiagonal();
        }
        case GsoKind::mean_aggregation: {
            const VectorXd inv = floored_degrees(g, clamp_eps).cwiseInverse();
            return inv.asDiagonal() * a;
        }
    }
    throw std::invalid_argument("classical_gso: unknown kind");
}

bool CgsoParams::finite() const {
    for (double x : {m1, m2, m3, e1, e2, e3, a}) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

VectorXd diag_pow(const VectorXd& v, double e) {
    if (e == 0.0) return VectorXd::Ones(v.size());
    VectorXd out = (e * v.array().log()).exp().matrix();
    if (!out.allFinite()) throw std::domain_error("diag_pow: non-finite power");
    return out;
}

MatrixXd cgso(const Graph& g, const VectorXd& v, const CgsoParams& p) {
    const Index n = g.num_nodes();
    require_positive(v, n, "cgso");
    if (!p.finite()) throw std::invalid_argument("cgso: parameters must be finite");
    const VectorXd left = diag_pow(v, p.e2);
    const VectorXd right = diag_pow(v, p.e3);
    MatrixXd aa = g.dense_adjacency();
    aa.diagonal().array() += p.a;
    MatrixXd out = p.m2 * (left.asDiagonal() * aa * right.asDiagonal());
    out.diagonal() += p.m1 * diag_pow(v, p.e1);
    out.diagonal().array() += p.m3;
    return out;
}

Spectrum symmetric_spectrum(const MatrixXd& m) {
    if (m.rows() != m.cols()) throw ShapeError("symmetric_spectrum: matrix must be square");
    Spectrum s;
    if (m.rows() == 0) return s;
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) throw ConvergenceError("symmetric_spectrum: eigensolver failed", 0.0);
    s.eigenvalues = solver.eigenvalues().reverse();
    s.eigenvectors = solver.eigenvectors().rowwise().reverse();
    return s;
}

Spectrum spectrum_of_two_sided(const Graph& g, const VectorXd& v, double e2, double e3) {
    const Index n = g.num_nodes();
    require_positive(v, n, "spectrum_of_two_sided");
    if (!std::isfinite(e2) || !std::isfinite(e3)) throw std::domain_error("spectrum_of_two_sided: non-finite exponent");
    const VectorXd half = diag_pow(v, 0.5 * (e2 + e3));
    const MatrixXd sym = half.asDiagonal() * g.dense_adjacency() * half.asDiagonal();
    Spectrum s = symmetric_spectrum(sym);
    // sym = V^s M V^-s with s = (e3 - e2) / 2, so M's eigenvectors are V^-s u.
    const VectorXd back = diag_pow(v, -0.5 * (e3 - e2));
    s.eigenvectors = back.asDiagonal() * s.eigenvectors;
    for (Index k = 0; k < s.eigenvectors.cols(); ++k) s.eigenvectors.col(k).normalize();
    return s;
}

MarkovStats markov_spectrum_stats(const Graph& g, const VectorXd& v) {
    const Index n = g.num_nodes();
    require_positive(v, n, "markov_spectrum_stats");
    MarkovStats out;
    if (n == 0) return out;
    const double nn = static_cast<double>(n);
    const VectorXd inv = v.cwiseInverse();
    out.mu = inv.sum() / nn;
    // tr(M^2) / n: each ordered adjacent pair plus each self-loop.
    double second = inv.squaredNorm();
    for (const auto& [i, j] : g.edges()) second += 2.0 * inv[i] * inv[j];
    second /= nn;
    out.sigma = std::sqrt(std::max(0.0, second - out.mu * out.mu));

    const VectorXd s = inv.cwiseSqrt();
    MatrixXd aa = g.dense_adjacency();
    aa.diagonal().array() += 1.0;
    const VectorXd eig = symmetric_spectrum(s.asDiagonal() * aa * s.asDiagonal()).eigenvalues;
    out.mu_eig = eig.mean();
    out.sigma_eig = std::sqrt((eig.array() - out.mu_eig).square().mean());
    return out;
}

double dirichlet_energy(const Graph& g, const MatrixXd& h) {
    if (h.rows() != g.num_nodes()) throw ShapeError("dirichlet_energy: row count must equal node count");
    double total = 0.0;
    for (const auto& [i, j] : g.edges()) {
        const double si = 1.0 / std::sqrt(1.0 + static_cast<double>(g.degree(i)));
        const double sj = 1.0 / std::sqrt(1.0 + static_cast<double>(g.degree(j)));
        total += (si * h.row(i) - sj * h.row(j)).squaredNorm();
    }
    // Each unordered edge appears twice in the ordered sum, halved by the 1/2.
    return total;
}

double cheeger(const Graph& g, CheegerMode mode, const std::optional<VectorXd>& v) {
    const Index n = g.num_nodes();
    if (n > kMaxExhaustive) throw ScaleError("cheeger: at most 20 nodes");
    if (n <= 1) return std::numeric_limits<double>::infinity();
    VectorXd weight = VectorXd::Ones(n);
    if (mode == CheegerMode::centrality) {
        if (!v) throw std::invalid_argument("cheeger: centrality mode needs a centrality vector");
        require_positive(*v, n, "cheeger");
        weight = *v;
    }
    const double half_mass = 0.5 * weight.sum();
    std::vector<std::uint32_t> nbr_mask(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
        for (Index j : g.neighbors(i)) nbr_mask[i] |= 1u << j;
    }
    double best = std::numeric_limits<double>::infinity();
    const std::uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1u);
    for (std::uint32_t set = 1; set < full; ++set) {
        double mass = 0.0;
        std::uint32_t reach = 0;
        for (Index i = 0; i < n; ++i) {
            if (set >> i & 1u) {
                mass += weight[i];
                reach |= nbr_mask[i];
            }
        }
        if (mass > half_mass + 1e-12) continue;
        double boundary = 0.0;
        if (mode == CheegerMode::classical) {
            for (const auto& [i, j] : g.edges()) {
                if (((set >> i) ^ (set >> j)) & 1u) boundary += 1.0;
            }
        } else {
            boundary = static_cast<double>(__builtin_popcount(reach & ~set));
        }
        best = std::min(best, boundary / mass);
    }
    return best;
}

ExpansionReport expansion_bound_report(const Graph& g, const VectorXd& v) {
    check_connected_small(g, "expansion_bound_report");
    const Index n = g.num_nodes();
    require_positive(v, n, "expansion_bound_report");
    ExpansionReport r;
    const VectorXd deg = g.degrees();
    r.min_degree = deg.minCoeff();
    r.max_degree = deg.maxCoeff();
    r.v_min = v.minCoeff();
    r.v_max = v.maxCoeff();

    // D^-1 A is similar to D^-1/2 A D^-1/2; L_rw = I - D^-1 A.
    const VectorXd hv = symmetric_spectrum(classical_gso(g, GsoKind::sym_laplacian)).eigenvalues;
    r.lambda1_rw = std::numeric_limits<double>::infinity();
    r.equidistribution_radius = 0.0;
    for (Index k = 0; k < n; ++k) {
        const double lap = hv[k];
        if (std::abs(lap) > kZeroTol) r.lambda1_rw = std::min(r.lambda1_rw, lap);
        const double mean_agg = 1.0 - lap;
        if (std::abs(std::abs(mean_agg) - 1.0) > kZeroTol) {
            r.equidistribution_radius = std::max(r.equidistribution_radius, std::abs(mean_agg));
        }
    }

    r.cheeger_classical = cheeger(g, CheegerMode::classical);
    r.cheeger_centrality = cheeger(g, CheegerMode::centrality, v);

    // I - V^-1 A; eigenvalues from the symmetric form V^-1/2 A V^-1/2.
    const VectorXd mv = spectrum_of_two_sided(g, v, -0.5, -0.5).eigenvalues;
    r.lambda1_markov = std::numeric_limits<double>::infinity();
    r.markov_spectral_radius = 0.0;
    for (Index k = 0; k < n; ++k) {
        const double lap = 1.0 - mv[k];
        if (std::abs(lap) > kZeroTol) r.lambda1_markov = std::min(r.lambda1_markov, lap);
        r.markov_spectral_radius = std::max(r.markov_spectral_radius, std::abs(mv[k]));
    }

    r.cheeger_lower = 1.0 - r.equidistribution_radius;
    r.cheeger_upper = 2.0 * r.max_degree / (r.min_degree * r.min_degree) * r.cheeger_classical;
    r.buser_rhs = r.max_degree * std::sqrt(2.0 * r.lambda1_rw);
    r.markov_upper = 2.0 * static_cast<double>(n) * r.v_max * r.v_max / r.v_min * r.cheeger_centrality;
    r.gamma_min_ratio = (v.array() / deg.array()).minCoeff();
    r.gershgorin_radius = (deg.array() / v.array()).maxCoeff();

    constexpr double slack = 1e-10;
    r.cheeger_holds = r.cheeger_lower <= r.lambda1_rw + slack && r.lambda1_rw <= r.cheeger_upper + slack;
    r.buser_holds = r.cheeger_classical <= r.buser_rhs + slack;
    r.markov_holds = r.lambda1_markov <= r.markov_upper + slack;
    r.gershgorin_holds = r.markov_spectral_radius <= r.gershgorin_radius + slack;
    return r;
}

}  // namespace cgl
