#pragma once

#include "cgl/graph.hpp"

#include <optional>
#include <string>

namespace cgl {

enum class GsoKind { adjacency, laplacian, signless_laplacian, rw_laplacian, sym_laplacian, normalized_adjacency, mean_aggregation };

GsoKind parse_gso_kind(const std::string& name);

/// Dense classical shift operator. Degree-normalized kinds reject zero
/// degrees unless clamp_eps > 0, in which case degrees are floored at it.
/// normalized_adjacency uses A + I with the degrees of A + I.
MatrixXd classical_gso(const Graph& g, GsoKind kind, double clamp_eps = 0.0);

/// Coefficients of m1 V^e1 + m2 V^e2 (A + a I) V^e3 + m3 I.
struct CgsoParams {
    double m1 = 0.0, m2 = 1.0, m3 = 0.0;
    double e1 = 0.0, e2 = 0.0, e3 = 0.0;
    double a = 0.0;

    static CgsoParams adjacency() { return {0, 1, 0, 0, 0, 0, 0}; }
    static CgsoParams laplacian() { return {1, -1, 0, 1, 0, 0, 0}; }
    static CgsoParams signless_laplacian() { return {1, 1, 0, 1, 0, 0, 0}; }
    static CgsoParams rw_laplacian() { return {0, -1, 1, 0, -1, 0, 0}; }
    static CgsoParams sym_laplacian() { return {0, -1, 1, 0, -0.5, -0.5, 0}; }
    static CgsoParams normalized_adjacency() { return {0, 1, 0, 0, -0.5, -0.5, 1}; }
    static CgsoParams mean_aggregation() { return {0, 1, 0, 0, -1, 0, 0}; }

    bool finite() const;
};

/// Entrywise v^e for strictly positive v.
VectorXd diag_pow(const VectorXd& v, double e);

MatrixXd cgso(const Graph& g, const VectorXd& v, const CgsoParams& p);

/// Eigenpairs with eigenvalues sorted in descending order.
struct Spectrum {
    VectorXd eigenvalues;
    MatrixXd eigenvectors;
};

/// Symmetric eigendecomposition, descending.
Spectrum symmetric_spectrum(const MatrixXd& m);

/// Spectrum of V^e2 A V^e3 through its symmetric similar form. Eigenvectors
/// are those of the original (nonsymmetric) operator, normalized to unit length.
Spectrum spectrum_of_two_sided(const Graph& g, const VectorXd& v, double e2, double e3);

struct MarkovStats {
    double mu = 0.0;
    double sigma = 0.0;
    double mu_eig = 0.0;
    double sigma_eig = 0.0;
};

/// Mean and standard deviation of the spectrum of V^-1 (A + I), in closed
/// form and from an eigensolve.
MarkovStats markov_spectrum_stats(const Graph& g, const VectorXd& v);

/// 1/2 sum_ij a_ij || h_i / sqrt(1 + d_i) - h_j / sqrt(1 + d_j) ||^2.
double dirichlet_energy(const Graph& g, const MatrixXd& h);

enum class CheegerMode { classical, centrality };

/// Exhaustive Cheeger constant for n <= 20. The classical mode counts
/// crossing edges over |W|; the centrality mode counts outside vertices
/// adjacent to U over the centrality mass of U.
double cheeger(const Graph& g, CheegerMode mode, const std::optional<VectorXd>& v = std::nullopt);

struct ExpansionReport {
    double lambda1_rw = 0.0;
    double equidistribution_radius = 0.0;
    double cheeger_classical = 0.0;
    double cheeger_centrality = 0.0;
    double min_degree = 0.0;
    double max_degree = 0.0;
    double v_min = 0.0;
    double v_max = 0.0;
    double lambda1_markov = 0.0;

    double cheeger_lower = 0.0;  // 1 - radius
    double cheeger_upper = 0.0;  // (2 max_deg / min_deg^2) h_C
    double buser_rhs = 0.0;      // max_deg sqrt(2 lambda1)
    double markov_upper = 0.0;   // 2 n v_max^2 / v_min h_v

    /// min_i v(i) / deg(i), reported but not asserted.
    double gamma_min_ratio = 0.0;
    /// max_i deg(i) / v(i), the Gershgorin radius of V^-1 A.
    double gershgorin_radius = 0.0;
    double markov_spectral_radius = 0.0;

    bool cheeger_holds = false;
    bool buser_holds = false;
    bool markov_holds = false;
    bool gershgorin_holds = false;
    bool all_hold() const { return cheeger_holds && buser_holds && markov_holds && gershgorin_holds; }
};

ExpansionReport expansion_bound_report(const Graph& g, const VectorXd& v);

}  // namespace cgl
