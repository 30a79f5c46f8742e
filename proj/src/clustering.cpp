#include "cgl/clustering.hpp"

#include "cgl/error.hpp"
#include "cgl/gso.hpp"
#include "cgl/rng.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace cgl {

namespace {

struct Run {
    std::vector<int> assignment;
    MatrixXd centroids;
    double inertia = 0.0;
    std::vector<double> history;
};

MatrixXd plus_plus_seeds(const MatrixXd& x, int k, Rng& rng) {
    const Index n = x.rows();
    MatrixXd c(k, x.cols());
    c.row(0) = x.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
    VectorXd d2 = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
    for (int j = 1; j < k; ++j) {
        const double total = d2.sum();
        Index pick = n - 1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (Index i = 0; i < n; ++i) {
                target -= d2[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        c.row(j) = x.row(pick);
        d2 = d2.cwiseMin((x.rowwise() - c.row(j)).rowwise().squaredNorm());
    }
    return c;
}

double assign(const MatrixXd& x, const MatrixXd& c, std::vector<int>& out, VectorXd& cost) {
    double inertia = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        Index best = 0;
        const double d = (c.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
        out[i] = static_cast<int>(best);
        cost[i] = d;
        inertia += d;
    }
    return inertia;
}

Run lloyd(const MatrixXd& x, int k, Rng& rng, const KMeansOptions& opt) {
    const Index n = x.rows();
    Run run;
    run.centroids = plus_plus_seeds(x, k, rng);
    run.assignment.assign(static_cast<std::size_t>(n), 0);
    VectorXd cost(n);
    run.inertia = assign(x, run.centroids, run.assignment, cost);
    for (int it = 0; it < opt.max_iter; ++it) {
        MatrixXd next = MatrixXd::Zero(k, x.cols());
        std::vector<Index> count(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            next.row(run.assignment[i]) += x.row(i);
            ++count[run.assignment[i]];
        }
        for (int j = 0; j < k; ++j) {
            if (count[j] > 0) {
                next.row(j) /= static_cast<double>(count[j]);
                continue;
            }
            Index far = 0;
            cost.maxCoeff(&far);
            next.row(j) = x.row(far);
            cost[far] = 0.0;
        }
        const double shift = (next - run.centroids).squaredNorm();
        run.centroids = std::move(next);
        run.inertia = assign(x, run.centroids, run.assignment, cost);
        run.history.push_back(run.inertia);
        if (shift <= opt.tol * opt.tol) break;
    }
    return run;
}

// Contingency table plus row and column sums.
struct Table {
    std::vector<std::vector<double>> counts;
    std::vector<double> a, b;
    double n = 0.0;
};

Table contingency(const Partition& p1, const Partition& p2) {
    if (p1.size() != p2.size()) throw ShapeError("partition lengths differ");
    std::map<int, int> r1, r2;
    for (int x : p1.assignment) r1.emplace(x, 0);
    for (int x : p2.assignment) r2.emplace(x, 0);
    int idx = 0;
    for (auto& [_, v] : r1) v = idx++;
    idx = 0;
    for (auto& [_, v] : r2) v = idx++;
    Table t;
    t.counts.assign(r1.size(), std::vector<double>(r2.size(), 0.0));
    t.a.assign(r1.size(), 0.0);
    t.b.assign(r2.size(), 0.0);
    for (Index i = 0; i < p1.size(); ++i) {
        const int u = r1[p1.assignment[i]];
        const int v = r2[p2.assignment[i]];
        t.counts[u][v] += 1.0;
        t.a[u] += 1.0;
        t.b[v] += 1.0;
    }
    t.n = static_cast<double>(p1.size());
    return t;
}

double entropy_of(const std::vector<double>& sizes, double n) {
    double h = 0.0;
    for (double s : sizes) {
        if (s > 0.0) h -= s / n * std::log(s / n);
    }
    return h;
}

double mi_of(const Table& t) {
    double mi = 0.0;
    for (std::size_t i = 0; i < t.a.size(); ++i) {
        for (std::size_t j = 0; j < t.b.size(); ++j) {
            const double nij = t.counts[i][j];
            if (nij > 0.0) mi += nij / t.n * std::log(t.n * nij / (t.a[i] * t.b[j]));
        }
    }
    return mi;
}

// Expected mutual information under the hypergeometric model.
double expected_mi(const Table& t) {
    const double n = t.n;
    double emi = 0.0;
    for (double ai : t.a) {
        for (double bj : t.b) {
            const double lo = std::max(1.0, ai + bj - n);
            const double hi = std::min(ai, bj);
            for (double nij = lo; nij <= hi; nij += 1.0) {
                const double log_p = std::lgamma(ai + 1) + std::lgamma(bj + 1) + std::lgamma(n - ai + 1) +
                                     std::lgamma(n - bj + 1) - std::lgamma(n + 1) - std::lgamma(nij + 1) -
                                     std::lgamma(ai - nij + 1) - std::lgamma(bj - nij + 1) -
                                     std::lgamma(n - ai - bj + nij + 1);
                emi += nij / n * std::log(n * nij / (ai * bj)) * std::exp(log_p);
            }
        }
    }
    return emi;
}

double comb2(double x) { return 0.5 * x * (x - 1.0); }

}  // namespace

ClusterResult kmeans(const MatrixXd& points, int clusters, std::uint64_t seed, const KMeansOptions& options) {
    const Index n = points.rows();
    if (clusters < 1) throw std::invalid_argument("kmeans: need at least one cluster");
    if (clusters > n) throw std::invalid_argument("kmeans: more clusters than points");
    if (options.n_init < 1) throw std::invalid_argument("kmeans: n_init must be >= 1");
    if (!points.allFinite()) throw std::domain_error("kmeans: non-finite input");
    Rng rng(seed);
    Run best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < options.n_init; ++r) {
        Rng sub = rng.split(static_cast<std::uint64_t>(r));
        Run run = lloyd(points, clusters, sub, options);
        if (run.inertia < best.inertia) best = std::move(run);
    }
    ClusterResult out;
    out.partition.assignment = best.assignment;
    out.partition.num_clusters = clusters;
    out.centroids = best.centroids;
    out.inertia = best.inertia;
    out.seed = seed;
    out.inertia_history = best.history;
    std::vector<bool> used(static_cast<std::size_t>(clusters), false);
    for (int c : best.assignment) used[c] = true;
    for (bool u : used) out.empty_cluster = out.empty_cluster || !u;
    return out;
}

ClusterResult spectral_cluster(const Graph& g, const VectorXd& v, double e2, double e3, int clusters,
                               std::uint64_t seed, const SpectralOptions& options) {
    if (clusters < 1 || clusters > g.num_nodes()) throw std::invalid_argument("spectral_cluster: need 1 <= C <= n");
    const Spectrum s = spectrum_of_two_sided(g, v, e2, e3);
    MatrixXd u = s.eigenvectors.leftCols(clusters);
    if (options.normalize_rows) {
        for (Index i = 0; i < u.rows(); ++i) {
            const double norm = u.row(i).norm();
            if (norm > 0.0) u.row(i) /= norm;
        }
    }
    return kmeans(u, clusters, seed, options.kmeans);
}

double entropy(const Partition& p) {
    std::map<int, double> sizes;
    for (int x : p.assignment) sizes[x] += 1.0;
    std::vector<double> s;
    for (const auto& [_, c] : sizes) s.push_back(c);
    return entropy_of(s, static_cast<double>(p.size()));
}

double mutual_information(const Partition& p1, const Partition& p2) { return mi_of(contingency(p1, p2)); }

double ami(const Partition& p1, const Partition& p2) {
    const Table t = contingency(p1, p2);
    if (t.n == 0.0) throw std::invalid_argument("ami: empty partitions");
    // Both trivial in the same way: perfect agreement by convention.
    if ((t.a.size() == 1 && t.b.size() == 1) || (t.a.size() == t.n && t.b.size() == t.n)) return 1.0;
    const double mi = mi_of(t);
    const double emi = expected_mi(t);
    const double mean_h = 0.5 * (entropy_of(t.a, t.n) + entropy_of(t.b, t.n));
    double denom = mean_h - emi;
    const double tiny = std::numeric_limits<double>::epsilon();
    if (std::abs(denom) < tiny) denom = denom < 0.0 ? -tiny : tiny;
    return (mi - emi) / denom;
}

double ari(const Partition& p1, const Partition& p2) {
    const Table t = contingency(p1, p2);
    if (t.n == 0.0) throw std::invalid_argument("ari: empty partitions");
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& row : t.counts) {
        for (double x : row) index += comb2(x);
    }
    for (double x : t.a) sa += comb2(x);
    for (double x : t.b) sb += comb2(x);
    const double total = comb2(t.n);
    const double expected = total > 0.0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace cgl
