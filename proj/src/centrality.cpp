#include "cgl/centrality.hpp"

#include "cgl/error.hpp"

#include <algorithm>
#include <stdexcept>

namespace cgl {

std::string to_string(CentralityKind kind) {
    switch (kind) {
        case CentralityKind::degree: return "degree";
        case CentralityKind::kcore: return "kcore";
        case CentralityKind::pagerank: return "pagerank";
        case CentralityKind::walk: return "walk";
    }
    return "unknown";
}

CentralityKind parse_centrality_kind(const std::string& name) {
    if (name == "degree") return CentralityKind::degree;
    if (name == "kcore" || name == "k-core" || name == "core") return CentralityKind::kcore;
    if (name == "pagerank") return CentralityKind::pagerank;
    if (name == "walk" || name == "walks") return CentralityKind::walk;
    throw std::invalid_argument("unknown centrality kind: " + name);
}

std::vector<int> kcore(const Graph& g) {
    const Index n = g.num_nodes();
    std::vector<int> deg(static_cast<std::size_t>(n));
    int max_deg = 0;
    for (Index i = 0; i < n; ++i) {
        deg[i] = static_cast<int>(g.degree(i));
        max_deg = std::max(max_deg, deg[i]);
    }
    // Nodes sorted by current degree, with bucket starts and positions.
    std::vector<Index> start(static_cast<std::size_t>(max_deg) + 2, 0);
    for (Index i = 0; i < n; ++i) ++start[deg[i] + 1];
    for (int d = 0; d <= max_deg; ++d) start[d + 1] += start[d];
    std::vector<Index> order(static_cast<std::size_t>(n)), pos(static_cast<std::size_t>(n));
    {
        std::vector<Index> fill(start.begin(), start.end() - 1);
        for (Index i = 0; i < n; ++i) {
            pos[i] = fill[deg[i]]++;
            order[pos[i]] = i;
        }
    }
    for (Index k = 0; k < n; ++k) {
        const Index u = order[k];
        for (Index w : g.neighbors(u)) {
            if (deg[w] > deg[u]) {
                const int dw = deg[w];
                const Index first = std::max(start[dw], k + 1);
                const Index other = order[first];
                std::swap(order[first], order[pos[w]]);
                pos[other] = pos[w];
                pos[w] = first;
                ++start[dw];
                --deg[w];
            }
        }
    }
    return deg;
}

VectorXd pagerank(const Graph& g, double alpha, double tol, int max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("pagerank: tol must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("pagerank: alpha must lie in [0, 1]");
    const Index n = g.num_nodes();
    if (n == 0) return VectorXd();
    const double nn = static_cast<double>(n);
    VectorXd pi = VectorXd::Constant(n, 1.0 / nn);
    VectorXd next(n);
    double residual = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        double dangling = 0.0;
        next.setZero();
        for (Index i = 0; i < n; ++i) {
            const Index d = g.degree(i);
            if (d == 0) {
                dangling += pi[i];
                continue;
            }
            const double share = pi[i] / static_cast<double>(d);
            for (Index j : g.neighbors(i)) next[j] += share;
        }
        next = (alpha * (next.array() + dangling / nn) + (1.0 - alpha) / nn).matrix();
        residual = (next - pi).lpNorm<1>();
        pi.swap(next);
        if (residual <= tol) return pi / pi.sum();
    }
    throw ConvergenceError("pagerank: no convergence within max_iter", residual);
}

VectorXd walk_count(const Graph& g, int length) {
    if (length < 1) throw std::invalid_argument("walk_count: length must be >= 1");
    const SparseMatrix a = g.sparse_adjacency();
    VectorXd counts = VectorXd::Ones(g.num_nodes());
    for (int t = 0; t < length; ++t) counts = a * counts;
    return counts;
}

CentralityVector centrality_matrix(const Graph& g, const CentralityOptions& options) {
    CentralityVector out;
    out.kind = options.kind;
    switch (options.kind) {
        case CentralityKind::degree:
            out.values = g.degrees();
            break;
        case CentralityKind::kcore: {
            const auto core = kcore(g);
            out.values.resize(g.num_nodes());
            for (Index i = 0; i < g.num_nodes(); ++i) out.values[i] = core[i];
            break;
        }
        case CentralityKind::pagerank: {
            const VectorXd pr = pagerank(g, options.pagerank_alpha, options.pagerank_tol, options.pagerank_max_iter);
            out.values = (1.0 - pr.array()).inverse().matrix();
            break;
        }
        case CentralityKind::walk:
            out.walk_length = options.walk_length;
            out.values = walk_count(g, options.walk_length);
            break;
    }
    if (!out.values.allFinite()) throw std::domain_error("centrality_matrix: non-finite centrality");
    for (Index i = 0; i < out.values.size(); ++i) {
        if (out.values[i] >= options.clamp_eps && out.values[i] > 0.0) continue;
        if (options.clamp_eps <= 0.0) {
            throw std::domain_error("centrality_matrix: zero centrality at node " + std::to_string(i) +
                                    " and clamping is disabled");
        }
        out.values[i] = options.clamp_eps;
        out.clamped = true;
        out.clamped_nodes.push_back(i);
    }
    return out;
}

CentralityVector centrality_matrix(const Graph& g, CentralityKind kind, double clamp_eps) {
    CentralityOptions options;
    options.kind = kind;
    options.clamp_eps = clamp_eps;
    return centrality_matrix(g, options);
}

}  // namespace cgl
