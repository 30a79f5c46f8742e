#include "cgl/graph.hpp"

#include "cgl/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>

namespace cgl {

Graph::Graph(Index n, std::vector<Edge> edges) : n_(n) {
    if (n < 0) throw std::invalid_argument("negative node count");
    for (auto& [u, v] : edges) {
        if (u < 0 || v < 0 || u >= n || v >= n) {
            throw BoundsError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                              ") out of range for n = " + std::to_string(n));
        }
        if (u > v) std::swap(u, v);
    }
    std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);

    std::vector<Index> deg(static_cast<std::size_t>(n), 0);
    for (const auto& [u, v] : edges_) {
        ++deg[u];
        ++deg[v];
    }
    offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (Index i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
    adj_.resize(static_cast<std::size_t>(offsets_[n]));
    std::vector<Index> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [u, v] : edges_) {
        adj_[cursor[u]++] = v;
        adj_[cursor[v]++] = u;
    }
    for (Index i = 0; i < n; ++i) std::sort(adj_.begin() + offsets_[i], adj_.begin() + offsets_[i + 1]);
}

VectorXd Graph::degrees() const {
    VectorXd d(n_);
    for (Index i = 0; i < n_; ++i) d[i] = static_cast<double>(degree(i));
    return d;
}

bool Graph::has_edge(Index i, Index j) const {
    const auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
}

MatrixXd Graph::dense_adjacency() const {
    MatrixXd a = MatrixXd::Zero(n_, n_);
    for (const auto& [u, v] : edges_) {
        a(u, v) = 1.0;
        a(v, u) = 1.0;
    }
    return a;
}

SparseMatrix Graph::sparse_adjacency() const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(edges_.size() * 2);
    for (const auto& [u, v] : edges_) {
        trips.emplace_back(u, v, 1.0);
        trips.emplace_back(v, u, 1.0);
    }
    SparseMatrix a(n_, n_);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

Graph Graph::with_features(MatrixXd x) const {
    if (x.rows() != n_) throw ShapeError("feature rows " + std::to_string(x.rows()) + " != n " + std::to_string(n_));
    Graph g = *this;
    g.features_ = std::move(x);
    return g;
}

Graph Graph::with_labels(Labels y) const {
    if (static_cast<Index>(y.size()) != n_) throw ShapeError("label count != n");
    for (int c : y) {
        if (c < 0) throw std::invalid_argument("labels must be non-negative");
    }
    Graph g = *this;
    g.labels_ = std::move(y);
    return g;
}

Graph Graph::without_attributes() const {
    Graph g = *this;
    g.features_.reset();
    g.labels_.reset();
    return g;
}

bool operator==(const Graph& a, const Graph& b) {
    if (a.n_ != b.n_ || a.edges_ != b.edges_ || a.labels_ != b.labels_) return false;
    if (a.features_.has_value() != b.features_.has_value()) return false;
    if (!a.features_) return true;
    return a.features_->rows() == b.features_->rows() && a.features_->cols() == b.features_->cols() &&
           *a.features_ == *b.features_;
}

Partition Partition::from_labels(const std::vector<int>& labels) {
    Partition p;
    p.assignment = labels;
    for (int c : labels) {
        if (c < 0) throw std::invalid_argument("negative cluster id");
        p.num_clusters = std::max(p.num_clusters, c + 1);
    }
    return p;
}

// ---------------------------------------------------------------------------
// IO

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

std::vector<std::vector<std::string>> read_csv_cells(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

std::string format_double(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

}  // namespace

Graph load_edge_list(const std::filesystem::path& path, std::optional<Index> n_hint) {
    auto in = open_input(path);
    std::vector<Edge> edges;
    Index max_index = -1;
    std::optional<Index> header_n;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            const std::string comment = trim(line.substr(hash + 1));
            if (comment.rfind("nodes:", 0) == 0) {
                std::istringstream cs(comment.substr(6));
                Index n = -1;
                if (cs >> n && n >= 0) header_n = n;
            }
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        std::istringstream ls(line);
        long long u = -1, v = -1;
        std::string rest;
        if (!(ls >> u >> v) || u < 0 || v < 0 || (ls >> rest)) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected \"u v\" with non-negative integers",
                             lineno);
        }
        if (n_hint && (u >= *n_hint || v >= *n_hint)) {
            throw BoundsError(path.string() + ":" + std::to_string(lineno) + ": endpoint exceeds node count " +
                              std::to_string(*n_hint));
        }
        max_index = std::max<Index>(max_index, std::max<Index>(u, v));
        edges.emplace_back(u, v);
    }
    Index n = max_index + 1;
    const auto hint = n_hint ? n_hint : header_n;
    if (hint) {
        if (*hint < n) throw BoundsError(path.string() + ": endpoint exceeds declared node count");
        n = *hint;
    }
    return Graph(n, std::move(edges));
}

MatrixXd load_features(const std::filesystem::path& path, Index n) {
    const auto rows = read_csv_cells(path);
    if (static_cast<Index>(rows.size()) != n) {
        throw ShapeError(path.string() + ": expected " + std::to_string(n) + " rows, found " + std::to_string(rows.size()));
    }
    const Index cols = n == 0 ? 0 : static_cast<Index>(rows[0].size());
    MatrixXd x(n, cols);
    for (Index i = 0; i < n; ++i) {
        if (static_cast<Index>(rows[i].size()) != cols) {
            throw ShapeError(path.string() + ": row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                             " columns, expected " + std::to_string(cols));
        }
        for (Index j = 0; j < cols; ++j) {
            double value = 0.0;
            if (!parse_double(rows[i][j], value)) {
                throw ParseError(path.string() + ": non-numeric cell at (" + std::to_string(i) + "," + std::to_string(j) +
                                     ")",
                                 i, j);
            }
            x(i, j) = value;
        }
    }
    return x;
}

Labels load_labels(const std::filesystem::path& path, Index n) {
    const auto rows = read_csv_cells(path);
    if (static_cast<Index>(rows.size()) != n) {
        throw ShapeError(path.string() + ": expected " + std::to_string(n) + " labels, found " + std::to_string(rows.size()));
    }
    Labels y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        double value = 0.0;
        if (rows[i].size() != 1 || !parse_double(rows[i][0], value) || value < 0 || value != std::floor(value)) {
            throw ParseError(path.string() + ": invalid label at row " + std::to_string(i), i, 0);
        }
        y[i] = static_cast<int>(value);
    }
    return y;
}

void write_graph(const Graph& g, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "edges.txt");
        if (!out) throw std::runtime_error("cannot write " + (dir / "edges.txt").string());
        out << "# nodes: " << g.num_nodes() << '\n';
        for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
    }
    if (g.features()) {
        std::ofstream out(dir / "features.csv");
        const auto& x = *g.features();
        for (Index i = 0; i < x.rows(); ++i) {
            for (Index j = 0; j < x.cols(); ++j) {
                if (j) out << ',';
                out << format_double(x(i, j));
            }
            out << '\n';
        }
    }
    if (g.labels()) {
        std::ofstream out(dir / "labels.csv");
        for (int c : *g.labels()) out << c << '\n';
    }
}

Graph read_graph(const std::filesystem::path& dir) {
    Graph g = load_edge_list(dir / "edges.txt");
    if (std::filesystem::exists(dir / "features.csv")) g = g.with_features(load_features(dir / "features.csv", g.num_nodes()));
    if (std::filesystem::exists(dir / "labels.csv")) g = g.with_labels(load_labels(dir / "labels.csv", g.num_nodes()));
    return g;
}

// ---------------------------------------------------------------------------
// Statistics

GraphStats graph_stats(const Graph& g) {
    const Index n = g.num_nodes();
    if (n < 2) throw std::domain_error("edge density undefined for n < 2");
    GraphStats s;
    const double m = static_cast<double>(g.num_edges());
    s.edge_density = 2.0 * m / (static_cast<double>(n) * static_cast<double>(n - 1));
    s.degrees = g.degrees();
    s.min_degree = static_cast<Index>(s.degrees.minCoeff());
    s.max_degree = static_cast<Index>(s.degrees.maxCoeff());
    if (g.labels() && g.num_edges() > 0) {
        const auto& y = *g.labels();
        Index same = 0;
        for (const auto& [u, v] : g.edges()) same += (y[u] == y[v]) ? 1 : 0;
        s.homophily = static_cast<double>(same) / m;
    }
    return s;
}

std::vector<int> connected_components(const Graph& g, int* count) {
    const Index n = g.num_nodes();
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int next = 0;
    std::vector<Index> stack;
    for (Index s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        comp[s] = next;
        stack.push_back(s);
        while (!stack.empty()) {
            const Index u = stack.back();
            stack.pop_back();
            for (Index v : g.neighbors(u)) {
                if (comp[v] < 0) {
                    comp[v] = next;
                    stack.push_back(v);
                }
            }
        }
        ++next;
    }
    if (count) *count = next;
    return comp;
}

Index diameter(const Graph& g) {
    const Index n = g.num_nodes();
    Index best = 0;
    std::vector<Index> dist;
    for (Index s = 0; s < n; ++s) {
        dist.assign(static_cast<std::size_t>(n), -1);
        dist[s] = 0;
        std::queue<Index> q;
        q.push(s);
        while (!q.empty()) {
            const Index u = q.front();
            q.pop();
            for (Index v : g.neighbors(u)) {
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    q.push(v);
                }
            }
        }
        for (Index d : dist) {
            if (d < 0) throw std::domain_error("diameter of a disconnected graph");
            best = std::max(best, d);
        }
    }
    return best;
}

Graph induced_subgraph(const Graph& g, const std::vector<bool>& keep) {
    const Index n = g.num_nodes();
    if (static_cast<Index>(keep.size()) != n) throw ShapeError("keep mask size != n");
    std::vector<Index> new_id(static_cast<std::size_t>(n), -1);
    Index m = 0;
    for (Index i = 0; i < n; ++i) {
        if (keep[i]) new_id[i] = m++;
    }
    std::vector<Edge> edges;
    for (const auto& [u, v] : g.edges()) {
        if (keep[u] && keep[v]) edges.emplace_back(new_id[u], new_id[v]);
    }
    Graph out(m, std::move(edges));
    if (g.features()) {
        MatrixXd x(m, g.features()->cols());
        for (Index i = 0; i < n; ++i) {
            if (keep[i]) x.row(new_id[i]) = g.features()->row(i);
        }
        out = out.with_features(std::move(x));
    }
    if (g.labels()) {
        Labels y;
        for (Index i = 0; i < n; ++i) {
            if (keep[i]) y.push_back((*g.labels())[i]);
        }
        out = out.with_labels(std::move(y));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distances

namespace {

double feature_term(const Graph& g1, const Graph& g2) {
    if (!g1.features() || !g2.features()) return 0.0;
    const auto& x1 = *g1.features();
    const auto& x2 = *g2.features();
    if (x1.cols() != x2.cols()) throw ShapeError("feature dimension mismatch");
    return (x1 - x2).norm();
}

}  // namespace

double graph_distance(const Graph& g1, const Graph& g2, double alpha, double beta, NormKind norm) {
    if (g1.num_nodes() != g2.num_nodes()) throw ShapeError("graph_distance: node count mismatch");
    double structural = 0.0;
    switch (norm) {
        case NormKind::hamming: {
            std::vector<Edge> diff;
            std::set_symmetric_difference(g1.edges().begin(), g1.edges().end(), g2.edges().begin(), g2.edges().end(),
                                          std::back_inserter(diff));
            structural = static_cast<double>(diff.size());
            break;
        }
        case NormKind::frobenius:
            structural = (g1.dense_adjacency() - g2.dense_adjacency()).norm();
            break;
        case NormKind::spectral: {
            const MatrixXd d = g1.dense_adjacency() - g2.dense_adjacency();
            if (d.size() > 0) {
                Eigen::SelfAdjointEigenSolver<MatrixXd> es(d, Eigen::EigenvaluesOnly);
                structural = es.eigenvalues().cwiseAbs().maxCoeff();
            }
            break;
        }
    }
    return alpha * structural + (beta == 0.0 ? 0.0 : beta * feature_term(g1, g2));
}

double permutation_distance(const Graph& g1, const Graph& g2, double alpha, double beta) {
    const Index n = g1.num_nodes();
    if (n != g2.num_nodes()) throw ShapeError("permutation_distance: node count mismatch");
    if (n > 8) throw ScaleError("permutation_distance is an exhaustive oracle limited to n <= 8");
    const MatrixXd a1 = g1.dense_adjacency();
    const MatrixXd a2 = g2.dense_adjacency();
    const bool with_features = beta != 0.0 && g1.features() && g2.features();
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        // (P A2 P^T)(i, j) = A2(perm[i], perm[j]); (P X2)(i) = X2(perm[i]).
        double s = 0.0;
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                const double d = a1(i, j) - a2(perm[i], perm[j]);
                s += d * d;
            }
        }
        double total = alpha * std::sqrt(s);
        if (with_features) {
            double f = 0.0;
            for (Index i = 0; i < n; ++i) f += (g1.features()->row(i) - g2.features()->row(perm[i])).squaredNorm();
            total += beta * std::sqrt(f);
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace cgl
