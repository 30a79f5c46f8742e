#include "cgl/gratin.hpp"

#include "cgl/error.hpp"
#include "cgl/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cgl {

namespace {

Index block_size(const Linear& head) { return head.in_dim() + (head.use_bias ? 1 : 0); }

MatrixXd augmented_inputs(const Linear& head, const MatrixXd& e) {
    if (e.cols() != head.in_dim()) throw ShapeError("head: embedding width must equal head input dimension");
    if (!head.use_bias) return e;
    MatrixXd out(e.rows(), e.cols() + 1);
    out << e, VectorXd::Ones(e.rows());
    return out;
}

MatrixXd head_probabilities(const Linear& head, const MatrixXd& e) {
    MatrixXd logits = e * head.weight;
    if (head.use_bias) logits.rowwise() += head.bias;
    return softmax_rows(logits);
}

void check_labels(const HeadData& data, Index classes) {
    if (static_cast<Index>(data.labels.size()) != data.size()) throw ShapeError("head data: one label per row");
    for (int y : data.labels) {
        if (y < 0 || y >= classes) throw std::out_of_range("head data: label out of range");
    }
}

}  // namespace

HeadData concat(const HeadData& a, const HeadData& b) {
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    if (a.embeddings.cols() != b.embeddings.cols()) throw ShapeError("concat: embedding widths differ");
    HeadData out;
    out.embeddings.resize(a.size() + b.size(), a.embeddings.cols());
    out.embeddings << a.embeddings, b.embeddings;
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

VectorXd pack_head(const Linear& head) {
    const Index q = block_size(head);
    VectorXd theta(q * head.out_dim());
    for (Index c = 0; c < head.out_dim(); ++c) {
        theta.segment(c * q, head.in_dim()) = head.weight.col(c);
        if (head.use_bias) theta[c * q + head.in_dim()] = head.bias[c];
    }
    return theta;
}

void unpack_head(const VectorXd& theta, Linear& head) {
    const Index q = block_size(head);
    if (theta.size() != q * head.out_dim()) throw ShapeError("unpack_head: parameter count mismatch");
    for (Index c = 0; c < head.out_dim(); ++c) {
        head.weight.col(c) = theta.segment(c * q, head.in_dim());
        if (head.use_bias) head.bias[c] = theta[c * q + head.in_dim()];
    }
}

double head_objective(const Linear& head, const HeadData& data, const VectorXd& row_weights, double l2,
                      VectorXd* grad, MatrixXd* hessian) {
    const Index classes = head.out_dim();
    check_labels(data, classes);
    if (row_weights.size() != data.size()) throw ShapeError("head_objective: one weight per row");
    const Index q = block_size(head);
    const VectorXd theta = pack_head(head);
    double loss = 0.5 * l2 * theta.squaredNorm();
    if (grad) *grad = l2 * theta;
    if (hessian) *hessian = l2 * MatrixXd::Identity(theta.size(), theta.size());
    if (data.size() == 0) return loss;

    const MatrixXd xt = augmented_inputs(head, data.embeddings);
    const MatrixXd p = head_probabilities(head, data.embeddings);
    for (Index i = 0; i < data.size(); ++i) loss -= row_weights[i] * std::log(p(i, data.labels[i]));
    if (grad) {
        MatrixXd residual = p;
        for (Index i = 0; i < data.size(); ++i) residual(i, data.labels[i]) -= 1.0;
        residual = row_weights.asDiagonal() * residual;
        for (Index c = 0; c < classes; ++c) grad->segment(c * q, q) += xt.transpose() * residual.col(c);
    }
    if (hessian) {
        for (Index c = 0; c < classes; ++c) {
            for (Index k = c; k < classes; ++k) {
                VectorXd w = -p.col(c).cwiseProduct(p.col(k));
                if (c == k) w += p.col(c);
                w = w.cwiseProduct(row_weights);
                const MatrixXd block = xt.transpose() * w.asDiagonal() * xt;
                hessian->block(c * q, k * q, q, q) += block;
                if (k != c) hessian->block(k * q, c * q, q, q) += block.transpose();
            }
        }
    }
    return loss;
}

double head_objective(const Linear& head, const HeadData& data, double l2, VectorXd* grad, MatrixXd* hessian) {
    const Index m = data.size();
    const VectorXd w = VectorXd::Constant(m, m ? 1.0 / static_cast<double>(m) : 0.0);
    return head_objective(head, data, w, l2, grad, hessian);
}

MatrixXd head_row_gradients(const Linear& head, const HeadData& data) {
    check_labels(data, head.out_dim());
    const Index q = block_size(head);
    const MatrixXd xt = augmented_inputs(head, data.embeddings);
    const MatrixXd p = head_probabilities(head, data.embeddings);
    MatrixXd out(q * head.out_dim(), data.size());
    for (Index i = 0; i < data.size(); ++i) {
        for (Index c = 0; c < head.out_dim(); ++c) {
            const double r = p(i, c) - (data.labels[i] == c ? 1.0 : 0.0);
            out.col(i).segment(c * q, q) = r * xt.row(i).transpose();
        }
    }
    return out;
}

void fit_head_newton(Linear& head, const HeadData& data, const VectorXd& row_weights, double l2, double tol,
                     int max_iter) {
    if (!(l2 > 0.0)) throw std::invalid_argument("fit_head_newton: l2 must be positive");
    VectorXd g;
    MatrixXd h;
    double f = head_objective(head, data, row_weights, l2, &g, &h);
    for (int it = 0; it < max_iter; ++it) {
        if (g.norm() <= tol) return;
        Eigen::LLT<MatrixXd> llt(h);
        if (llt.info() != Eigen::Success) throw std::runtime_error("fit_head_newton: Hessian is not positive definite");
        const VectorXd step = llt.solve(g);
        const VectorXd theta = pack_head(head);
        double t = 1.0;
        Linear trial = head;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            unpack_head(theta - t * step, trial);
            const double slack = 8 * std::numeric_limits<double>::epsilon() * std::abs(f);
            if (head_objective(trial, data, row_weights, l2) <= f - 1e-4 * t * g.dot(step) + slack) break;
        }
        head = trial;
        f = head_objective(head, data, row_weights, l2, &g, &h);
    }
    if (g.norm() > tol) throw ConvergenceError("fit_head_newton: gradient norm above tolerance", g.norm());
}

std::vector<double> train_head(Linear& head, const HeadData& data, int epochs, double lr, double l2) {
    if (epochs < 0) throw std::invalid_argument("train_head: epochs must be non-negative");
    std::vector<double> losses;
    VectorXd theta = pack_head(head);
    AdamState state;
    VectorXd g;
    for (int e = 0; e < epochs; ++e) {
        losses.push_back(head_objective(head, data, l2, &g));
        adam_step(theta, g, state, lr);
        unpack_head(theta, head);
    }
    return losses;
}

GratinResult gratin_train(Model model, const GraphDataset& data, const GratinConfig& cfg) {
    if (model.orthonormal) throw std::invalid_argument("gratin_train: head finetuning needs an unconstrained head");
    if (model.readout == Readout::none) throw std::invalid_argument("gratin_train: model has no readout");
    if (cfg.components_per_class < 1) throw std::invalid_argument("gratin_train: components_per_class must be >= 1");
    if (cfg.augment_per_class < 0) throw std::invalid_argument("gratin_train: augment_per_class must be >= 0");
    GratinResult out;
    if (cfg.pretrain) out.pretrain = train(model, data, cfg.train);

    HeadData original;
    original.embeddings = graph_embeddings(model, data, data.train);
    for (Index i : data.train) original.labels.push_back(data.graphs[i].label);

    const Rng root(cfg.seed);
    const int classes = model.num_classes();
    out.components_used.assign(static_cast<std::size_t>(classes), 0);
    for (int c = 0; c < classes; ++c) {
        std::vector<Index> rows;
        for (Index i = 0; i < original.size(); ++i) {
            if (original.labels[i] == c) rows.push_back(i);
        }
        if (rows.empty()) {
            out.warnings.push_back("class " + std::to_string(c) + " has no training graphs; not augmented");
            continue;
        }
        int k = cfg.components_per_class;
        if (static_cast<Index>(rows.size()) < k) {
            k = static_cast<int>(rows.size());
            out.warnings.push_back("class " + std::to_string(c) + ": components reduced to " + std::to_string(k));
        }
        out.components_used[c] = k;
        if (cfg.augment_per_class == 0) continue;
        MatrixXd points(static_cast<Index>(rows.size()), original.embeddings.cols());
        for (std::size_t j = 0; j < rows.size(); ++j) points.row(static_cast<Index>(j)) = original.embeddings.row(rows[j]);
        const Rng stream = root.split(static_cast<std::uint64_t>(c));
        const GmmFit fit = fit_gmm(points, k, stream.split(0).next(), cfg.gmm);
        HeadData sampled;
        sampled.embeddings = sample_gmm(fit.gmm, cfg.augment_per_class, stream.split(1).next());
        sampled.labels.assign(static_cast<std::size_t>(cfg.augment_per_class), c);
        out.augmented = concat(out.augmented, sampled);
    }

    out.finetune_loss = train_head(model.head, concat(original, out.augmented), cfg.finetune_epochs, cfg.finetune_lr,
                                   cfg.head_l2);
    out.model = std::move(model);
    return out;
}

double influence(const VectorXd& grad_test, const MatrixXd& hessian, const VectorXd& grad_aug, double damping) {
    if (hessian.rows() != hessian.cols() || hessian.rows() != grad_test.size() || grad_aug.size() != grad_test.size()) {
        throw ShapeError("influence: dimension mismatch");
    }
    const MatrixXd h = hessian + damping * MatrixXd::Identity(hessian.rows(), hessian.cols());
    Eigen::LLT<MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) throw std::domain_error("influence: damped Hessian is not positive definite");
    return -grad_test.dot(llt.solve(grad_aug));
}

InfluenceReport influence_scores(const Linear& head, const HeadData& train, const HeadData& augmented,
                                 const HeadData& eval, double l2, double damping) {
    if (eval.size() == 0) throw std::invalid_argument("influence_scores: empty evaluation set");
    MatrixXd h;
    head_objective(head, train, l2, nullptr, &h);
    h += damping * MatrixXd::Identity(h.rows(), h.cols());
    Eigen::LLT<MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) throw std::domain_error("influence_scores: damped Hessian is not positive definite");
    const VectorXd test_grad = head_row_gradients(head, eval).rowwise().mean();
    const MatrixXd solved = llt.solve(head_row_gradients(head, augmented));
    InfluenceReport r;
    r.derivative = -(test_grad.transpose() * solved).transpose();
    r.score = -r.derivative;
    r.damping = damping;
    return r;
}

std::vector<Index> fisher_keep(const VectorXd& scores, double keep_frac) {
    if (!(keep_frac >= 0.0 && keep_frac <= 1.0)) throw std::invalid_argument("fisher_filter: keep_frac must lie in [0, 1]");
    const Index m = scores.size();
    const Index keep = std::min<Index>(m, static_cast<Index>(std::ceil(keep_frac * static_cast<double>(m) - 1e-9)));
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
    order.resize(static_cast<std::size_t>(std::max<Index>(keep, 0)));
    std::sort(order.begin(), order.end());
    return order;
}

HeadData fisher_filter(const HeadData& store, const VectorXd& scores, double keep_frac) {
    if (scores.size() != store.size()) throw ShapeError("fisher_filter: one score per row");
    const std::vector<Index> keep = fisher_keep(scores, keep_frac);
    HeadData out;
    out.embeddings.resize(static_cast<Index>(keep.size()), store.embeddings.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.embeddings.row(static_cast<Index>(k)) = store.embeddings.row(keep[k]);
        out.labels.push_back(store.labels[keep[k]]);
    }
    return out;
}

AugmentKind parse_augment_kind(const std::string& name) {
    if (name == "drop_edge") return AugmentKind::drop_edge;
    if (name == "drop_node") return AugmentKind::drop_node;
    if (name == "feature_noise") return AugmentKind::feature_noise;
    throw std::invalid_argument("unknown augmentation: " + name);
}

Graph baseline_augment(const Graph& g, AugmentKind kind, double rate, std::uint64_t seed) {
    Rng rng(seed);
    switch (kind) {
        case AugmentKind::drop_edge: {
            if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("baseline_augment: rate must lie in [0, 1]");
            if (rate == 0.0) return g;
            std::vector<Edge> kept;
            for (const Edge& e : g.edges()) {
                if (!rng.bernoulli(rate)) kept.push_back(e);
            }
            Graph out(g.num_nodes(), std::move(kept));
            if (g.features()) out = out.with_features(*g.features());
            if (g.labels()) out = out.with_labels(*g.labels());
            return out;
        }
        case AugmentKind::drop_node: {
            if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("baseline_augment: rate must lie in [0, 1]");
            if (rate == 0.0) return g;
            std::vector<bool> keep(static_cast<std::size_t>(g.num_nodes()));
            bool any = false;
            for (Index i = 0; i < g.num_nodes(); ++i) {
                keep[i] = !rng.bernoulli(rate);
                any = any || keep[i];
            }
            if (!any) throw std::runtime_error("baseline_augment: drop_node removed every node");
            return induced_subgraph(g, keep);
        }
        case AugmentKind::feature_noise: {
            if (!(rate >= 0.0)) throw std::invalid_argument("baseline_augment: noise scale must be non-negative");
            if (!g.features()) throw std::invalid_argument("baseline_augment: feature_noise needs features");
            if (rate == 0.0) return g;
            MatrixXd x = *g.features();
            for (Index j = 0; j < x.cols(); ++j) {
                for (Index i = 0; i < x.rows(); ++i) x(i, j) += rate * rng.normal();
            }
            return g.with_features(std::move(x));
        }
    }
    throw std::invalid_argument("baseline_augment: unknown kind");
}

GraphSample baseline_augment(const GraphSample& s, AugmentKind kind, double rate, std::uint64_t seed) {
    const Graph aug = baseline_augment(s.graph.with_features(s.features), kind, rate, seed);
    GraphSample out{aug.without_attributes(), *aug.features(), s.label};
    if (s.graph.labels() && kind != AugmentKind::drop_node) out.graph = out.graph.with_labels(*s.graph.labels());
    return out;
}

double expected_embedding_shift(const MatrixXd& original, const MatrixXd& augmented) {
    if (original.rows() == 0 || augmented.rows() == 0) throw std::invalid_argument("expected_embedding_shift: empty set");
    if (original.cols() != augmented.cols()) throw ShapeError("expected_embedding_shift: widths differ");
    double total = 0.0;
    for (Index i = 0; i < original.rows(); ++i) {
        for (Index j = 0; j < augmented.rows(); ++j) total += (original.row(i) - augmented.row(j)).norm();
    }
    return total / (static_cast<double>(original.rows()) * static_cast<double>(augmented.rows()));
}

void write_augmented_csv(const std::string& path, const HeadData& store) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    const Index d = store.embeddings.cols();
    for (Index j = 0; j < d; ++j) os << 'e' << j << ',';
    os << "label\n";
    char buf[32];
    for (Index i = 0; i < store.size(); ++i) {
        for (Index j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", store.embeddings(i, j));
            os << buf << ',';
        }
        os << store.labels[i] << '\n';
    }
}

HeadData read_augmented_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(is, line);
    const Index d = static_cast<Index>(std::count(line.begin(), line.end(), ','));
    std::vector<std::vector<double>> rows;
    HeadData out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("bad number '" + cell + "'", lineno, row.size() + 1);
            }
        }
        if (static_cast<Index>(row.size()) != d + 1) throw ParseError("wrong column count", lineno, row.size());
        out.labels.push_back(static_cast<int>(row.back()));
        row.pop_back();
        rows.push_back(std::move(row));
    }
    out.embeddings.resize(static_cast<Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Index j = 0; j < d; ++j) out.embeddings(static_cast<Index>(i), j) = rows[i][j];
    }
    return out;
}

}  // namespace cgl
