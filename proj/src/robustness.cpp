#include "cgl/robustness.hpp"

#include "cgl/error.hpp"
#include "cgl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cgl {

void RobustnessConfig::validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("robustness: eps must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("robustness: sigma must be positive");
    if (!(p > 0.0)) throw std::invalid_argument("robustness: p must be positive");
    if (samples < 1) throw std::invalid_argument("robustness: samples must be >= 1");
}

WalkSums normalized_walk_sums(const Graph& g, int layers) {
    if (layers < 1) throw std::invalid_argument("normalized_walk_sums: need at least one layer");
    const PreparedGraph pg(g);
    WalkSums out;
    out.per_node = VectorXd::Ones(g.num_nodes());
    for (int t = 1; t < layers; ++t) out.per_node = pg.normalized * out.per_node;
    out.max = out.per_node.size() ? out.per_node.maxCoeff() : 0.0;
    out.total = out.per_node.sum();
    return out;
}

BoundKind parse_bound_kind(const std::string& name) {
    if (name == "gcn_feat_d1") return BoundKind::gcn_feat_d1;
    if (name == "gcn_feat_dinf") return BoundKind::gcn_feat_dinf;
    if (name == "gcn_struct") return BoundKind::gcn_struct;
    if (name == "gin_feat") return BoundKind::gin_feat;
    throw std::invalid_argument("unknown bound kind: " + name);
}

double norm_1(const MatrixXd& w) { return w.size() ? w.cwiseAbs().colwise().sum().maxCoeff() : 0.0; }
double norm_inf(const MatrixXd& w) { return w.size() ? w.cwiseAbs().rowwise().sum().maxCoeff() : 0.0; }

double weight_norm_product(const Model& model, BoundKind kind) {
    const auto norm = [kind](const MatrixXd& w) {
        switch (kind) {
            case BoundKind::gcn_feat_d1: return norm_1(w);
            case BoundKind::gcn_struct: return spectral_norm(w);
            case BoundKind::gcn_feat_dinf:
            case BoundKind::gin_feat: return norm_inf(w);
        }
        return 0.0;
    };
    double prod = 1.0;
    for (const auto& layer : model.layers) prod *= norm(effective_weight(layer.lin.weight, model.orthonormal));
    prod *= norm(effective_weight(model.head.weight, model.orthonormal));
    return prod;
}

double robustness_bound(const Model& model, const Graph& g, const MatrixXd& x, const RobustnessConfig& cfg,
                        BoundKind kind) {
    cfg.validate();
    const LayerKind expected = kind == BoundKind::gin_feat ? LayerKind::gin : LayerKind::gcn;
    for (const auto& layer : model.layers) {
        if (layer.kind != expected) throw std::invalid_argument("robustness_bound: bound kind does not match layer kinds");
    }
    if (x.rows() != g.num_nodes()) throw ShapeError("robustness_bound: feature rows must equal node count");
    const int depth = std::max<int>(1, static_cast<int>(model.layers.size()));
    const double prod = weight_norm_product(model, kind);
    switch (kind) {
        case BoundKind::gcn_feat_d1: return prod * cfg.eps * normalized_walk_sums(g, depth).total / cfg.sigma;
        case BoundKind::gcn_feat_dinf: return prod * cfg.eps * normalized_walk_sums(g, depth).max / cfg.sigma;
        case BoundKind::gcn_struct: {
            const double xn = spectral_norm(x);
            return prod * xn * cfg.eps * (1.0 + static_cast<double>(model.layers.size()) * prod) / cfg.sigma;
        }
        case BoundKind::gin_feat: {
            const double b = x.rows() ? x.rowwise().norm().maxCoeff() : 0.0;
            const double max_deg = g.num_nodes() ? g.degrees().maxCoeff() : 0.0;
            return prod * (b * static_cast<double>(model.layers.size()) * max_deg + cfg.eps) / cfg.sigma;
        }
    }
    throw std::invalid_argument("robustness_bound: unknown kind");
}

Perturbation sample_perturbation(Index rows, Index cols, double eps, double p, Rng& rng) {
    if (!(eps >= 0.0)) throw std::invalid_argument("sample_perturbation: eps must be non-negative");
    if (!(p > 0.0)) throw std::invalid_argument("sample_perturbation: p must be positive");
    Perturbation out;
    out.z = MatrixXd::Zero(rows, cols);
    if (rows == 0 || cols == 0) return out;
    const double k = static_cast<double>(cols);
    out.radius = eps * std::pow(rng.uniform_open(), 1.0 / k);
    out.anchor_row = static_cast<Index>(rng.below(static_cast<std::uint64_t>(rows)));
    std::vector<double> cuts(static_cast<std::size_t>(cols - 1));
    for (Index i = 0; i < rows; ++i) {
        const double ri = i == out.anchor_row ? out.radius : out.radius * std::pow(rng.uniform_open(), 1.0 / k);
        if (std::isinf(p)) {
            const Index peak = static_cast<Index>(rng.below(static_cast<std::uint64_t>(cols)));
            for (Index j = 0; j < cols; ++j) {
                const double mag = j == peak ? ri : rng.uniform(0.0, ri);
                out.z(i, j) = rng.sign() * mag;
            }
            continue;
        }
        for (auto& c : cuts) c = rng.uniform();
        std::sort(cuts.begin(), cuts.end());
        double prev = 0.0;
        for (Index j = 0; j < cols; ++j) {
            const double next = j + 1 < cols ? cuts[j] : 1.0;
            const double part = next - prev;
            prev = next;
            out.z(i, j) = rng.sign() * ri * std::pow(part, 1.0 / p);
        }
    }
    return out;
}

MatrixXd sample_feature_perturbation(const MatrixXd& x, double eps, double p, std::uint64_t seed) {
    Rng rng(seed);
    return x + sample_perturbation(x.rows(), x.cols(), eps, p, rng).z;
}

MatrixXd attack_random(const MatrixXd& x, double psi, std::uint64_t seed) {
    if (!(psi >= 0.0)) throw std::invalid_argument("attack_random: psi must be non-negative");
    if (psi == 0.0) return x;
    Rng rng(seed);
    MatrixXd out = x;
    for (Index j = 0; j < x.cols(); ++j) {
        for (Index i = 0; i < x.rows(); ++i) out(i, j) += psi * rng.normal();
    }
    return out;
}

MatrixXd feature_gradient(const Model& model, const PreparedGraph& pg, const MatrixXd& x, const Labels& targets,
                          const std::vector<Index>& rows) {
    ad::Tape tape;
    const ModelVars vars = bind(tape, model, false);
    const ad::Var xv = tape.variable(x);
    const TapeForward tf = forward_on_tape(model, vars, pg, xv);
    std::vector<Index> selected = rows;
    if (selected.empty()) {
        selected.resize(static_cast<std::size_t>(tf.logits.rows()));
        std::iota(selected.begin(), selected.end(), Index{0});
    }
    const ad::Var loss = ad::softmax_cross_entropy(tf.logits, targets, selected);
    tape.backward(loss);
    return xv.grad().size() ? xv.grad() : MatrixXd::Zero(x.rows(), x.cols());
}

MatrixXd attack_pgd_features(const Model& model, const Graph& g, const MatrixXd& x, const Labels& targets, double eps,
                             int steps, double step_size, const std::vector<Index>& rows) {
    if (!(eps >= 0.0)) throw std::invalid_argument("attack_pgd_features: eps must be non-negative");
    if (steps < 0) throw std::invalid_argument("attack_pgd_features: steps must be non-negative");
    if (steps == 0) return x;
    const double step = step_size > 0.0 ? step_size : eps / steps;
    const PreparedGraph pg = prepare(g, model);
    MatrixXd adv = x;
    for (int s = 0; s < steps; ++s) {
        const MatrixXd grad = feature_gradient(model, pg, adv, targets, rows);
        for (Index i = 0; i < adv.rows(); ++i) {
            const double gn = grad.row(i).norm();
            if (gn > 0.0) adv.row(i) += step * grad.row(i) / gn;
            const Eigen::RowVectorXd delta = adv.row(i) - x.row(i);
            const double dn = delta.norm();
            if (dn > eps) adv.row(i) = x.row(i) + delta * (eps / dn);
        }
    }
    return adv;
}

double output_distance(const MatrixXd& a, const MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("output_distance: shapes differ");
    if (a.rows() == 0) return 0.0;
    return (a - b).norm() / (2.0 * std::sqrt(static_cast<double>(a.rows())));
}

RobustnessReport estimate_expected_vulnerability(const Model& model, const std::vector<RobustnessInput>& inputs,
                                                 const RobustnessConfig& cfg) {
    cfg.validate();
    if (inputs.empty()) throw std::invalid_argument("estimate_expected_vulnerability: no inputs");
    const Rng root(cfg.seed);
    double adv = 0.0;
    double gamma = 0.0;
    const bool gcn_stack = std::all_of(model.layers.begin(), model.layers.end(),
                                       [](const Layer& l) { return l.kind == LayerKind::gcn; });
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const RobustnessInput& in = inputs[i];
        const PreparedGraph pg = prepare(in.graph, model);
        const MatrixXd clean = forward(model, pg, in.features).probabilities;
        Rng stream = root.split(i);
        double hits = 0.0;
        for (int l = 0; l < cfg.samples; ++l) {
            Rng rng = stream.split(static_cast<std::uint64_t>(l));
            const MatrixXd z = sample_perturbation(in.features.rows(), in.features.cols(), cfg.eps, cfg.p, rng).z;
            const MatrixXd noisy = forward(model, pg, in.features + z).probabilities;
            if (output_distance(noisy, clean) > cfg.sigma) hits += 1.0;
        }
        adv += hits / cfg.samples;
        if (gcn_stack) {
            gamma = std::max(gamma, robustness_bound(model, in.graph, in.features, cfg, BoundKind::gcn_feat_dinf));
        }
    }
    RobustnessReport r;
    r.adv = adv / static_cast<double>(inputs.size());
    const double total = static_cast<double>(inputs.size()) * cfg.samples;
    r.standard_error = std::sqrt(r.adv * (1.0 - r.adv) / total);
    if (gcn_stack) r.gamma = gamma;
    r.eps = cfg.eps;
    r.sigma = cfg.sigma;
    r.p = cfg.p;
    r.samples = cfg.samples;
    r.seed = cfg.seed;
    r.n_inputs = static_cast<int>(inputs.size());
    return r;
}

std::string to_json(const RobustnessReport& r) {
    nlohmann::json j;
    j["adv"] = r.adv;
    j["stderr"] = r.standard_error;
    j["gamma"] = std::isnan(r.gamma) ? nlohmann::json(nullptr) : nlohmann::json(r.gamma);
    j["eps"] = r.eps;
    j["sigma"] = r.sigma;
    j["p"] = std::isinf(r.p) ? nlohmann::json("inf") : nlohmann::json(r.p);
    j["L_max"] = r.samples;
    j["seed"] = r.seed;
    j["n_inputs"] = r.n_inputs;
    return j.dump(2);
}

History train_gcorn(Model& model, const NodeTask& task, const TrainConfig& cfg, const BjorckConfig& bjorck) {
    model.orthonormal = bjorck;
    return train(model, task, cfg);
}

History train_gcorn(Model& model, const GraphDataset& data, const TrainConfig& cfg, const BjorckConfig& bjorck) {
    model.orthonormal = bjorck;
    return train(model, data, cfg);
}

}  // namespace cgl
