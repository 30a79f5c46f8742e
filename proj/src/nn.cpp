#include "cgl/nn.hpp"

#include "cgl/error.hpp"
#include "cgl/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cgl {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::gcn: return "gcn";
        case LayerKind::gin: return "gin";
        case LayerKind::cgnn: return "cgnn";
    }
    return "unknown";
}

LayerKind parse_layer_kind(const std::string& name) {
    if (name == "gcn") return LayerKind::gcn;
    if (name == "gin") return LayerKind::gin;
    if (name == "cgnn") return LayerKind::cgnn;
    throw std::invalid_argument("unknown layer kind: " + name);
}

std::string to_string(Readout readout) {
    switch (readout) {
        case Readout::none: return "none";
        case Readout::sum: return "sum";
        case Readout::mean: return "mean";
    }
    return "unknown";
}

Readout parse_readout(const std::string& name) {
    if (name == "none") return Readout::none;
    if (name == "sum") return Readout::sum;
    if (name == "mean") return Readout::mean;
    throw std::invalid_argument("unknown readout: " + name);
}

Index Model::input_dim() const { return layers.empty() ? head.in_dim() : layers.front().lin.in_dim(); }

Linear make_linear(Index in, Index out, bool bias, std::uint64_t seed) {
    Rng rng(seed);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Linear lin;
    lin.weight.resize(in, out);
    for (Index j = 0; j < out; ++j) {
        for (Index i = 0; i < in; ++i) lin.weight(i, j) = rng.uniform(-limit, limit);
    }
    lin.use_bias = bias;
    lin.bias = Eigen::RowVectorXd::Zero(bias ? out : 0);
    return lin;
}

Model make_model(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.in_dim < 1 || spec.num_classes < 1) throw std::invalid_argument("make_model: dimensions must be positive");
    Rng root(seed);
    Model m;
    m.readout = spec.readout;
    Index in = spec.in_dim;
    for (std::size_t l = 0; l < spec.hidden.size(); ++l) {
        Layer layer;
        layer.kind = spec.kind;
        layer.lin = make_linear(in, spec.hidden[l], spec.bias, root.split(l).next());
        layer.gin_eps = spec.gin_eps;
        layer.cgso = spec.cgso;
        layer.centrality = spec.centrality;
        layer.act = spec.act;
        m.layers.push_back(std::move(layer));
        in = spec.hidden[l];
    }
    m.head = make_linear(in, spec.num_classes, spec.bias, root.split(spec.hidden.size()).next());
    return m;
}

PreparedGraph::PreparedGraph(const Graph& g, const std::vector<CentralityKind>& kinds) : n(g.num_nodes()) {
    adjacency = g.sparse_adjacency();
    const VectorXd s = (g.degrees().array() + 1.0).sqrt().inverse().matrix();
    std::vector<Eigen::Triplet<double>> trip;
    for (Index i = 0; i < n; ++i) {
        trip.emplace_back(i, i, s[i] * s[i]);
        for (Index j : g.neighbors(i)) trip.emplace_back(i, j, s[i] * s[j]);
    }
    normalized.resize(n, n);
    normalized.setFromTriplets(trip.begin(), trip.end());
    for (CentralityKind kind : kinds) {
        if (!centrality.count(kind)) centrality[kind] = centrality_matrix(g, kind).values;
    }
}

const VectorXd& PreparedGraph::centrality_of(CentralityKind kind) const {
    const auto it = centrality.find(kind);
    if (it == centrality.end()) throw std::invalid_argument("PreparedGraph: centrality not prepared: " + to_string(kind));
    return it->second;
}

std::vector<CentralityKind> required_centralities(const Model& model) {
    std::vector<CentralityKind> kinds;
    for (const auto& layer : model.layers) {
        if (layer.kind == LayerKind::cgnn) kinds.push_back(layer.centrality);
    }
    return kinds;
}

PreparedGraph prepare(const Graph& g, const Model& model) { return PreparedGraph(g, required_centralities(model)); }

namespace {

// Visits every trainable parameter in layout order. f(slot, data) receives a
// pointer to slot.size contiguous doubles.
template <class M, class F>
void visit_params(M& model, F&& f) {
    Index offset = 0;
    auto emit = [&](const std::string& name, int layer, ParamGroup group, auto* data, Index size) {
        f(ParamSlot{name, layer, group, offset, size}, data);
        offset += size;
    };
    auto linear = [&](auto& lin, int layer, const std::string& prefix) {
        emit(prefix + ".weight", layer, ParamGroup::weight, lin.weight.data(), lin.weight.size());
        if (lin.use_bias) emit(prefix + ".bias", layer, ParamGroup::bias, lin.bias.data(), lin.bias.size());
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        const int li = static_cast<int>(l);
        const std::string prefix = "layer" + std::to_string(l);
        linear(layer.lin, li, prefix);
        if (layer.kind == LayerKind::gin) emit(prefix + ".gin_eps", li, ParamGroup::gin_eps, &layer.gin_eps, 1);
        if (layer.kind == LayerKind::cgnn) {
            auto& c = layer.cgso;
            emit(prefix + ".m1", li, ParamGroup::cgso_coefficient, &c.m1, 1);
            emit(prefix + ".m2", li, ParamGroup::cgso_coefficient, &c.m2, 1);
            emit(prefix + ".m3", li, ParamGroup::cgso_coefficient, &c.m3, 1);
            emit(prefix + ".e1", li, ParamGroup::cgso_exponent, &c.e1, 1);
            emit(prefix + ".e2", li, ParamGroup::cgso_exponent, &c.e2, 1);
            emit(prefix + ".e3", li, ParamGroup::cgso_exponent, &c.e3, 1);
            emit(prefix + ".a", li, ParamGroup::cgso_coefficient, &c.a, 1);
        }
    }
    linear(model.head, static_cast<int>(model.layers.size()), "head");
}

MatrixXd scalar(double x) { return MatrixXd::Constant(1, 1, x); }

ad::Var leaf(ad::Tape& tape, MatrixXd value, bool trainable) {
    return trainable ? tape.variable(std::move(value)) : tape.constant(std::move(value));
}

MatrixXd grad_or_zero(const ad::Var& v, Index rows, Index cols) {
    if (v.tape == nullptr || v.grad().size() == 0) return MatrixXd::Zero(rows, cols);
    return v.grad();
}

double scalar_grad(const ad::Var& v) {
    if (v.tape == nullptr || v.grad().size() == 0) return 0.0;
    return v.grad()(0, 0);
}

ad::Var activate(ad::Var h, Activation act) { return act == Activation::relu ? ad::relu(h) : h; }

std::vector<Index> all_rows(Index n) {
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

}  // namespace

std::vector<ParamSlot> param_layout(const Model& model) {
    std::vector<ParamSlot> out;
    visit_params(model, [&](const ParamSlot& s, const double*) { out.push_back(s); });
    return out;
}

VectorXd pack(const Model& model) {
    std::vector<double> flat;
    visit_params(model, [&](const ParamSlot& s, const double* data) { flat.insert(flat.end(), data, data + s.size); });
    return Eigen::Map<VectorXd>(flat.data(), static_cast<Index>(flat.size()));
}

void unpack(Model& model, const VectorXd& flat) {
    Index total = 0;
    visit_params(model, [&](const ParamSlot& s, double*) { total += s.size; });
    if (total != flat.size()) throw ShapeError("unpack: parameter count mismatch");
    visit_params(model, [&](const ParamSlot& s, double* data) {
        for (Index k = 0; k < s.size; ++k) data[k] = flat[s.offset + k];
    });
}

ModelVars bind(ad::Tape& tape, const Model& model, bool trainable) {
    ModelVars vars;
    for (const auto& layer : model.layers) {
        ModelVars::LayerVars lv;
        lv.weight = leaf(tape, layer.lin.weight, trainable);
        if (layer.lin.use_bias) lv.bias = leaf(tape, layer.lin.bias, trainable);
        if (layer.kind == LayerKind::gin) lv.gin_eps = leaf(tape, scalar(layer.gin_eps), trainable);
        if (layer.kind == LayerKind::cgnn) {
            const auto& c = layer.cgso;
            lv.m1 = leaf(tape, scalar(c.m1), trainable);
            lv.m2 = leaf(tape, scalar(c.m2), trainable);
            lv.m3 = leaf(tape, scalar(c.m3), trainable);
            lv.e1 = leaf(tape, scalar(c.e1), trainable);
            lv.e2 = leaf(tape, scalar(c.e2), trainable);
            lv.e3 = leaf(tape, scalar(c.e3), trainable);
            lv.a = leaf(tape, scalar(c.a), trainable);
        }
        vars.layers.push_back(lv);
    }
    vars.head_weight = leaf(tape, model.head.weight, trainable);
    if (model.head.use_bias) vars.head_bias = leaf(tape, model.head.bias, trainable);
    return vars;
}

Gradients collect(const ModelVars& vars, const Model& model) {
    Gradients g = model;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& lv = vars.layers[l];
        auto& out = g.layers[l];
        out.lin.weight = grad_or_zero(lv.weight, out.lin.weight.rows(), out.lin.weight.cols());
        if (out.lin.use_bias) out.lin.bias = grad_or_zero(lv.bias, 1, out.lin.bias.size());
        out.gin_eps = scalar_grad(lv.gin_eps);
        out.cgso = {scalar_grad(lv.m1), scalar_grad(lv.m2), scalar_grad(lv.m3), scalar_grad(lv.e1),
                    scalar_grad(lv.e2), scalar_grad(lv.e3), scalar_grad(lv.a)};
    }
    g.head.weight = grad_or_zero(vars.head_weight, g.head.weight.rows(), g.head.weight.cols());
    if (g.head.use_bias) g.head.bias = grad_or_zero(vars.head_bias, 1, g.head.bias.size());
    return g;
}

ad::Var effective_weight(ad::Var weight, const std::optional<BjorckConfig>& cfg) {
    if (!cfg) return weight;
    if (cfg->p_order < 1 || cfg->iterations < 0) throw std::invalid_argument("bjorck: need p_order >= 1, iterations >= 0");
    ad::Tape& tape = *weight.tape;
    const bool wide = weight.rows() < weight.cols();
    ad::Var cur = wide ? ad::transpose(weight) : weight;
    if (cfg->prescale) {
        const double norm = spectral_norm(cur.value());
        if (norm > 0.0) cur = ad::scale(1.0 / norm, cur);
    }
    const Index k = cur.cols();
    const ad::Var id = tape.constant(MatrixXd::Identity(k, k));
    ad::Var q = ad::sub(id, ad::matmul(ad::transpose(cur), cur));
    double prev = q.value().norm();
    for (int it = 0; it < cfg->iterations; ++it) {
        ad::Var series = id;
        ad::Var power = id;
        for (int i = 1; i <= cfg->p_order; ++i) {
            power = ad::matmul(power, q);
            series = ad::add(series, ad::scale(bjorck_coefficient(i), power));
        }
        cur = ad::matmul(cur, series);
        q = ad::sub(id, ad::matmul(ad::transpose(cur), cur));
        const double res = q.value().norm();
        if (res > prev * (1.0 + 1e-9) + 1e-12) throw ConvergenceError("bjorck: residual increased", res);
        prev = res;
    }
    return wide ? ad::transpose(cur) : cur;
}

MatrixXd effective_weight(const MatrixXd& weight, const std::optional<BjorckConfig>& cfg) {
    if (!cfg) return weight;
    return bjorck_orthonormalize(weight, *cfg);
}

ad::Var linear_forward(const Linear& lin, ad::Var weight, ad::Var bias, ad::Var h,
                       const std::optional<BjorckConfig>& ortho) {
    if (h.cols() != lin.in_dim()) throw ShapeError("linear: input width does not match weight rows");
    ad::Var z = ad::matmul(h, effective_weight(weight, ortho));
    if (lin.use_bias) z = ad::add_bias(z, bias);
    return z;
}

ad::Var layer_forward(const Layer& layer, const ModelVars::LayerVars& vars, const PreparedGraph& pg, ad::Var h,
                      const std::optional<BjorckConfig>& ortho) {
    if (h.rows() != pg.n) throw ShapeError("layer: feature rows must equal node count");
    if (h.cols() != layer.lin.in_dim()) throw ShapeError("layer: input width does not match weight rows");
    const ad::Var z = ad::matmul(h, effective_weight(vars.weight, ortho));
    ad::Var agg;
    switch (layer.kind) {
        case LayerKind::gcn:
            agg = ad::spmm(pg.normalized, z);
            break;
        case LayerKind::gin:
            agg = ad::add(ad::add(z, ad::scale(vars.gin_eps, z)), ad::spmm(pg.adjacency, z));
            break;
        case LayerKind::cgnn: {
            const VectorXd& v = pg.centrality_of(layer.centrality);
            const ad::Var p1 = ad::pow_base(v, vars.e1);
            const ad::Var p2 = ad::pow_base(v, vars.e2);
            const ad::Var p3 = ad::pow_base(v, vars.e3);
            const ad::Var right = ad::row_scale(p3, z);
            const ad::Var inner = ad::add(ad::spmm(pg.adjacency, right), ad::scale(vars.a, right));
            agg = ad::add(ad::add(ad::scale(vars.m1, ad::row_scale(p1, z)), ad::scale(vars.m2, ad::row_scale(p2, inner))),
                          ad::scale(vars.m3, z));
            break;
        }
    }
    if (layer.lin.use_bias) agg = ad::add_bias(agg, vars.bias);
    return activate(agg, layer.act);
}

TapeForward forward_on_tape(const Model& model, const ModelVars& vars, const PreparedGraph& pg, ad::Var x) {
    TapeForward out;
    out.hidden.push_back(x);
    ad::Var h = x;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        h = layer_forward(model.layers[l], vars.layers[l], pg, h, model.orthonormal);
        out.hidden.push_back(h);
    }
    switch (model.readout) {
        case Readout::none: out.embedding = h; break;
        case Readout::sum: out.embedding = ad::sum_rows(h); break;
        case Readout::mean: out.embedding = ad::mean_rows(h); break;
    }
    out.logits = linear_forward(model.head, vars.head_weight, vars.head_bias, out.embedding, model.orthonormal);
    return out;
}

ForwardResult forward(const Model& model, const PreparedGraph& pg, const MatrixXd& x) {
    if (x.rows() != pg.n) throw ShapeError("forward: feature rows must equal node count");
    ad::Tape tape;
    const ModelVars vars = bind(tape, model, false);
    const TapeForward tf = forward_on_tape(model, vars, pg, tape.constant(x));
    ForwardResult r;
    for (const auto& h : tf.hidden) r.hidden.push_back(h.value());
    r.embedding = tf.embedding.value();
    r.logits = tf.logits.value();
    r.probabilities = softmax_rows(r.logits);
    return r;
}

ForwardResult forward(const Model& model, const Graph& g, const MatrixXd& x) {
    return forward(model, prepare(g, model), x);
}

MatrixXd softmax_rows(const MatrixXd& logits) {
    MatrixXd p(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - m).exp().matrix();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

double cross_entropy(const MatrixXd& probs, const std::vector<int>& targets, const std::vector<Index>& rows) {
    if (static_cast<Index>(targets.size()) != probs.rows()) throw ShapeError("cross_entropy: one target per row");
    if (rows.empty()) throw std::invalid_argument("cross_entropy: no rows selected");
    double total = 0.0;
    for (Index r : rows) {
        const int y = targets[r];
        if (y < 0 || y >= probs.cols()) throw std::out_of_range("cross_entropy: target out of range");
        total -= std::log(probs(r, y));
    }
    return total / static_cast<double>(rows.size());
}

double cross_entropy(const MatrixXd& probs, const std::vector<int>& targets) {
    return cross_entropy(probs, targets, all_rows(probs.rows()));
}

std::vector<int> argmax_rows(const MatrixXd& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Index i = 0; i < m.rows(); ++i) {
        Index best = 0;
        m.row(i).maxCoeff(&best);
        out[i] = static_cast<int>(best);
    }
    return out;
}

double accuracy(const MatrixXd& scores, const std::vector<int>& targets, const std::vector<Index>& rows) {
    if (rows.empty()) return 0.0;
    const auto pred = argmax_rows(scores);
    double hit = 0.0;
    for (Index r : rows) hit += pred[r] == targets[r] ? 1.0 : 0.0;
    return hit / static_cast<double>(rows.size());
}

LossGrad loss_and_grad(const Model& model, const PreparedGraph& pg, const MatrixXd& x, const Labels& targets,
                       const std::vector<Index>& mask) {
    ad::Tape tape;
    const ModelVars vars = bind(tape, model, true);
    const TapeForward tf = forward_on_tape(model, vars, pg, tape.constant(x));
    const std::vector<Index> rows = mask.empty() ? all_rows(tf.logits.rows()) : mask;
    const ad::Var loss = ad::softmax_cross_entropy(tf.logits, targets, rows);
    if (!std::isfinite(loss.value()(0, 0))) throw std::domain_error("loss_and_grad: non-finite loss");
    tape.backward(loss);
    return {loss.value()(0, 0), collect(vars, model)};
}

LossGrad loss_and_grad(const Model& model, const Graph& g, const MatrixXd& x, const Labels& targets,
                       const std::vector<Index>& mask) {
    return loss_and_grad(model, prepare(g, model), x, targets, mask);
}

LossGrad loss_and_grad(const Model& model, const std::vector<PreparedGraph>& pgs, const GraphDataset& data,
                       const std::vector<Index>& subset) {
    if (model.readout == Readout::none) throw std::invalid_argument("graph task needs a sum or mean readout");
    if (subset.empty()) throw std::invalid_argument("loss_and_grad: empty subset");
    ad::Tape tape;
    const ModelVars vars = bind(tape, model, true);
    const double inv = 1.0 / static_cast<double>(subset.size());
    ad::Var total;
    bool first = true;
    for (Index idx : subset) {
        const GraphSample& s = data.graphs[idx];
        const TapeForward tf = forward_on_tape(model, vars, pgs[idx], tape.constant(s.features));
        const ad::Var l = ad::scale(inv, ad::softmax_cross_entropy(tf.logits, {s.label}, {0}));
        total = first ? l : ad::add(total, l);
        first = false;
    }
    if (!std::isfinite(total.value()(0, 0))) throw std::domain_error("loss_and_grad: non-finite loss");
    tape.backward(total);
    return {total.value()(0, 0), collect(vars, model)};
}

void adam_step(VectorXd& params, const VectorXd& grads, AdamState& state, const VectorXd& lr, double beta1,
               double beta2, double eps) {
    const Index n = params.size();
    if (grads.size() != n || lr.size() != n) throw ShapeError("adam_step: size mismatch");
    if (state.m.size() != n) {
        state.m = VectorXd::Zero(n);
        state.v = VectorXd::Zero(n);
        state.t = 0;
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(beta1, state.t);
    const double c2 = 1.0 - std::pow(beta2, state.t);
    for (Index i = 0; i < n; ++i) {
        if (lr[i] == 0.0) continue;
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= lr[i] * mhat / (std::sqrt(vhat) + eps);
    }
}

void adam_step(VectorXd& params, const VectorXd& grads, AdamState& state, double lr, double beta1, double beta2,
               double eps) {
    adam_step(params, grads, state, VectorXd::Constant(params.size(), lr), beta1, beta2, eps);
}

VectorXd learning_rates(const std::vector<ParamSlot>& layout, const TrainConfig& cfg,
                        const std::function<bool(const ParamSlot&)>& trainable) {
    Index total = 0;
    for (const auto& s : layout) total += s.size;
    VectorXd lr(total);
    for (const auto& s : layout) {
        double rate = cfg.lr;
        if (s.group == ParamGroup::cgso_exponent && cfg.exponent_lr > 0.0) rate = cfg.exponent_lr;
        if (trainable && !trainable(s)) rate = 0.0;
        lr.segment(s.offset, s.size).setConstant(rate);
    }
    return lr;
}

History optimize(Model& model, const Objective& objective, const TrainConfig& cfg, const VectorXd& lr,
                 const std::function<void(const Model&, History&)>& on_epoch) {
    History history;
    const auto layout = param_layout(model);
    VectorXd params = pack(model);
    AdamState state;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Gradients grad;
        const double loss = objective(model, &grad);
        VectorXd g = pack(grad);
        if (cfg.weight_decay > 0.0) {
            for (const auto& s : layout) {
                if (s.group == ParamGroup::weight) g.segment(s.offset, s.size) += cfg.weight_decay * params.segment(s.offset, s.size);
            }
        }
        adam_step(params, g, state, lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        unpack(model, params);
        history.loss.push_back(loss);
        if (on_epoch) on_epoch(model, history);
    }
    return history;
}

History train(Model& model, const NodeTask& task, const TrainConfig& cfg) {
    if (task.train.empty()) throw std::invalid_argument("train: empty training split");
    const PreparedGraph pg = prepare(task.graph, model);
    const Objective objective = [&](const Model& m, Gradients* g) {
        LossGrad lg = loss_and_grad(m, pg, task.features, task.labels, task.train);
        *g = std::move(lg.grad);
        return lg.loss;
    };
    const auto on_epoch = [&](const Model& m, History& h) {
        const MatrixXd logits = forward(m, pg, task.features).logits;
        h.train_accuracy.push_back(accuracy(logits, task.labels, task.train));
        h.val_accuracy.push_back(accuracy(logits, task.labels, task.val));
    };
    return optimize(model, objective, cfg, learning_rates(param_layout(model), cfg), on_epoch);
}

History train(Model& model, const GraphDataset& data, const TrainConfig& cfg) {
    if (data.train.empty()) throw std::invalid_argument("train: empty training split");
    std::vector<PreparedGraph> pgs;
    pgs.reserve(data.graphs.size());
    for (const auto& s : data.graphs) pgs.push_back(prepare(s.graph, model));
    const Objective objective = [&](const Model& m, Gradients* g) {
        LossGrad lg = loss_and_grad(m, pgs, data, data.train);
        *g = std::move(lg.grad);
        return lg.loss;
    };
    const auto score = [&](const Model& m, const std::vector<Index>& subset) {
        if (subset.empty()) return 0.0;
        double hit = 0.0;
        for (Index idx : subset) {
            const MatrixXd logits = forward(m, pgs[idx], data.graphs[idx].features).logits;
            hit += argmax_rows(logits)[0] == data.graphs[idx].label ? 1.0 : 0.0;
        }
        return hit / static_cast<double>(subset.size());
    };
    const auto on_epoch = [&](const Model& m, History& h) {
        h.train_accuracy.push_back(score(m, data.train));
        h.val_accuracy.push_back(score(m, data.val));
    };
    return optimize(model, objective, cfg, learning_rates(param_layout(model), cfg), on_epoch);
}

MatrixXd graph_embeddings(const Model& model, const GraphDataset& data, const std::vector<Index>& subset) {
    if (model.readout == Readout::none) throw std::invalid_argument("graph_embeddings: model has no readout");
    const Index d = model.head.in_dim();
    MatrixXd out(static_cast<Index>(subset.size()), d);
    for (std::size_t k = 0; k < subset.size(); ++k) {
        const GraphSample& s = data.graphs[subset[k]];
        out.row(static_cast<Index>(k)) = forward(model, s.graph, s.features).embedding.row(0);
    }
    return out;
}

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_linear(std::ostream& os, const Linear& lin) {
    os << "linear " << lin.weight.rows() << ' ' << lin.weight.cols() << ' ' << (lin.use_bias ? 1 : 0) << '\n';
    for (Index i = 0; i < lin.weight.rows(); ++i) {
        for (Index j = 0; j < lin.weight.cols(); ++j) os << (j ? " " : "") << fmt(lin.weight(i, j));
        os << '\n';
    }
    if (lin.use_bias) {
        for (Index j = 0; j < lin.bias.size(); ++j) os << (j ? " " : "") << fmt(lin.bias[j]);
        os << '\n';
    }
}

class Reader {
public:
    explicit Reader(std::istream& is) : is_(is) {}
    std::string word() {
        std::string w;
        if (!(is_ >> w)) throw ParseError("checkpoint: unexpected end of file", -1);
        return w;
    }
    void expect(const std::string& w) {
        const std::string got = word();
        if (got != w) throw ParseError("checkpoint: expected '" + w + "', found '" + got + "'", -1);
    }
    double number() {
        const std::string w = word();
        try {
            std::size_t used = 0;
            const double x = std::stod(w, &used);
            if (used != w.size()) throw std::invalid_argument(w);
            return x;
        } catch (const std::exception&) {
            throw ParseError("checkpoint: bad number '" + w + "'", -1);
        }
    }
    Index count() {
        const double x = number();
        if (x < 0 || x != std::floor(x)) throw ParseError("checkpoint: bad count", -1);
        return static_cast<Index>(x);
    }

private:
    std::istream& is_;
};

Linear read_linear(Reader& r) {
    r.expect("linear");
    Linear lin;
    const Index rows = r.count();
    const Index cols = r.count();
    lin.use_bias = r.count() != 0;
    lin.weight.resize(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) lin.weight(i, j) = r.number();
    }
    lin.bias.resize(lin.use_bias ? cols : 0);
    for (Index j = 0; j < lin.bias.size(); ++j) lin.bias[j] = r.number();
    return lin;
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_model: cannot open " + path.string());
    os << "cgl-model 1\n";
    os << "readout " << to_string(model.readout) << '\n';
    if (model.orthonormal) {
        os << "orthonormal bjorck " << model.orthonormal->p_order << ' ' << model.orthonormal->iterations << ' '
           << (model.orthonormal->prescale ? 1 : 0) << '\n';
    } else {
        os << "orthonormal none\n";
    }
    os << "layers " << model.layers.size() << '\n';
    for (const auto& layer : model.layers) {
        const auto& c = layer.cgso;
        os << "layer " << to_string(layer.kind) << ' ' << (layer.act == Activation::relu ? "relu" : "identity") << ' '
           << to_string(layer.centrality) << ' ' << fmt(layer.gin_eps);
        for (double x : {c.m1, c.m2, c.m3, c.e1, c.e2, c.e3, c.a}) os << ' ' << fmt(x);
        os << '\n';
        write_linear(os, layer.lin);
    }
    os << "head\n";
    write_linear(os, model.head);
    if (!os) throw std::runtime_error("save_model: write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_model: cannot open " + path.string());
    Reader r(is);
    r.expect("cgl-model");
    r.expect("1");
    Model m;
    r.expect("readout");
    m.readout = parse_readout(r.word());
    r.expect("orthonormal");
    if (r.word() == "bjorck") {
        BjorckConfig cfg;
        cfg.p_order = static_cast<int>(r.count());
        cfg.iterations = static_cast<int>(r.count());
        cfg.prescale = r.count() != 0;
        m.orthonormal = cfg;
    }
    r.expect("layers");
    const Index count = r.count();
    for (Index l = 0; l < count; ++l) {
        r.expect("layer");
        Layer layer;
        layer.kind = parse_layer_kind(r.word());
        const std::string act = r.word();
        if (act != "relu" && act != "identity") throw ParseError("checkpoint: bad activation '" + act + "'", -1);
        layer.act = act == "relu" ? Activation::relu : Activation::identity;
        layer.centrality = parse_centrality_kind(r.word());
        layer.gin_eps = r.number();
        auto& c = layer.cgso;
        for (double* x : {&c.m1, &c.m2, &c.m3, &c.e1, &c.e2, &c.e3, &c.a}) *x = r.number();
        layer.lin = read_linear(r);
        m.layers.push_back(std::move(layer));
    }
    r.expect("head");
    m.head = read_linear(r);
    return m;
}

}  // namespace cgl
