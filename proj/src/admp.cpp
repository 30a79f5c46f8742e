#include "cgl/admp.hpp"

#include "cgl/error.hpp"
#include "cgl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cgl {

Model AdmpModel::truncated(int l) const {
    if (l < 0 || l > depth()) throw std::out_of_range("AdmpModel::truncated: exit out of range");
    Model m;
    m.layers.assign(layers.begin(), layers.begin() + l);
    m.readout = Readout::none;
    m.head = exit_heads[l];
    return m;
}

AdmpModel make_admp_model(const ModelSpec& spec, std::uint64_t seed) {
    ModelSpec trunk = spec;
    trunk.readout = Readout::none;
    const Model base = make_model(trunk, seed);
    AdmpModel m;
    m.layers = base.layers;
    Rng rng(seed ^ 0xad3bULL);
    Index in = spec.in_dim;
    for (std::size_t l = 0; l <= spec.hidden.size(); ++l) {
        m.exit_heads.push_back(make_linear(in, spec.num_classes, spec.bias, rng.split(l).next()));
        if (l < spec.hidden.size()) in = spec.hidden[l];
    }
    return m;
}

namespace {

Model trunk_of(const AdmpModel& m) { return m.truncated(m.depth()); }

void check_model(const AdmpModel& m) {
    if (static_cast<int>(m.exit_heads.size()) != m.depth() + 1) {
        throw std::invalid_argument("AdmpModel: need exactly one exit head per depth");
    }
}

struct AdmpTape {
    ModelVars trunk;
    std::vector<ad::Var> head_w, head_b;  // exits 0..L-1; exit L lives in trunk
    std::vector<ad::Var> logits;
};

AdmpTape build(ad::Tape& tape, const AdmpModel& m, const PreparedGraph& pg, const MatrixXd& x, bool trainable) {
    check_model(m);
    AdmpTape t;
    const Model trunk = trunk_of(m);
    t.trunk = bind(tape, trunk, trainable);
    for (int l = 0; l < m.depth(); ++l) {
        const Linear& h = m.exit_heads[l];
        t.head_w.push_back(trainable ? tape.variable(h.weight) : tape.constant(h.weight));
        t.head_b.push_back(h.use_bias ? (trainable ? tape.variable(h.bias) : tape.constant(h.bias)) : ad::Var{});
    }
    const TapeForward tf = forward_on_tape(trunk, t.trunk, pg, tape.constant(x));
    for (int l = 0; l < m.depth(); ++l) {
        t.logits.push_back(linear_forward(m.exit_heads[l], t.head_w[l], t.head_b[l], tf.hidden[l], std::nullopt));
    }
    t.logits.push_back(tf.logits);
    return t;
}

std::vector<Index> rows_or_all(const std::vector<Index>& mask, Index n) {
    if (!mask.empty()) return mask;
    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Index{0});
    return rows;
}

}  // namespace

std::vector<MatrixXd> admp_forward(const AdmpModel& m, const PreparedGraph& pg, const MatrixXd& x) {
    if (x.rows() != pg.n) throw ShapeError("admp_forward: feature rows must equal node count");
    ad::Tape tape;
    const AdmpTape t = build(tape, m, pg, x, false);
    std::vector<MatrixXd> out;
    for (const auto& z : t.logits) out.push_back(softmax_rows(z.value()));
    return out;
}

std::vector<MatrixXd> admp_forward(const AdmpModel& m, const Graph& g, const MatrixXd& x) {
    return admp_forward(m, prepare(g, trunk_of(m)), x);
}

std::vector<AdmpSlot> admp_layout(const AdmpModel& m) {
    check_model(m);
    std::vector<AdmpSlot> out;
    Index offset = 0;
    for (const auto& s : param_layout(trunk_of(m))) {
        // Trunk layer l sits at depth l + 1; the trunk head is exit L.
        const bool head = s.layer == m.depth();
        out.push_back({s, head ? m.depth() : s.layer + 1});
        offset = s.offset + s.size;
    }
    for (int l = 0; l < m.depth(); ++l) {
        const Linear& h = m.exit_heads[l];
        const std::string prefix = "exit" + std::to_string(l);
        out.push_back({ParamSlot{prefix + ".weight", l, ParamGroup::weight, offset, h.weight.size()}, l});
        offset += h.weight.size();
        if (h.use_bias) {
            out.push_back({ParamSlot{prefix + ".bias", l, ParamGroup::bias, offset, h.bias.size()}, l});
            offset += h.bias.size();
        }
    }
    return out;
}

VectorXd admp_pack(const AdmpModel& m) {
    check_model(m);
    const VectorXd trunk = pack(trunk_of(m));
    std::vector<double> flat(trunk.data(), trunk.data() + trunk.size());
    for (int l = 0; l < m.depth(); ++l) {
        const Linear& h = m.exit_heads[l];
        flat.insert(flat.end(), h.weight.data(), h.weight.data() + h.weight.size());
        if (h.use_bias) flat.insert(flat.end(), h.bias.data(), h.bias.data() + h.bias.size());
    }
    return Eigen::Map<VectorXd>(flat.data(), static_cast<Index>(flat.size()));
}

void admp_unpack(AdmpModel& m, const VectorXd& flat) {
    check_model(m);
    Model trunk = trunk_of(m);
    const Index trunk_size = pack(trunk).size();
    Index total = trunk_size;
    for (int l = 0; l < m.depth(); ++l) total += m.exit_heads[l].weight.size() + m.exit_heads[l].bias.size();
    if (flat.size() != total) throw ShapeError("admp_unpack: parameter count mismatch");
    unpack(trunk, flat.head(trunk_size));
    m.layers = trunk.layers;
    m.exit_heads[m.depth()] = trunk.head;
    Index offset = trunk_size;
    for (int l = 0; l < m.depth(); ++l) {
        Linear& h = m.exit_heads[l];
        h.weight = Eigen::Map<const MatrixXd>(flat.data() + offset, h.weight.rows(), h.weight.cols());
        offset += h.weight.size();
        if (h.use_bias) {
            h.bias = flat.segment(offset, h.bias.size()).transpose();
            offset += h.bias.size();
        }
    }
}

AdmpLossGrad admp_loss_and_grad(const AdmpModel& m, const PreparedGraph& pg, const MatrixXd& x, const Labels& targets,
                                const std::vector<Index>& mask, const std::vector<double>& exit_weights) {
    if (static_cast<int>(exit_weights.size()) != m.depth() + 1) throw ShapeError("admp_loss_and_grad: one weight per exit");
    ad::Tape tape;
    const AdmpTape t = build(tape, m, pg, x, true);
    const std::vector<Index> rows = rows_or_all(mask, pg.n);
    ad::Var total;
    bool first = true;
    for (std::size_t l = 0; l < t.logits.size(); ++l) {
        if (exit_weights[l] == 0.0) continue;
        const ad::Var term = ad::scale(exit_weights[l], ad::softmax_cross_entropy(t.logits[l], targets, rows));
        total = first ? term : ad::add(total, term);
        first = false;
    }
    AdmpLossGrad out;
    AdmpModel grads = m;
    if (first) {
        out.grad = VectorXd::Zero(admp_pack(m).size());
        return out;
    }
    out.loss = total.value()(0, 0);
    if (!std::isfinite(out.loss)) throw std::domain_error("admp_loss_and_grad: non-finite loss");
    tape.backward(total);
    const Gradients tg = collect(t.trunk, trunk_of(m));
    grads.layers = tg.layers;
    grads.exit_heads[m.depth()] = tg.head;
    for (int l = 0; l < m.depth(); ++l) {
        Linear& h = grads.exit_heads[l];
        const auto& gw = t.head_w[l].grad();
        h.weight = gw.size() ? gw : MatrixXd::Zero(h.weight.rows(), h.weight.cols());
        if (h.use_bias) {
            const auto& gb = t.head_b[l].grad();
            h.bias = gb.size() ? Eigen::RowVectorXd(gb) : Eigen::RowVectorXd::Zero(h.bias.size());
        }
    }
    out.grad = admp_pack(grads);
    return out;
}

namespace {

History run_stage(AdmpModel& m, const PreparedGraph& pg, const NodeTask& task, const TrainConfig& cfg,
                  const std::vector<double>& weights, const VectorXd& lr) {
    History h;
    VectorXd params = admp_pack(m);
    AdamState state;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const AdmpLossGrad lg = admp_loss_and_grad(m, pg, task.features, task.labels, task.train, weights);
        adam_step(params, lg.grad, state, lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        admp_unpack(m, params);
        h.loss.push_back(lg.loss);
    }
    return h;
}

VectorXd stage_rates(const std::vector<AdmpSlot>& layout, const TrainConfig& cfg, int stage) {
    Index total = 0;
    for (const auto& s : layout) total += s.slot.size;
    VectorXd lr = VectorXd::Zero(total);
    for (const auto& s : layout) {
        if (stage >= 0 && s.depth != stage) continue;
        double rate = cfg.lr;
        if (s.slot.group == ParamGroup::cgso_exponent && cfg.exponent_lr > 0.0) rate = cfg.exponent_lr;
        lr.segment(s.slot.offset, s.slot.size).setConstant(rate);
    }
    return lr;
}

}  // namespace

History train_alm(AdmpModel& m, const NodeTask& task, const TrainConfig& cfg) {
    if (task.train.empty()) throw std::invalid_argument("train_alm: empty training split");
    const PreparedGraph pg = prepare(task.graph, trunk_of(m));
    const std::vector<double> weights(static_cast<std::size_t>(m.depth() + 1), 1.0);
    return run_stage(m, pg, task, cfg, weights, stage_rates(admp_layout(m), cfg, -1));
}

History train_st(AdmpModel& m, const NodeTask& task, const TrainConfig& cfg,
                 const std::function<void(int, const AdmpModel&)>& on_stage) {
    if (task.train.empty()) throw std::invalid_argument("train_st: empty training split");
    const PreparedGraph pg = prepare(task.graph, trunk_of(m));
    const auto layout = admp_layout(m);
    History all;
    for (int t = 0; t <= m.depth(); ++t) {
        std::vector<double> weights(static_cast<std::size_t>(m.depth() + 1), 0.0);
        weights[t] = 1.0;
        const History h = run_stage(m, pg, task, cfg, weights, stage_rates(layout, cfg, t));
        all.loss.insert(all.loss.end(), h.loss.begin(), h.loss.end());
        if (on_stage) on_stage(t, m);
    }
    return all;
}

std::vector<double> exit_accuracies(const std::vector<MatrixXd>& preds, const Labels& targets,
                                    const std::vector<Index>& rows) {
    std::vector<double> out;
    for (const auto& p : preds) out.push_back(accuracy(p, targets, rows));
    return out;
}

double oracle_accuracy(const std::vector<MatrixXd>& preds, const Labels& targets, const std::vector<Index>& rows) {
    if (rows.empty()) return 0.0;
    std::vector<std::vector<int>> arg;
    for (const auto& p : preds) {
        if (p.rows() != static_cast<Index>(targets.size())) throw ShapeError("oracle_accuracy: prediction rows differ");
        arg.push_back(argmax_rows(p));
    }
    double hit = 0.0;
    for (Index r : rows) {
        for (const auto& a : arg) {
            if (a[r] == targets[r]) {
                hit += 1.0;
                break;
            }
        }
    }
    return hit / static_cast<double>(rows.size());
}

int ExitPolicy::bucket_of(double value) const {
    const int buckets = static_cast<int>(bucket_layer.size());
    for (int c = buckets - 1; c > 0; --c) {
        if (edges[c] <= value) return c;
    }
    return 0;
}

ExitPolicy learn_exit_policy(const std::vector<MatrixXd>& preds, const Labels& targets,
                             const std::vector<Index>& val_mask, const CentralityVector& centrality, int buckets) {
    if (preds.empty()) throw std::invalid_argument("learn_exit_policy: no exits");
    if (buckets < 1) throw std::invalid_argument("learn_exit_policy: need at least one bucket");
    const VectorXd& v = centrality.values;
    const Index n = v.size();
    if (n == 0) throw std::invalid_argument("learn_exit_policy: empty centrality");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v[a] < v[b]; });

    ExitPolicy policy;
    policy.kind = centrality.kind;
    for (int c = 0; c < buckets; ++c) {
        const Index first = std::min(n - 1, c * n / buckets);
        policy.edges.push_back(v[order[first]]);
    }
    policy.edges.push_back(v[order.back()]);
    policy.bucket_layer.assign(static_cast<std::size_t>(buckets), 0);

    const auto best_layer = [&](const std::vector<Index>& rows) {
        const auto acc = exit_accuracies(preds, targets, rows);
        return static_cast<int>(std::max_element(acc.begin(), acc.end()) - acc.begin());
    };
    const int global = best_layer(val_mask);
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(buckets));
    for (Index r : val_mask) members[policy.bucket_of(v[r])].push_back(r);
    for (int c = 0; c < buckets; ++c) {
        policy.bucket_layer[c] = members[c].empty() ? global : best_layer(members[c]);
    }
    return policy;
}

PolicyResult apply_exit_policy(const ExitPolicy& policy, const std::vector<MatrixXd>& preds,
                               const VectorXd& centrality, const Labels& targets, const std::vector<Index>& test_mask) {
    if (policy.bucket_layer.empty()) throw std::invalid_argument("apply_exit_policy: empty policy");
    const Index n = centrality.size();
    std::vector<std::vector<int>> arg;
    for (const auto& p : preds) arg.push_back(argmax_rows(p));
    PolicyResult out;
    out.predictions.resize(static_cast<std::size_t>(n));
    out.layer.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const int layer = policy.bucket_layer[policy.bucket_of(centrality[i])];
        if (layer < 0 || layer >= static_cast<int>(preds.size())) throw std::out_of_range("apply_exit_policy: bad layer");
        out.layer[i] = layer;
        out.predictions[i] = arg[layer][i];
    }
    if (!test_mask.empty()) {
        double hit = 0.0;
        for (Index r : test_mask) hit += out.predictions[r] == targets[r] ? 1.0 : 0.0;
        out.accuracy = hit / static_cast<double>(test_mask.size());
    }
    return out;
}

}  // namespace cgl
