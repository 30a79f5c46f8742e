#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cgl/admp.hpp"
#include "cgl/fixtures.hpp"
#include "cgl/robustness.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

using namespace cgl;

namespace {

Linear identity_linear(Index d) {
    Linear lin;
    lin.weight = MatrixXd::Identity(d, d);
    lin.bias = Eigen::RowVectorXd::Zero(d);
    lin.use_bias = false;
    return lin;
}

Layer identity_layer(LayerKind kind, Index d, Activation act) {
    Layer layer;
    layer.kind = kind;
    layer.lin = identity_linear(d);
    layer.act = act;
    return layer;
}

std::vector<Index> range(Index n) {
    std::vector<Index> r(static_cast<std::size_t>(n));
    std::iota(r.begin(), r.end(), Index{0});
    return r;
}

MatrixXd one_hot_rows(const std::vector<int>& cls, Index c) {
    MatrixXd m = MatrixXd::Constant(static_cast<Index>(cls.size()), c, 0.0);
    for (std::size_t i = 0; i < cls.size(); ++i) m(static_cast<Index>(i), cls[i]) = 1.0;
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// nn-engine

TEST_CASE("forward examples") {
    Model gcn;
    gcn.layers.push_back(identity_layer(LayerKind::gcn, 2, Activation::relu));
    gcn.head = identity_linear(2);
    const ForwardResult r = forward(gcn, Graph(1, {}), (MatrixXd(1, 2) << 1, -1).finished());
    CHECK(r.hidden.back() == (MatrixXd(1, 2) << 1, 0).finished());

    Model gin;
    gin.layers.push_back(identity_layer(LayerKind::gin, 1, Activation::identity));
    gin.head = identity_linear(1);
    const ForwardResult s = forward(gin, Graph(2, {{0, 1}}), (MatrixXd(2, 1) << 1, 2).finished());
    CHECK(s.hidden.back() == (MatrixXd(2, 1) << 3, 3).finished());

    Model pool;
    pool.readout = Readout::sum;
    pool.head = identity_linear(2);
    const ForwardResult t = forward(pool, Graph(2, {}), MatrixXd::Identity(2, 2));
    CHECK(t.embedding == (MatrixXd(1, 2) << 1, 1).finished());

    CHECK_THROWS_AS(forward(gcn, Graph(2, {}), MatrixXd::Ones(3, 2)), ShapeError);
}

TEST_CASE("softmax and cross entropy") {
    CHECK(cross_entropy(MatrixXd::Constant(1, 3, 1.0 / 3.0), {0}) == doctest::Approx(std::log(3.0)));
    CHECK(cross_entropy(MatrixXd::Identity(2, 2), {0, 1}) == 0.0);
    CHECK(cross_entropy((MatrixXd(1, 2) << 0.5, 0.5).finished(), {0}) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS(cross_entropy(MatrixXd::Constant(1, 2, 0.5), {2}));

    Rng rng(1);
    const MatrixXd logits = MatrixXd::NullaryExpr(20, 5, [&] { return 30 * rng.normal(); });
    const MatrixXd p = softmax_rows(logits);
    CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK((p.array() > 0).all());
}

TEST_CASE("gradients match central differences for every layer kind") {
    for (auto kind : {LayerKind::gcn, LayerKind::gin, LayerKind::cgnn}) {
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto f = oracle::grad_fixture(kind, 10 * s + static_cast<std::uint64_t>(kind));
            CHECK(oracle::model_fd_error(f.model, f.graph, f.features, f.labels) <= 1e-5);
            CHECK(oracle::model_fd_error(f.model, f.graph, f.features, f.labels, {0, 2}) <= 1e-5);
        }
    }
    for (auto readout : {Readout::sum, Readout::mean}) {
        const auto f = oracle::grad_fixture(LayerKind::gcn, 77, readout);
        CHECK(oracle::model_fd_error(f.model, f.graph, f.features, {1}) <= 1e-5);
    }
}

TEST_CASE("cgso coefficient gradient when only the adjacency term is active") {
    auto f = oracle::grad_fixture(LayerKind::cgnn, 5);
    for (auto& layer : f.model.layers) layer.cgso = CgsoParams::adjacency();
    const LossGrad lg = loss_and_grad(f.model, f.graph, f.features, f.labels);
    const double h = 1e-5;
    Model up = f.model, down = f.model;
    up.layers[0].cgso.m1 += h;
    down.layers[0].cgso.m1 -= h;
    const double fd = (loss_and_grad(up, f.graph, f.features, f.labels).loss -
                       loss_and_grad(down, f.graph, f.features, f.labels).loss) / (2 * h);
    CHECK(oracle::relative_error(lg.grad.layers[0].cgso.m1, fd) <= 1e-5);
    CHECK(oracle::model_fd_error(f.model, f.graph, f.features, f.labels) <= 1e-5);
}

TEST_CASE("gradient vanishes at a confident correct prediction") {
    Model m;
    m.head = identity_linear(2);
    const MatrixXd x = (MatrixXd(2, 2) << 60, 0, 0, 60).finished();
    const LossGrad lg = loss_and_grad(m, Graph(2, {}), x, {0, 1});
    CHECK(pack(lg.grad).norm() <= 1e-10);
}

TEST_CASE("adam") {
    VectorXd p = VectorXd::Constant(3, 1.0);
    AdamState st;
    adam_step(p, VectorXd::Zero(3), st, 0.1);
    CHECK(p == VectorXd::Constant(3, 1.0));
    CHECK(st.m.isZero());

    p = VectorXd::Zero(3);
    st = {};
    const VectorXd g = (VectorXd(3) << 2.0, -0.5, 1e-3).finished();
    adam_step(p, g, st, 0.01);
    for (Index i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(-0.01 * g[i] / (std::abs(g[i]) + 1e-8)));

    VectorXd a = VectorXd::Ones(3), b = VectorXd::Ones(3);
    AdamState sa, sb;
    for (int k = 0; k < 3; ++k) {
        adam_step(a, g, sa, 0.1);
        adam_step(b, g, sb, 0.1);
    }
    CHECK(a == b);

    VectorXd q = VectorXd::Ones(2);
    AdamState sq;
    adam_step(q, VectorXd::Ones(2), sq, (VectorXd(2) << 0.0, 0.1).finished());
    CHECK(q[0] == 1.0);
    CHECK(sq.m[0] == 0.0);
    CHECK(q[1] < 1.0);
}

TEST_CASE("training") {
    // Head-only logistic regression on separable features.
    NodeTask task;
    task.graph = Graph(8, {});
    task.features = MatrixXd(8, 2);
    for (Index i = 0; i < 8; ++i) {
        task.features(i, 0) = i < 4 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
        task.features(i, 1) = 0.3 * std::sin(static_cast<double>(i));
        task.labels.push_back(i < 4 ? 0 : 1);
    }
    task.train = range(8);
    ModelSpec spec;
    spec.in_dim = 2;
    Model m = make_model(spec, 3);
    TrainConfig cfg;
    cfg.lr = 0.05;
    const History h = train(m, task, cfg);
    CHECK(h.train_accuracy.back() == 1.0);
    for (double l : h.loss) CHECK(std::isfinite(l));

    Model again = make_model(spec, 3);
    train(again, task, cfg);
    CHECK(pack(again) == pack(m));

    Model untouched = make_model(spec, 3);
    cfg.epochs = 0;
    train(untouched, task, cfg);
    CHECK(pack(untouched) == pack(make_model(spec, 3)));
}

TEST_CASE("graph classification on cliques with opposite features") {
    GraphDataset data;
    data.num_classes = 2;
    for (int k = 0; k < 16; ++k) {
        const Index size = 3 + k % 3;
        std::vector<Edge> e;
        for (Index i = 0; i < size; ++i) {
            for (Index j = i + 1; j < size; ++j) e.emplace_back(i, j);
        }
        const int label = k % 2;
        data.graphs.push_back({Graph(size, e), MatrixXd::Constant(size, 2, label ? 1.0 : -1.0), label});
        (k < 10 ? data.train : data.test).push_back(k);
    }
    ModelSpec spec;
    spec.in_dim = 2;
    spec.hidden = {4};
    spec.readout = Readout::mean;
    Model m = make_model(spec, 1);
    TrainConfig cfg;
    cfg.lr = 0.05;
    train(m, data, cfg);
    int hits = 0;
    for (Index i : data.test) {
        const auto p = forward(m, data.graphs[i].graph, data.graphs[i].features).probabilities;
        hits += argmax_rows(p)[0] == data.graphs[i].label ? 1 : 0;
    }
    CHECK(hits == static_cast<int>(data.test.size()));
}

TEST_CASE("readout is permutation invariant") {
    for (auto readout : {Readout::sum, Readout::mean}) {
        for (auto kind : {LayerKind::gcn, LayerKind::gin, LayerKind::cgnn}) {
            const auto f = oracle::grad_fixture(kind, 31, readout);
            const Index n = f.graph.num_nodes();
            std::vector<Index> perm = range(n);
            std::reverse(perm.begin(), perm.end());
            std::rotate(perm.begin(), perm.begin() + 2, perm.end());
            std::vector<Edge> e;
            for (const auto& [u, v] : f.graph.edges()) e.emplace_back(perm[u], perm[v]);
            MatrixXd xp(n, f.features.cols());
            for (Index i = 0; i < n; ++i) xp.row(perm[i]) = f.features.row(i);
            const MatrixXd a = forward(f.model, f.graph, f.features).embedding;
            const MatrixXd b = forward(f.model, Graph(n, e), xp).embedding;
            CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("checkpoint round trip") {
    for (auto kind : {LayerKind::gcn, LayerKind::gin, LayerKind::cgnn}) {
        auto f = oracle::grad_fixture(kind, 2, Readout::mean);
        f.model.orthonormal = BjorckConfig{2, 7, true};
        const auto path = oracle::temp_dir("ckpt") / "model.txt";
        save_model(f.model, path);
        const Model back = load_model(path);
        CHECK(pack(back) == pack(f.model));
        CHECK(back.readout == Readout::mean);
        CHECK(back.orthonormal.has_value());
        CHECK(back.orthonormal->iterations == 7);
        CHECK(forward(back, f.graph, f.features).logits == forward(f.model, f.graph, f.features).logits);
    }
}

// ---------------------------------------------------------------------------
// admp

namespace {

struct AdmpFixture {
    AdmpModel model;
    NodeTask task;
};

AdmpFixture admp_fixture(std::uint64_t seed, std::vector<Index> hidden = {8, 8}) {
    AdmpFixture f;
    f.task = two_clique_task(6, 4, 0.8, seed);
    ModelSpec spec;
    spec.in_dim = 4;
    spec.hidden = std::move(hidden);
    f.model = make_admp_model(spec, seed);
    return f;
}

}  // namespace

TEST_CASE("admp forward matches truncated models") {
    const auto f = admp_fixture(1);
    const auto preds = admp_forward(f.model, f.task.graph, f.task.features);
    REQUIRE(preds.size() == 3);
    for (int l = 0; l <= 2; ++l) {
        CHECK(preds[l] == forward(f.model.truncated(l), f.task.graph, f.task.features).probabilities);
    }

    const auto flat = admp_fixture(1, {});
    const auto p0 = admp_forward(flat.model, flat.task.graph, flat.task.features);
    REQUIRE(p0.size() == 1);
    const auto& head = flat.model.exit_heads[0];
    CHECK((p0[0] - softmax_rows((flat.task.features * head.weight).rowwise() + head.bias)).cwiseAbs().maxCoeff() <=
          1e-15);

    AdmpModel zero = f.model;
    for (auto& h : zero.exit_heads) {
        h.weight.setZero();
        h.bias.setZero();
    }
    for (const auto& p : admp_forward(zero, f.task.graph, MatrixXd::Zero(f.task.features.rows(), 4))) {
        CHECK((p.array() - 0.5).abs().maxCoeff() == 0.0);
    }
}

TEST_CASE("admp aggregate gradient") {
    const auto f = admp_fixture(4);
    const PreparedGraph pg(f.task.graph);
    const auto loss = [&](const std::vector<double>& w) {
        return admp_loss_and_grad(f.model, pg, f.task.features, f.task.labels, f.task.train, w);
    };
    const AdmpLossGrad all = loss({1, 1, 1});
    VectorXd sum = VectorXd::Zero(all.grad.size());
    for (int l = 0; l < 3; ++l) {
        std::vector<double> w(3, 0.0);
        w[l] = 1.0;
        sum += loss(w).grad;
    }
    CHECK((sum - all.grad).cwiseAbs().maxCoeff() <= 1e-12);
    AdmpModel probe = f.model;
    const auto fn = [&](const VectorXd& p) {
        admp_unpack(probe, p);
        return admp_loss_and_grad(probe, pg, f.task.features, f.task.labels, f.task.train, {1, 1, 1}).loss;
    };
    CHECK(oracle::max_fd_error(fn, admp_pack(f.model), all.grad) <= 1e-5);
}

TEST_CASE("alm training") {
    auto f = admp_fixture(2);
    TrainConfig cfg;
    cfg.epochs = 100;
    const History h = train_alm(f.model, f.task, cfg);
    int down = 0;
    for (std::size_t i = 1; i < h.loss.size(); ++i) down += h.loss[i] <= h.loss[i - 1] ? 1 : 0;
    CHECK(down >= 0.9 * static_cast<double>(h.loss.size() - 1));

    // With no message-passing layers ALM is plain head training.
    auto flat = admp_fixture(2, {});
    Model plain = flat.model.truncated(0);
    train_alm(flat.model, flat.task, cfg);
    train(plain, flat.task, cfg);
    CHECK((pack(plain) - pack(flat.model.truncated(0))).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("sequential training freezes earlier stages") {
    auto f = admp_fixture(3);
    const auto layout = admp_layout(f.model);
    std::vector<VectorXd> snapshots;
    TrainConfig cfg;
    cfg.epochs = 30;
    train_st(f.model, f.task, cfg, [&](int, const AdmpModel& m) { snapshots.push_back(admp_pack(m)); });
    REQUIRE(snapshots.size() == 3);
    for (int t = 0; t < 3; ++t) {
        for (const auto& s : layout) {
            if (s.depth > t) continue;
            for (int later = t + 1; later < 3; ++later) {
                CHECK(snapshots[later].segment(s.slot.offset, s.slot.size) ==
                      snapshots[t].segment(s.slot.offset, s.slot.size));
            }
        }
    }
    // Stage 0 of a one-layer model equals ALM on the zero-layer model.
    auto one = admp_fixture(5, {6});
    VectorXd stage0;
    train_st(one.model, one.task, cfg, [&](int t, const AdmpModel& m) {
        if (t == 0) stage0 = pack(m.truncated(0));
    });
    auto flat = admp_fixture(5, {});
    train_alm(flat.model, flat.task, cfg);
    CHECK(stage0 == pack(flat.model.truncated(0)));
}

TEST_CASE("oracle accuracy") {
    const Labels y{0, 1, 2};
    const std::vector<MatrixXd> all{one_hot_rows({0, 0, 0}, 3), one_hot_rows({1, 1, 1}, 3), one_hot_rows({2, 2, 2}, 3)};
    CHECK(oracle_accuracy(all, y, {0, 1, 2}) == 1.0);
    const std::vector<MatrixXd> wrong(3, one_hot_rows({1, 2, 0}, 3));
    CHECK(oracle_accuracy(wrong, y, {0, 1, 2}) == 0.0);
    const std::vector<MatrixXd> once{one_hot_rows({1, 0, 0}, 3), one_hot_rows({1, 0, 0}, 3), one_hot_rows({0, 0, 0}, 3)};
    CHECK(oracle_accuracy(once, y, {0}) == 1.0);

    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        std::vector<MatrixXd> preds;
        for (int l = 0; l < 3; ++l) preds.push_back(softmax_rows(MatrixXd::NullaryExpr(15, 3, [&] { return rng.normal(); })));
        Labels labels(15);
        for (auto& v : labels) v = static_cast<int>(rng.below(3));
        const double oracle = oracle_accuracy(preds, labels, range(15));
        for (double a : exit_accuracies(preds, labels, range(15))) CHECK(oracle >= a);
    }
}

TEST_CASE("exit policy") {
    const Labels y{0, 0, 0, 0};
    CentralityVector c;
    c.values = (VectorXd(4) << 1, 2, 3, 4).finished();
    // Layer 2 is uniquely right on the high-centrality half.
    const std::vector<MatrixXd> preds{one_hot_rows({0, 0, 1, 1}, 2), one_hot_rows({0, 1, 1, 1}, 2),
                                      one_hot_rows({1, 1, 0, 0}, 2)};
    const ExitPolicy two = learn_exit_policy(preds, y, {0, 1, 2, 3}, c, 2);
    CHECK(two.bucket_layer == std::vector<int>{0, 2});
    const ExitPolicy one = learn_exit_policy(preds, y, {0, 1, 2, 3}, c, 1);
    CHECK(one.bucket_layer == std::vector<int>{0});

    const std::vector<MatrixXd> tie{one_hot_rows({1, 1, 1, 1}, 2), one_hot_rows({0, 0, 1, 1}, 2),
                                    one_hot_rows({1, 1, 1, 1}, 2), one_hot_rows({0, 0, 1, 1}, 2)};
    CHECK(learn_exit_policy(tie, y, {0, 1, 2, 3}, c, 1).bucket_layer == std::vector<int>{1});

    const PolicyResult routed = apply_exit_policy(two, preds, c.values, y, {0, 1, 2, 3});
    CHECK(routed.layer == std::vector<int>{0, 0, 2, 2});
    CHECK(routed.accuracy == 1.0);
    CHECK(routed.accuracy <= oracle_accuracy(preds, y, {0, 1, 2, 3}));
    CHECK(apply_exit_policy(two, preds, c.values, y, {3}).layer[3] == 2);

    ExitPolicy fixed = two;
    fixed.bucket_layer = {1, 1};
    CHECK(apply_exit_policy(fixed, preds, c.values, y, {0, 1, 2, 3}).accuracy ==
          accuracy(preds[1], y, {0, 1, 2, 3}));

    CentralityVector flat;
    flat.values = VectorXd::Constant(4, 2.0);
    const ExitPolicy p = learn_exit_policy(preds, y, {0, 1, 2, 3}, flat, 2);
    const PolicyResult r = apply_exit_policy(p, preds, flat.values, y, {0, 1, 2, 3});
    CHECK(std::all_of(r.layer.begin(), r.layer.end(), [&](int l) { return l == r.layer[0]; }));
    CHECK(p.bucket_of(-100.0) == 0);
    CHECK(p.bucket_of(1e9) == static_cast<int>(p.bucket_layer.size()) - 1);
}

// ---------------------------------------------------------------------------
// robustness

TEST_CASE("bjorck orthonormalization") {
    const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(MatrixXd::Random(6, 3)).householderQ() * MatrixXd::Identity(6, 3);
    CHECK((bjorck_orthonormalize(q, BjorckConfig{1, 10, false}) - q).cwiseAbs().maxCoeff() <= 1e-12);

    const MatrixXd half = MatrixXd::Constant(1, 1, 0.5);
    CHECK(bjorck_orthonormalize(half, BjorckConfig{1, 1, false})(0, 0) == doctest::Approx(0.6875));
    CHECK(std::abs(bjorck_orthonormalize(half, BjorckConfig{1, 20, false})(0, 0) - 1.0) <= 1e-6);

    for (int t = 0; t < 10; ++t) {
        const MatrixXd w = MatrixXd::Random(8, 4);
        std::vector<double> res;
        const MatrixXd out = bjorck_orthonormalize(w, BjorckConfig{1, 30, true}, &res);
        CHECK((out.transpose() * out - MatrixXd::Identity(4, 4)).norm() <= 1e-3);
        for (std::size_t k = 1; k < res.size(); ++k) CHECK(res[k] <= res[k - 1] + 1e-12);
        const MatrixXd wide = bjorck_orthonormalize(MatrixXd(w.transpose()), BjorckConfig{2, 30, true});
        CHECK((wide * wide.transpose() - MatrixXd::Identity(4, 4)).norm() <= 1e-3);
    }
    CHECK_THROWS_AS(bjorck_orthonormalize(MatrixXd::Constant(1, 1, 3.0), BjorckConfig{1, 5, false}), ConvergenceError);
    CHECK(bjorck_coefficient(2) == 0.375);
}

TEST_CASE("normalized walk sums") {
    const Graph g = oracle::random_graph(7, 0.4, 2);
    CHECK(normalized_walk_sums(g, 1).per_node == VectorXd::Ones(7));
    CHECK(normalized_walk_sums(Graph(1, {}), 4).per_node == VectorXd::Ones(1));
    const WalkSums e = normalized_walk_sums(Graph(2, {{0, 1}}), 2);
    CHECK(e.per_node[0] == doctest::Approx(1.0));
    CHECK(e.per_node[1] == doctest::Approx(1.0));
    CHECK(e.max == doctest::Approx(1.0));
    CHECK(e.total == doctest::Approx(2.0));
}

TEST_CASE("robustness bounds") {
    const MatrixXd w = (MatrixXd(2, 2) << 1, -2, 3, 0.5).finished();
    CHECK(norm_1(w) == 4.0);
    CHECK(norm_inf(w) == 3.5);

    Model m;
    m.layers.push_back(identity_layer(LayerKind::gcn, 2, Activation::relu));
    m.head = identity_linear(2);
    RobustnessConfig cfg;
    cfg.eps = 0.3;
    cfg.sigma = 0.2;
    const MatrixXd x = MatrixXd::Ones(1, 2);
    CHECK(robustness_bound(m, Graph(1, {}), x, cfg, BoundKind::gcn_feat_dinf) == doctest::Approx(1.5));

    const auto f = oracle::grad_fixture(LayerKind::gcn, 9);
    for (auto kind : {BoundKind::gcn_feat_d1, BoundKind::gcn_feat_dinf, BoundKind::gcn_struct}) {
        double prev = 0.0;
        for (double eps : {0.05, 0.1, 0.2, 0.4}) {
            cfg.eps = eps;
            cfg.sigma = 0.1;
            const double g = robustness_bound(f.model, f.graph, f.features, cfg, kind);
            CHECK(g > prev);
            prev = g;
            if (kind != BoundKind::gcn_struct) {
                cfg.eps = 2 * eps;
                CHECK(robustness_bound(f.model, f.graph, f.features, cfg, kind) == doctest::Approx(2 * g));
            }
        }
        cfg.eps = 0.1;
        prev = std::numeric_limits<double>::infinity();
        for (double sigma : {0.05, 0.1, 0.2, 0.4}) {
            cfg.sigma = sigma;
            const double g = robustness_bound(f.model, f.graph, f.features, cfg, kind);
            CHECK(g < prev);
            prev = g;
        }
    }
    CHECK_THROWS(robustness_bound(f.model, f.graph, f.features, cfg, BoundKind::gin_feat));
    const auto gin = oracle::grad_fixture(LayerKind::gin, 9);
    CHECK(robustness_bound(gin.model, gin.graph, gin.features, cfg, BoundKind::gin_feat) > 0.0);
    cfg.eps = -1;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("perturbation sampler constraints") {
    Rng rng(3);
    for (double p : {1.0, 2.0, 3.5, std::numeric_limits<double>::infinity()}) {
        for (int t = 0; t < 200; ++t) {
            const Perturbation s = sample_perturbation(5, 4, 0.7, p, rng);
            VectorXd norms(5);
            for (Index i = 0; i < 5; ++i) {
                norms[i] = std::isinf(p) ? s.z.row(i).cwiseAbs().maxCoeff()
                                         : std::pow(s.z.row(i).cwiseAbs().array().pow(p).sum(), 1.0 / p);
            }
            CHECK(norms.maxCoeff() <= 0.7);
            CHECK(s.radius <= 0.7);
            CHECK(std::abs(norms[s.anchor_row] - s.radius) <= 1e-12);
            CHECK(norms.maxCoeff() <= s.radius + 1e-12);
        }
    }
    const MatrixXd x = MatrixXd::Ones(3, 2);
    CHECK(sample_feature_perturbation(x, 1e-300, 2.0, 1) == x);
    CHECK(sample_feature_perturbation(x, 0.5, 2.0, 1) == sample_feature_perturbation(x, 0.5, 2.0, 1));

    // Radius distribution: Kolmogorov-Smirnov against (r / eps)^K.
    const int count = 20000;
    std::vector<double> r(count);
    for (auto& v : r) v = sample_perturbation(2, 4, 1.0, 2.0, rng).radius;
    std::sort(r.begin(), r.end());
    double ks = 0.0;
    for (int i = 0; i < count; ++i) {
        const double cdf = std::pow(r[i], 4.0);
        ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / count), std::abs(cdf - static_cast<double>(i + 1) / count)});
    }
    CHECK(ks < 0.015);
}

TEST_CASE("random and gradient attacks") {
    const MatrixXd x = MatrixXd::Random(10, 3);
    CHECK(attack_random(x, 0.0, 1) == x);
    CHECK(attack_random(x, 0.5, 4) == attack_random(x, 0.5, 4));
    double total = 0.0;
    for (std::uint64_t s = 0; s < 1000; ++s) total += (attack_random(x, 0.5, s) - x).squaredNorm();
    CHECK(std::abs(total / 1000 / (0.25 * 30) - 1.0) < 0.05);

    for (std::uint64_t s = 0; s < 3; ++s) {
        NodeTask task = two_clique_task(5, 3, 0.5, s);
        ModelSpec spec;
        spec.in_dim = 3;
        spec.hidden = {6};
        Model m = make_model(spec, s);
        TrainConfig cfg;
        cfg.epochs = 80;
        train(m, task, cfg);
        const auto rows = range(task.graph.num_nodes());
        CHECK(attack_pgd_features(m, task.graph, task.features, task.labels, 0.5, 0) == task.features);
        const MatrixXd adv = attack_pgd_features(m, task.graph, task.features, task.labels, 0.5);
        CHECK((adv - task.features).rowwise().norm().maxCoeff() <= 0.5 + 1e-12);
        const double clean = accuracy(forward(m, task.graph, task.features).logits, task.labels, rows);
        const double attacked = accuracy(forward(m, task.graph, adv).logits, task.labels, rows);
        CHECK(attacked <= clean);
        const double l0 = cross_entropy(forward(m, task.graph, task.features).probabilities, task.labels);
        const double l1 = cross_entropy(forward(m, task.graph, adv).probabilities, task.labels);
        CHECK(l1 >= l0);
    }
}

TEST_CASE("feature gradient matches finite differences") {
    const auto f = oracle::grad_fixture(LayerKind::gcn, 12);
    const PreparedGraph pg = prepare(f.graph, f.model);
    const auto rows = range(f.graph.num_nodes());
    const MatrixXd g = feature_gradient(f.model, pg, f.features, f.labels, rows);
    const auto fn = [&](const VectorXd& flat) {
        const MatrixXd xx = Eigen::Map<const MatrixXd>(flat.data(), f.features.rows(), f.features.cols());
        return cross_entropy(forward(f.model, pg, xx).probabilities, f.labels);
    };
    CHECK(oracle::max_fd_error(fn, Eigen::Map<const VectorXd>(f.features.data(), f.features.size()),
                               Eigen::Map<const VectorXd>(g.data(), g.size())) <= 1e-5);
}

TEST_CASE("expected vulnerability estimator") {
    const auto f = oracle::grad_fixture(LayerKind::gcn, 21);
    RobustnessConfig cfg;
    cfg.samples = 50;
    cfg.eps = 0.5;
    cfg.sigma = 1e-4;
    const std::vector<RobustnessInput> inputs{{f.graph, f.features}};

    Model constant = f.model;
    for (auto& l : constant.layers) l.lin.weight.setZero();
    constant.head.weight.setZero();
    CHECK(estimate_expected_vulnerability(constant, inputs, cfg).adv == 0.0);

    const RobustnessReport a = estimate_expected_vulnerability(f.model, inputs, cfg);
    CHECK(a.adv > 0.0);
    CHECK(to_json(a) == to_json(estimate_expected_vulnerability(f.model, inputs, cfg)));
    const auto j = nlohmann::json::parse(to_json(a));
    for (const char* key : {"adv", "gamma", "eps", "sigma", "p", "L_max", "seed", "n_inputs"}) CHECK(j.contains(key));

    cfg.sigma = 1.0;
    cfg.eps = 50.0;
    CHECK(estimate_expected_vulnerability(f.model, inputs, cfg).adv == 0.0);

    MatrixXd p1 = one_hot_rows({0, 1, 0}, 2), p2 = one_hot_rows({1, 0, 1}, 2);
    CHECK(output_distance(p1, p1) == 0.0);
    CHECK(output_distance(p1, p2) <= 1.0);
}

TEST_CASE("gcorn training") {
    const NodeTask task = two_clique_task(6, 4, 1.0, 7);
    ModelSpec spec;
    spec.in_dim = 4;
    spec.hidden = {8};
    TrainConfig cfg;
    cfg.epochs = 40;
    Model plain = make_model(spec, 2), off = make_model(spec, 2);
    train(plain, task, cfg);
    train_gcorn(off, task, cfg, BjorckConfig{1, 0, false});
    CHECK(pack(off) == pack(plain));

    Model ortho = make_model(spec, 2);
    train_gcorn(ortho, task, cfg, BjorckConfig{});
    for (const auto& layer : ortho.layers) {
        const MatrixXd w = effective_weight(layer.lin.weight, ortho.orthonormal);
        const MatrixXd gram = w.rows() >= w.cols() ? MatrixXd(w.transpose() * w) : MatrixXd(w * w.transpose());
        CHECK((gram - MatrixXd::Identity(gram.rows(), gram.cols())).norm() <= 1e-2);
    }
}
