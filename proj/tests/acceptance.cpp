// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "cgl/admp.hpp"
#include "cgl/bjorck.hpp"
#include "cgl/centrality.hpp"
#include "cgl/crf.hpp"
#include "cgl/experiment.hpp"
#include "cgl/fixtures.hpp"
#include "cgl/generators.hpp"
#include "cgl/gmm.hpp"
#include "cgl/gso.hpp"
#include "cgl/robustness.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

using namespace cgl;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    const char* name;
    std::function<Outcome()> check;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Allowed rise in a monotone sequence that has already converged to machine precision.
constexpr double kRoundoff = 1e-12;

const CentralityKind kAllKinds[] = {CentralityKind::degree, CentralityKind::kcore, CentralityKind::pagerank,
                                    CentralityKind::walk};

json run_config(const std::string& file, const std::vector<std::string>& overrides) {
    Config c = Config::load(std::filesystem::path(CGL_CONFIG_DIR) / file);
    for (const auto& o : overrides) c.apply_override(o);
    return json::parse(run_experiment(c));
}

std::vector<Index> all_rows(Index n) {
    std::vector<Index> r(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) r[i] = i;
    return r;
}

Outcome markov_moments() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Index n = 2 + static_cast<Index>(rng.below(49));
        const Graph g = oracle::random_graph(n, rng.uniform(0.05, 0.5), rng.next());
        for (auto kind : kAllKinds) {
            const MarkovStats s = markov_spectrum_stats(g, centrality_matrix(g, kind).values);
            worst = std::max({worst, std::abs(s.mu - s.mu_eig), std::abs(s.sigma - s.sigma_eig)});
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-8 && secs < 30, fmt("max gap %.2e, %.1f s", worst, secs)};
}

Outcome ba_degree() {
    struct P {
        Index n, n0, r0, r;
    };
    const P grid[] = {{100, 5, 3, 2},  {50, 3, 0, 1},   {200, 10, 20, 4}, {80, 6, 15, 3},  {300, 20, 50, 5},
                      {40, 4, 6, 4},   {120, 8, 10, 2}, {60, 5, 10, 5},   {500, 12, 30, 6}, {30, 10, 45, 8}};
    Outcome out;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const P& p = grid[s];
        const Graph g = gen_ba(p.n, p.n0, p.r0, p.r, s);
        const double n = static_cast<double>(p.n);
        const double formula = 2.0 * p.r + 2.0 * p.r0 / n - 2.0 * p.n0 * p.r / n;
        const double avg = g.degrees().mean();
        worst = std::max(worst, std::abs(avg - formula) / formula);
        if (g.num_edges() != p.r0 + p.r * (p.n - p.n0)) out.pass = false;
        if (std::abs(avg - formula) > 1e-12 * formula) out.pass = false;
        if (ba_average_degree(p.n, p.n0, p.r0, p.r) != formula) out.pass = false;
    }
    out.detail = fmt("max relative gap %.1e over 10 grid points", worst);
    return out;
}

Outcome sbbam_ordering() {
    const auto t0 = std::chrono::steady_clock::now();
    const json r = run_config("cluster_sbbam.ini", {})["results"];
    const double secs = seconds_since(t0);
    const double k = r["kcore"]["ami_mean"], d = r["degree"]["ami_mean"];
    const bool seeds_ok = r["kcore"]["ami"].size() == 50 && r["degree"]["ami"].size() == 50;
    return {seeds_ok && k >= d + 0.03 && k >= 0.25 && secs < 300,
            fmt("kcore %.4f, degree %.4f, %.0f s", k, d, secs)};
}

Outcome gradient_suite() {
    double worst = 0.0;
    for (auto kind : {LayerKind::gcn, LayerKind::gin, LayerKind::cgnn}) {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto f = oracle::grad_fixture(kind, 1000 + 31 * s + static_cast<std::uint64_t>(kind));
            worst = std::max(worst, oracle::model_fd_error(f.model, f.graph, f.features, f.labels));
        }
    }
    return {worst <= 1e-5, fmt("max relative error %.2e", worst)};
}

Outcome bjorck_convergence() {
    Rng rng(5);
    Outcome out;
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const Index cols = 2 + static_cast<Index>(rng.below(5));
        const MatrixXd w = MatrixXd::NullaryExpr(2 * cols, cols, [&] { return rng.normal(); });
        std::vector<double> res;
        const MatrixXd q = bjorck_orthonormalize(w, BjorckConfig{1, 30, true}, &res);
        const double r = (q.transpose() * q - MatrixXd::Identity(cols, cols)).norm();
        worst = std::max(worst, r);
        if (r > 1e-3) out.pass = false;
        for (std::size_t k = 1; k < res.size(); ++k) {
            if (res[k] > res[k - 1] + kRoundoff) out.pass = false;
        }
    }
    out.detail = fmt("max residual %.2e", worst);
    return out;
}

Outcome sampler_ks() {
    Outcome out;
    const int count = 100000;
    const double eps = 0.7, p = 2.0;
    std::string detail;
    for (Index k : {1, 4, 16}) {
        Rng rng(7 + static_cast<std::uint64_t>(k));
        std::vector<double> r(count);
        for (auto& v : r) {
            const Perturbation s = sample_perturbation(3, k, eps, p, rng);
            v = s.radius;
            const double top = s.z.rowwise().norm().maxCoeff();
            if (s.radius > eps || top > eps) out.pass = false;
        }
        std::sort(r.begin(), r.end());
        double ks = 0.0;
        for (int i = 0; i < count; ++i) {
            const double cdf = std::pow(r[i] / eps, static_cast<double>(k));
            ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / count),
                           std::abs(cdf - static_cast<double>(i + 1) / count)});
        }
        if (ks >= 0.01) out.pass = false;
        detail += fmt("K=%.0f KS %.4f ", static_cast<double>(k), ks);
    }
    out.detail = detail;
    return out;
}

Outcome estimator_bound() {
    Outcome out;
    double margin = std::numeric_limits<double>::infinity();
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto f = oracle::grad_fixture(LayerKind::gcn, 500 + s);
        RobustnessConfig cfg;
        cfg.samples = 200;
        cfg.p = std::numeric_limits<double>::infinity();
        cfg.eps = 0.1;
        cfg.sigma = 0.1;
        cfg.seed = s;
        const RobustnessReport r = estimate_expected_vulnerability(f.model, {{f.graph, f.features}}, cfg);
        const double slack = r.gamma + 3 * r.standard_error - r.adv;
        margin = std::min(margin, slack);
        if (!(slack >= 0)) out.pass = false;
    }
    out.detail = fmt("min slack gamma + 3 se - adv = %.3e", margin);
    return out;
}

Outcome gcorn_effect() {
    int attacked_ok = 0;
    bool strict = true;
    for (int s = 1; s <= 10; ++s) {
        const json r = run_config("gcorn_two_cliques.ini", {"run.seed=" + std::to_string(s)})["results"];
        const json &twin = r["twin"], &gc = r["gcorn"];
        if (!(gc["norm_product"].get<double>() < twin["norm_product"].get<double>())) strict = false;
        if (!(gc["gamma"].get<double>() < twin["gamma"].get<double>())) strict = false;
        if (gc["attacked_accuracy"].get<double>() >= twin["attacked_accuracy"].get<double>()) ++attacked_ok;
    }
    return {strict && attacked_ok >= 8,
            std::string("norms and gamma strictly smaller: ") + (strict ? "all seeds" : "not all seeds") +
                ", attacked accuracy >= twin in " + std::to_string(attacked_ok) + "/10"};
}

Outcome crf_degeneracies() {
    Outcome out;
    double worst_mean = 0.0, worst_simplex = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const NodeTask task = two_clique_task(5, 3, 0.5, s);
        ModelSpec spec;
        spec.in_dim = 3;
        spec.hidden = {6};
        Model m = make_model(spec, s);
        TrainConfig tc;
        tc.epochs = 50;
        train(m, task, tc);
        const Predictor gcn = [&](const Graph& g, const MatrixXd& x) { return forward(m, g, x).probabilities; };
        const MatrixXd base = gcn(task.graph, task.features);
        for (auto space : {CrfSpace::feature, CrfSpace::structure}) {
            CrfConfig cfg;
            cfg.space = space;
            cfg.seed = s;
            cfg.sigma = 1.0;
            if (!(crf_smooth(gcn, task.graph, task.features, cfg) == base)) out.pass = false;

            std::vector<MatrixXd> calls;
            const Predictor recorder = [&](const Graph& g, const MatrixXd& x) {
                calls.push_back(gcn(g, x));
                return calls.back();
            };
            cfg.sigma = 0.0;
            cfg.iterations = 1;
            cfg.neighbors = 4;
            cfg.similarity = CrfSimilarity::uniform;
            const MatrixXd y = crf_smooth(recorder, task.graph, task.features, cfg);
            MatrixXd mean = MatrixXd::Zero(base.rows(), base.cols());
            for (std::size_t k = 1; k < calls.size(); ++k) mean += calls[k] / static_cast<double>(calls.size() - 1);
            worst_mean = std::max(worst_mean, (y - mean).cwiseAbs().maxCoeff());

            for (double sigma : {0.2, 0.7}) {
                cfg.sigma = sigma;
                cfg.iterations = 2;
                cfg.neighbors = 3;
                cfg.similarity = space == CrfSpace::feature ? CrfSimilarity::cosine : CrfSimilarity::binomial_prior;
                const MatrixXd z = crf_smooth(gcn, task.graph, task.features, cfg);
                worst_simplex = std::max(worst_simplex, (z.rowwise().sum().array() - 1.0).abs().maxCoeff());
                if ((z.array() < 0).any()) out.pass = false;
            }
        }
    }
    if (worst_mean > 1e-12 || worst_simplex > 1e-12) out.pass = false;
    out.detail = fmt("neighbor-mean gap %.1e, simplex gap %.1e", worst_mean, worst_simplex);
    return out;
}

Outcome neighborhood_bound() {
    Outcome out;
    int cases = 0;
    for (Index n = 1; n <= 6; ++n) {
        const Index slots = n * (n + 1) / 2;
        for (Index r = 1; r < slots; ++r) {
            std::uint64_t exhaustive = 0;
            for (Index d = 0; d <= r; ++d) exhaustive += static_cast<std::uint64_t>(oracle::binomial(static_cast<int>(slots), static_cast<int>(d)));
            if (neighborhood_count(n, r) != exhaustive) out.pass = false;
            if (!(neighborhood_lower_bound(n, r) <= static_cast<double>(exhaustive))) out.pass = false;
            ++cases;
        }
    }
    out.detail = std::to_string(cases) + " (n, r) pairs";
    return out;
}

Outcome em_fits() {
    Outcome out;
    double worst_drop = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng r(s);
        const int dim = 1 + static_cast<int>(s % 3);
        const MatrixXd cloud =
            MatrixXd::NullaryExpr(300, dim, [&] { return r.normal() + (r.bernoulli(0.3) ? 4.0 : 0.0); });
        GmmOptions opt;
        opt.tol = 0.0;
        opt.max_iter = 60;
        const GmmFit f = fit_gmm(cloud, 1 + static_cast<int>(s % 4), s, opt);
        for (std::size_t k = 1; k < f.log_likelihood.size(); ++k) {
            worst_drop = std::max(worst_drop, f.log_likelihood[k - 1] - f.log_likelihood[k]);
        }
    }
    Rng rng(4);
    MatrixXd pts(2000, 1);
    for (Index i = 0; i < 2000; ++i) pts(i, 0) = (i % 2 ? 5.0 : -5.0) + rng.normal();
    const GmmFit two = fit_gmm(pts, 2, 7);
    for (std::size_t k = 1; k < two.log_likelihood.size(); ++k) {
        worst_drop = std::max(worst_drop, two.log_likelihood[k - 1] - two.log_likelihood[k]);
    }
    VectorXd mu = two.gmm.means.col(0);
    std::sort(mu.data(), mu.data() + 2);
    const double err = std::max(std::abs(mu[0] + 5.0), std::abs(mu[1] - 5.0));
    out.pass = worst_drop <= kRoundoff && err <= 0.2;
    out.detail = fmt("largest log-likelihood drop %.1e, mean error %.3f", worst_drop, err);
    return out;
}

Outcome influence_oracle() {
    double worst = 0.0, quad = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        worst = std::max(worst, oracle::influence_fixture(s).max_relative_gap);
        quad = std::max(quad, oracle::quadratic_influence_gap(s));
    }
    return {worst <= 0.1 && quad <= 1e-8, fmt("retraining gap %.2e, quadratic gap %.1e", worst, quad)};
}

Outcome admp_contracts() {
    Outcome out;
    std::string detail;
    for (std::uint64_t s = 0; s < 5; ++s) {
        NodeTask task = two_clique_task(6, 4, 0.8, s);
        ModelSpec spec;
        spec.in_dim = 4;
        spec.hidden = {8, 8};
        TrainConfig cfg;
        cfg.epochs = 40;

        AdmpModel alm = make_admp_model(spec, s);
        train_alm(alm, task, cfg);
        const auto preds = admp_forward(alm, task.graph, task.features);
        for (int l = 0; l < static_cast<int>(preds.size()); ++l) {
            if (!(preds[l] == forward(alm.truncated(l), task.graph, task.features).probabilities)) out.pass = false;
        }
        const auto rows = all_rows(task.graph.num_nodes());
        const double oracle = oracle_accuracy(preds, task.labels, rows);
        for (double a : exit_accuracies(preds, task.labels, rows)) {
            if (!(oracle >= a)) out.pass = false;
        }

        AdmpModel st = make_admp_model(spec, s);
        const auto layout = admp_layout(st);
        std::vector<VectorXd> snaps;
        train_st(st, task, cfg, [&](int, const AdmpModel& m) { snaps.push_back(admp_pack(m)); });
        for (std::size_t t = 0; t < snaps.size(); ++t) {
            for (const auto& slot : layout) {
                if (slot.depth > static_cast<int>(t)) continue;
                for (std::size_t later = t + 1; later < snaps.size(); ++later) {
                    if (!(snaps[later].segment(slot.slot.offset, slot.slot.size) ==
                          snaps[t].segment(slot.slot.offset, slot.slot.size))) {
                        out.pass = false;
                    }
                }
            }
        }
    }
    for (const char* mode : {"alm", "st"}) {
        int differ = 0;
        for (int s = 1; s <= 10; ++s) {
            const json r = run_config("admp_two_block.ini", {"run.seed=" + std::to_string(s),
                                                             std::string("admp.mode=") + mode})["results"];
            if (r["sparse_best_exit"] != r["dense_best_exit"]) ++differ;
        }
        if (differ < 6) out.pass = false;
        detail += std::string(mode) + " exits differ in " + std::to_string(differ) + "/10 ";
    }
    out.detail = detail;
    return out;
}

Outcome brute_force() {
    Outcome out;
    int checks = 0;
    for (std::uint64_t s = 0; s < 40; ++s) {
        const Graph g = oracle::random_graph(4 + static_cast<Index>(s % 9), 0.35, s);
        if (kcore(g) != oracle::kcore(g)) out.pass = false;
        ++checks;
    }
    for (std::uint64_t s = 0; s < 30; ++s) {
        const Graph g = oracle::random_graph(2 + static_cast<Index>(s % 5), 0.5, 100 + s);
        for (int l = 1; l <= 4; ++l) {
            if (walk_count(g, l) != oracle::walks(g, l)) out.pass = false;
            ++checks;
        }
    }
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Graph g = oracle::random_connected_graph(3 + static_cast<Index>(s % 8), 0.3, 200 + s);
        if (cheeger(g, CheegerMode::classical) != oracle::cheeger_classical(g)) out.pass = false;
        if (cheeger(g, CheegerMode::centrality, g.degrees()) != oracle::cheeger_centrality(g, g.degrees())) out.pass = false;
        checks += 2;
    }
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Index n = 2 + static_cast<Index>(s % 5);
        const Graph a = oracle::random_graph(n, 0.5, 300 + s), b = oracle::random_graph(n, 0.5, 400 + s);
        if (permutation_distance(a, b, 1, 0) != oracle::permutation_distance(a, b, 1, 0)) out.pass = false;
        ++checks;
    }
    out.detail = std::to_string(checks) + " exact comparisons";
    return out;
}

}  // namespace

int main() {
    const Criterion criteria[] = {
        {"markov spectrum moments", markov_moments},
        {"barabasi-albert average degree", ba_degree},
        {"sbbam kcore vs degree clustering", sbbam_ordering},
        {"gradient suite", gradient_suite},
        {"bjorck convergence", bjorck_convergence},
        {"perturbation radius distribution", sampler_ks},
        {"estimator within robustness bound", estimator_bound},
        {"gcorn effect", gcorn_effect},
        {"crf degeneracies", crf_degeneracies},
        {"neighborhood size bound", neighborhood_bound},
        {"em monotonicity and recovery", em_fits},
        {"influence oracle", influence_oracle},
        {"admp contracts", admp_contracts},
        {"brute-force oracles", brute_force},
    };
    int failed = 0;
    int index = 0;
    for (const auto& c : criteria) {
        ++index;
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
