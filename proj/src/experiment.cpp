#include "cgl/experiment.hpp"

#include "cgl/admp.hpp"
#include "cgl/centrality.hpp"
#include "cgl/clustering.hpp"
#include "cgl/crf.hpp"
#include "cgl/error.hpp"
#include "cgl/fixtures.hpp"
#include "cgl/generators.hpp"
#include "cgl/gratin.hpp"
#include "cgl/robustness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>

namespace cgl {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T, class F>
T convert(const std::string& key, const std::string& text, F&& f) {
    try {
        std::size_t used = 0;
        T value = f(text, &used);
        if (trim(text.substr(used)).empty()) return value;
    } catch (const std::exception&) {
    }
    throw ConfigError(key, "cannot parse '" + text + "'");
}

long long to_int(const std::string& key, const std::string& text) {
    return convert<long long>(key, text, [](const std::string& s, std::size_t* u) { return std::stoll(s, u); });
}

double to_double(const std::string& key, const std::string& text) {
    if (text == "inf") return std::numeric_limits<double>::infinity();
    return convert<double>(key, text, [](const std::string& s, std::size_t* u) { return std::stod(s, u); });
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

Config Config::parse(const std::string& text) {
    Config cfg;
    std::stringstream ss(text);
    std::string line;
    std::string section;
    long lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno), "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
        cfg.set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config", "cannot read " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like section.key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::raw(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? fallback : it->second;
    resolved_[key] = v;
    return v;
}

std::string Config::get(const std::string& key, const std::string& fallback) const { return raw(key, fallback); }

std::string Config::require(const std::string& key) const {
    if (!has(key)) throw ConfigError(key, "required");
    return raw(key, "");
}

long long Config::get_int(const std::string& key, long long fallback) const {
    return to_int(key, raw(key, std::to_string(fallback)));
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
    const std::string text = raw(key, std::to_string(fallback));
    return convert<std::uint64_t>(key, text, [](const std::string& s, std::size_t* u) {
        if (!s.empty() && s.front() == '-') throw std::invalid_argument("negative");
        return static_cast<std::uint64_t>(std::stoull(s, u));
    });
}

double Config::get_double(const std::string& key, double fallback) const {
    std::ostringstream os;
    os.precision(17);
    os << fallback;
    return to_double(key, raw(key, std::isinf(fallback) ? "inf" : os.str()));
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const std::string v = raw(key, fallback ? "true" : "false");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<long long> Config::get_ints(const std::string& key, const std::vector<long long>& fallback) const {
    std::string def;
    for (std::size_t i = 0; i < fallback.size(); ++i) def += (i ? "," : "") + std::to_string(fallback[i]);
    std::vector<long long> out;
    for (const auto& item : split_list(raw(key, def))) out.push_back(to_int(key, item));
    return out;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    std::string def;
    for (std::size_t i = 0; i < fallback.size(); ++i) {
        std::ostringstream os;
        os.precision(17);
        os << fallback[i];
        def += (i ? "," : "") + os.str();
    }
    std::vector<double> out;
    for (const auto& item : split_list(raw(key, def))) out.push_back(to_double(key, item));
    return out;
}

std::vector<std::string> Config::get_strings(const std::string& key, const std::vector<std::string>& fallback) const {
    std::string def;
    for (std::size_t i = 0; i < fallback.size(); ++i) def += (i ? "," : "") + fallback[i];
    return split_list(raw(key, def));
}

std::filesystem::path Config::get_path(const std::string& key) const {
    const std::filesystem::path p = require(key);
    if (!std::filesystem::exists(p)) throw ConfigError(key, "file not found: " + p.string());
    return p;
}

void Config::check_consumed() const {
    for (const auto& [key, value] : values_) {
        if (!resolved_.count(key)) throw ConfigError(key, "unknown key");
    }
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(name, e.what());
    }
}

template <class T, class Parse>
T parse_field(const Config& c, const std::string& key, const std::string& fallback, Parse&& parse) {
    const std::string v = c.get(key, fallback);
    try {
        return parse(v);
    } catch (const std::exception& e) {
        throw ConfigError(key, e.what());
    }
}

double check_range(const std::string& key, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) {
        throw ConfigError(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return v;
}

long long check_min(const std::string& key, long long v, long long lo) {
    if (v < lo) throw ConfigError(key, "must be >= " + std::to_string(lo));
    return v;
}

std::vector<Index> to_index(const std::vector<long long>& v) { return {v.begin(), v.end()}; }

/// How to obtain the input graph for a seed.
struct GraphRecipe {
    std::string source;
    std::filesystem::path edges, features, labels;
    long long nodes = -1;
    std::vector<Index> sizes;
    double p_in = 0.0, p_out = 0.0;
    SbbamSpec sbbam;
    Index clique_size = 10;
    TwoBlockOptions two_block;
    Index feature_dim = 0;
    double feature_noise = 1.0;

    static GraphRecipe resolve(const Config& c) {
        GraphRecipe r;
        r.source = c.get("graph.source", "sbbam");
        if (r.source == "file") {
            r.edges = c.get_path("graph.edges");
            if (c.has("graph.features")) r.features = c.get_path("graph.features");
            if (c.has("graph.labels")) r.labels = c.get_path("graph.labels");
            r.nodes = c.get_int("graph.nodes", -1);
        } else if (r.source == "sbm") {
            r.sizes = to_index(c.get_ints("graph.sizes", {50, 50}));
            r.p_in = check_range("graph.p_in", c.get_double("graph.p_in", 0.3), 0, 1);
            r.p_out = check_range("graph.p_out", c.get_double("graph.p_out", 0.05), 0, 1);
        } else if (r.source == "sbbam") {
            const SbbamSpec ref = SbbamSpec::reference(0);
            r.sbbam.block_sizes = to_index(c.get_ints("graph.sizes", {ref.block_sizes.begin(), ref.block_sizes.end()}));
            r.sbbam.ba_r = to_index(c.get_ints("graph.r", {ref.ba_r.begin(), ref.ba_r.end()}));
            r.sbbam.ba_n0 = to_index(c.get_ints("graph.n0", {}));
            r.sbbam.ba_r0 = to_index(c.get_ints("graph.r0", {}));
            r.sbbam.p_off = check_range("graph.p_off", c.get_double("graph.p_off", ref.p_off), 0, 1);
            if (r.sbbam.ba_r.size() != r.sbbam.block_sizes.size()) throw ConfigError("graph.r", "one value per block");
        } else if (r.source == "two_cliques") {
            r.clique_size = check_min("graph.clique_size", c.get_int("graph.clique_size", 10), 2);
        } else if (r.source == "two_block") {
            r.two_block.block_size = check_min("graph.block_size", c.get_int("graph.block_size", 60), 4);
            r.two_block.sparse_noise = c.get_double("graph.sparse_noise", r.two_block.sparse_noise);
            r.two_block.dense_noise = c.get_double("graph.dense_noise", r.two_block.dense_noise);
        } else {
            throw ConfigError("graph.source", "unknown source '" + r.source + "'");
        }
        if (r.source != "file") {
            r.feature_dim = check_min("graph.feature_dim", c.get_int("graph.feature_dim", 4), 1);
            r.feature_noise = c.get_double("graph.feature_noise", 1.0);
        }
        return r;
    }

    Graph build(std::uint64_t seed) const {
        if (source == "file") {
            Graph g = load_edge_list(edges, nodes >= 0 ? std::optional<Index>(nodes) : std::nullopt);
            if (!features.empty()) g = g.with_features(load_features(features, g.num_nodes()));
            if (!labels.empty()) g = g.with_labels(load_labels(labels, g.num_nodes()));
            return g;
        }
        if (source == "sbm") {
            const Index k = static_cast<Index>(sizes.size());
            MatrixXd p = MatrixXd::Constant(k, k, p_out);
            p.diagonal().setConstant(p_in);
            return gen_sbm(sizes, p, seed);
        }
        if (source == "sbbam") {
            SbbamSpec s = sbbam;
            s.seed = seed;
            return gen_sbbam(s);
        }
        if (source == "two_cliques") return two_cliques(clique_size);
        return two_block_task(seed, two_block).task.graph;
    }

    NodeTask task(std::uint64_t seed) const {
        if (source == "two_cliques") return two_clique_task(clique_size, std::max<Index>(feature_dim, 2), feature_noise, seed);
        if (source == "two_block") {
            TwoBlockOptions o = two_block;
            o.feature_dim = feature_dim;
            return two_block_task(seed, o).task;
        }
        NodeTask t;
        const Rng root(seed);
        t.graph = build(root.split(0).next());
        if (!t.graph.labels()) throw ConfigError("graph.labels", "node tasks need labels");
        t.labels = *t.graph.labels();
        t.features = t.graph.features() ? *t.graph.features()
                                         : noisy_label_features(t.labels, feature_dim, feature_noise, root.split(1).next());
        split_indices(t.graph.num_nodes(), 0.3, 0.2, root.split(2).next(), t.train, t.val, t.test);
        return t;
    }
};

CgsoParams cgso_preset(const std::string& name) {
    if (name == "A") return CgsoParams::adjacency();
    if (name == "L") return CgsoParams::laplacian();
    if (name == "Q") return CgsoParams::signless_laplacian();
    if (name == "Lrw") return CgsoParams::rw_laplacian();
    if (name == "Lsym") return CgsoParams::sym_laplacian();
    if (name == "Ahat") return CgsoParams::normalized_adjacency();
    if (name == "H") return CgsoParams::mean_aggregation();
    throw std::invalid_argument("unknown CGSO preset '" + name + "'");
}

// Dimensions are filled in once the data is loaded.
ModelSpec resolve_model(const Config& c, const std::string& default_kind, const std::string& default_readout) {
    ModelSpec s;
    s.kind = parse_field<LayerKind>(c, "model.kind", default_kind, parse_layer_kind);
    s.hidden = to_index(c.get_ints("model.hidden", {16}));
    for (Index h : s.hidden) {
        if (h < 1) throw ConfigError("model.hidden", "widths must be positive");
    }
    s.readout = parse_field<Readout>(c, "model.readout", default_readout, parse_readout);
    const std::string act = c.get("model.activation", "relu");
    if (act != "relu" && act != "identity") throw ConfigError("model.activation", "expected relu or identity");
    s.act = act == "relu" ? Activation::relu : Activation::identity;
    s.bias = c.get_bool("model.bias", true);
    s.gin_eps = c.get_double("model.gin_eps", 0.0);
    s.cgso = parse_field<CgsoParams>(c, "model.cgso", "Ahat", cgso_preset);
    s.centrality = parse_field<CentralityKind>(c, "model.centrality", "degree", parse_centrality_kind);
    return s;
}

TrainConfig resolve_train(const Config& c, std::uint64_t seed) {
    TrainConfig t;
    t.epochs = static_cast<int>(check_min("train.epochs", c.get_int("train.epochs", 200), 0));
    t.lr = c.get_double("train.lr", 0.01);
    t.exponent_lr = c.get_double("train.exponent_lr", 0.0);
    t.weight_decay = c.get_double("train.weight_decay", 5e-4);
    t.seed = seed;
    return t;
}

Index num_classes(const Labels& y) { return y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1; }

json mean_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= std::max<std::size_t>(v.size(), 1);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= std::max<std::size_t>(v.size(), 1);
    return {{"mean", mean}, {"std", std::sqrt(var)}};
}

double accuracy_of(const MatrixXd& probs, const NodeTask& t, const std::vector<Index>& rows) {
    return accuracy(probs, t.labels, rows);
}

using Pipeline = std::function<json()>;

Pipeline plan_generate(const Config& c, std::uint64_t seed) {
    const GraphRecipe recipe = GraphRecipe::resolve(c);
    const std::string dir = c.require("generate.dir");
    return [=] {
        const Graph g = stage("generate", [&] {
            if (recipe.source == "file") return recipe.build(seed);
            const NodeTask t = recipe.task(seed);
            return t.graph.with_features(t.features).with_labels(t.labels);
        });
        stage("write", [&] {
            write_graph(g, dir);
            return 0;
        });
        const GraphStats s = graph_stats(g);
        json r{{"nodes", g.num_nodes()}, {"edges", g.num_edges()}, {"edge_density", s.edge_density},
               {"min_degree", s.min_degree}, {"max_degree", s.max_degree}, {"dir", dir}};
        r["homophily"] = s.homophily ? json(*s.homophily) : json(nullptr);
        return r;
    };
}

Pipeline plan_cluster(const Config& c, std::uint64_t seed) {
    const GraphRecipe recipe = GraphRecipe::resolve(c);
    std::vector<CentralityKind> kinds;
    for (const auto& name : c.get_strings("cluster.centralities", {"degree", "kcore"})) {
        try {
            kinds.push_back(parse_centrality_kind(name));
        } catch (const std::exception& e) {
            throw ConfigError("cluster.centralities", e.what());
        }
    }
    const double e2 = c.get_double("cluster.e2", -0.5);
    const double e3 = c.get_double("cluster.e3", -0.5);
    const int clusters = static_cast<int>(c.get_int("cluster.clusters", 0));
    const int seeds = static_cast<int>(check_min("cluster.seeds", c.get_int("cluster.seeds", 50), 1));
    SpectralOptions opts;
    opts.normalize_rows = c.get_bool("cluster.normalize_rows", false);
    opts.kmeans.n_init = static_cast<int>(check_min("cluster.n_init", c.get_int("cluster.n_init", 10), 1));
    return [=] {
        std::vector<std::vector<double>> amis(kinds.size()), aris(kinds.size());
        for (int s = 0; s < seeds; ++s) {
            const std::uint64_t run_seed = seed + static_cast<std::uint64_t>(s);
            const Graph g = stage("generate", [&] { return recipe.build(run_seed); });
            if (!g.labels()) throw PipelineError("cluster", "graph has no ground-truth labels");
            const Partition truth = Partition::from_labels(*g.labels());
            const int k = clusters > 0 ? clusters : static_cast<int>(truth.num_clusters);
            for (std::size_t j = 0; j < kinds.size(); ++j) {
                const ClusterResult res = stage("cluster", [&] {
                    const CentralityVector v = centrality_matrix(g, kinds[j]);
                    return spectral_cluster(g, v.values, e2, e3, k, run_seed, opts);
                });
                amis[j].push_back(ami(res.partition, truth));
                aris[j].push_back(ari(res.partition, truth));
            }
        }
        json r = json::object();
        for (std::size_t j = 0; j < kinds.size(); ++j) {
            const json a = mean_std(amis[j]);
            const json b = mean_std(aris[j]);
            r[to_string(kinds[j])] = {{"ami_mean", a["mean"]}, {"ami_std", a["std"]}, {"ari_mean", b["mean"]},
                                      {"ari_std", b["std"]}, {"ami", amis[j]}, {"ari", aris[j]}};
        }
        return r;
    };
}


std::uint64_t derive(std::uint64_t seed, std::uint64_t key) { return Rng(seed).split(key).next(); }

json node_accuracies(const Model& m, const NodeTask& t) {
    const MatrixXd p = forward(m, t.graph, t.features).probabilities;
    return {{"train_accuracy", accuracy_of(p, t, t.train)},
            {"val_accuracy", accuracy_of(p, t, t.val)},
            {"test_accuracy", accuracy_of(p, t, t.test)}};
}

Model trained_model(const ModelSpec& base, const NodeTask& t, const TrainConfig& tc, std::uint64_t model_seed,
                    History* history = nullptr) {
    ModelSpec spec = base;
    spec.in_dim = t.features.cols();
    spec.num_classes = num_classes(t.labels);
    Model m = make_model(spec, model_seed);
    History h = stage("train", [&] { return train(m, t, tc); });
    if (history) *history = std::move(h);
    return m;
}

Pipeline plan_train(const Config& c, std::uint64_t seed) {
    const GraphRecipe recipe = GraphRecipe::resolve(c);
    const ModelSpec spec = resolve_model(c, "gcn", "none");
    const TrainConfig tc = resolve_train(c, seed);
    const std::string model_out = c.get("train.model_out", "");
    return [=] {
        const NodeTask t = stage("data", [&] { return recipe.task(derive(seed, 0)); });
        History h;
        const Model m = trained_model(spec, t, tc, derive(seed, 1), &h);
        json r = node_accuracies(m, t);
        r["final_loss"] = h.loss.empty() ? json(nullptr) : json(h.loss.back());
        if (!model_out.empty()) {
            stage("save", [&] {
                save_model(m, model_out);
                return 0;
            });
            r["model_out"] = model_out;
        }
        return r;
    };
}

int best_exit(const std::vector<double>& acc) {
    return static_cast<int>(std::max_element(acc.begin(), acc.end()) - acc.begin());
}

Pipeline plan_admp(const Config& c, std::uint64_t seed) {
    const GraphRecipe recipe = GraphRecipe::resolve(c);
    ModelSpec base = resolve_model(c, "gcn", "none");
    if (!c.has("model.hidden")) base.hidden = {16, 16};
    const TrainConfig tc = resolve_train(c, seed);
    const std::string mode = c.get("admp.mode", "alm");
    if (mode != "alm" && mode != "st") throw ConfigError("admp.mode", "expected alm or st");
    const int buckets = static_cast<int>(check_min("admp.buckets", c.get_int("admp.buckets", 4), 1));
    const CentralityKind kind = parse_field<CentralityKind>(c, "admp.centrality", "degree", parse_centrality_kind);
    return [=] {
        const NodeTask t = stage("data", [&] { return recipe.task(derive(seed, 0)); });
        ModelSpec spec = base;
        spec.in_dim = t.features.cols();
        spec.num_classes = num_classes(t.labels);
        AdmpModel m = make_admp_model(spec, derive(seed, 1));
        stage("train", [&] { return mode == "alm" ? train_alm(m, t, tc) : train_st(m, t, tc); });
        const auto preds = admp_forward(m, t.graph, t.features);
        const std::vector<double> acc = exit_accuracies(preds, t.labels, t.test);
        const CentralityVector cv = stage("centrality", [&] { return centrality_matrix(t.graph, kind); });
        const ExitPolicy policy = learn_exit_policy(preds, t.labels, t.val, cv, buckets);
        const PolicyResult pr = apply_exit_policy(policy, preds, cv.values, t.labels, t.test);
        json r{{"exit_accuracy", acc},
               {"best_exit", best_exit(acc)},
               {"oracle_accuracy", oracle_accuracy(preds, t.labels, t.test)},
               {"policy_accuracy", pr.accuracy},
               {"policy_edges", policy.edges},
               {"policy_layers", policy.bucket_layer}};
        if (recipe.source == "two_block") {
            std::vector<Index> sparse, dense;
            for (Index i : t.test) (i < recipe.two_block.block_size ? sparse : dense).push_back(i);
            r["sparse_best_exit"] = best_exit(exit_accuracies(preds, t.labels, sparse));
            r["dense_best_exit"] = best_exit(exit_accuracies(preds, t.labels, dense));
        }
        return r;
    };
}

double orthogonality_residual(const Model& m) {
    double worst = 0.0;
    const auto check = [&](const MatrixXd& w) {
        const MatrixXd e = effective_weight(w, m.orthonormal);
        const MatrixXd gram = e.rows() >= e.cols() ? MatrixXd(e.transpose() * e) : MatrixXd(e * e.transpose());
        worst = std::max(worst, (gram - MatrixXd::Identity(gram.rows(), gram.cols())).norm());
    };
    for (const auto& l : m.layers) check(l.lin.weight);
    check(m.head.weight);
    return worst;
}

Pipeline plan_gcorn(const Config& c, std::uint64_t seed) {
    const GraphRecipe recipe = GraphRecipe::resolve(c);
    const ModelSpec spec = resolve_model(c, "gcn", "none");
    if (spec.kind != LayerKind::gcn) throw ConfigError("model.kind", "gcorn compares GCN stacks");
    const TrainConfig tc = resolve_train(c, seed);
    BjorckConfig bj;
    bj.iterations = static_cast<int>(check_min("gcorn.iterations", c.get_int("gcorn.iterations", 15), 1));
    bj.p_order = static_cast<int>(check_min("gcorn.order", c.get_int("gcorn.order", 1), 1));
    const double psi = c.get_double("gcorn.psi", 1.0);
    RobustnessConfig rc;
    rc.eps = c.get_double("gcorn.eps", 0.1);
    rc.sigma = c.get_double("gcorn.sigma", 0.1);
    return [=] {
        const NodeTask t = stage("data", [&] { return recipe.task(derive(seed, 0)); });
        const MatrixXd attacked = attack_random(t.features, psi, derive(seed, 2));
        json r;
        for (const bool ortho : {false, true}) {
            ModelSpec s = spec;
            s.in_dim = t.features.cols();
            s.num_classes = num_classes(t.labels);
            Model m = make_model(s, derive(seed, 1));
            stage("train", [&] { return ortho ? train_gcorn(m, t, tc, bj) : train(m, t, tc); });
            json e = node_accuracies(m, t);
            e["attacked_accuracy"] = accuracy(forward(m, t.graph, attacked).probabilities, t.labels, t.test);
            e["norm_product"] = weight_norm_product(m, BoundKind::gcn_feat_dinf);
            e["gamma"] = robustness_bound(m, t.graph, t.features, rc, BoundKind::gcn_feat_dinf);
            if (ortho) e["orthogonality_residual"] = orthogonality_residual(m);
            r[ortho ? "gcorn" : "twin"] = e;
        }
        return r;
    };
}

Pipeline plan_estimate(const Config& c, std::uint64_t seed) {
    const GraphRecipe recipe = GraphRecipe::resolve(c);
    RobustnessConfig rc;
    rc.eps = c.get_double("estimate.eps", 0.1);
    rc.sigma = c.get_double("estimate.sigma", 0.1);
    rc.p = c.get_double("estimate.p", 2.0);
    rc.samples = static_cast<int>(c.get_int("estimate.samples", 200));
    rc.seed = derive(seed, 3);
    try {
        rc.validate();
    } catch (const std::exception& e) {
        throw ConfigError("estimate", e.what());
    }
    std::filesystem::path model_in;
    if (c.has("estimate.model_in")) model_in = c.get_path("estimate.model_in");
    std::optional<ModelSpec> spec;
    std::optional<TrainConfig> tc;
    if (model_in.empty()) {
        spec = resolve_model(c, "gcn", "none");
        tc = resolve_train(c, seed);
    }
    return [=] {
        const NodeTask t = stage("data", [&] { return recipe.task(derive(seed, 0)); });
        const Model m = model_in.empty() ? trained_model(*spec, t, *tc, derive(seed, 1))
                                         : stage("load", [&] { return load_model(model_in); });
        const RobustnessReport rep = stage("estimate", [&] {
            return estimate_expected_vulnerability(m, {RobustnessInput{t.graph, t.features}}, rc);
        });
        return json::parse(to_json(rep));
    };
}

Pipeline plan_crf(const Config& c, std::uint64_t seed) {
    const GraphRecipe recipe = GraphRecipe::resolve(c);
    const ModelSpec spec = resolve_model(c, "gcn", "none");
    const TrainConfig tc = resolve_train(c, seed);
    const double psi = c.get_double("crf.psi", 1.0);
    CrfConfig cc;
    cc.sigma = check_range("crf.sigma", c.get_double("crf.sigma", cc.sigma), 0, 1);
    cc.iterations = static_cast<int>(check_min("crf.iterations", c.get_int("crf.iterations", cc.iterations), 0));
    cc.neighbors = static_cast<int>(check_min("crf.neighbors", c.get_int("crf.neighbors", cc.neighbors), 1));
    const std::string space = c.get("crf.space", "feature");
    if (space != "feature" && space != "structure") throw ConfigError("crf.space", "expected feature or structure");
    cc.space = space == "feature" ? CrfSpace::feature : CrfSpace::structure;
    cc.radius = check_min("crf.radius", c.get_int("crf.radius", cc.radius), 0);
    cc.eps = c.get_double("crf.eps", cc.eps);
    cc.p = c.get_double("crf.p", cc.p);
    cc.similarity = parse_field<CrfSimilarity>(c, "crf.similarity", cc.space == CrfSpace::feature ? "cosine" : "binomial_prior",
                                               parse_crf_similarity);
    cc.max_model_calls = c.get_seed("crf.budget", cc.max_model_calls);
    cc.seed = derive(seed, 4);
    return [=] {
        const NodeTask t = stage("data", [&] { return recipe.task(derive(seed, 0)); });
        const Model m = trained_model(spec, t, tc, derive(seed, 1));
        const Predictor model = [&m](const Graph& g, const MatrixXd& x) { return forward(m, g, x).probabilities; };
        const MatrixXd attacked = attack_random(t.features, psi, derive(seed, 2));
        const auto acc = [&](const MatrixXd& p) { return accuracy(p, t.labels, t.test); };
        json r;
        r["clean_accuracy"] = acc(model(t.graph, t.features));
        r["attacked_accuracy"] = acc(model(t.graph, attacked));
        r["crf_clean_accuracy"] = acc(stage("crf", [&] { return crf_smooth(model, t.graph, t.features, cc); }));
        r["crf_attacked_accuracy"] = acc(stage("crf", [&] { return crf_smooth(model, t.graph, attacked, cc); }));
        r["model_calls"] = crf_model_calls(cc);
        return r;
    };
}

double graph_accuracy(const Model& m, const GraphDataset& data, const std::vector<Index>& subset) {
    if (subset.empty()) return 0.0;
    double hits = 0.0;
    for (Index i : subset) {
        const auto& s = data.graphs[i];
        if (argmax_rows(forward(m, s.graph, s.features).logits)[0] == s.label) hits += 1.0;
    }
    return hits / static_cast<double>(subset.size());
}

Pipeline plan_gratin(const Config& c, std::uint64_t seed) {
    const std::string dataset = c.get("gratin.dataset", "two_cliques");
    if (dataset != "two_cliques") throw ConfigError("gratin.dataset", "only two_cliques is available");
    const Index graphs = check_min("gratin.graphs", c.get_int("gratin.graphs", 80), 3);
    const double label_noise = check_range("gratin.label_noise", c.get_double("gratin.label_noise", 0.2), 0, 1);
    ModelSpec base = resolve_model(c, "gin", "mean");
    if (base.readout == Readout::none) throw ConfigError("model.readout", "graph classification needs a readout");
    const TrainConfig tc = resolve_train(c, seed);
    GratinConfig gc;
    gc.pretrain = false;
    gc.components_per_class =
        static_cast<int>(check_min("gratin.components", c.get_int("gratin.components", gc.components_per_class), 1));
    gc.augment_per_class = check_min("gratin.augment", c.get_int("gratin.augment", gc.augment_per_class), 0);
    gc.finetune_epochs = static_cast<int>(check_min("gratin.finetune_epochs", c.get_int("gratin.finetune_epochs", 100), 0));
    gc.finetune_lr = c.get_double("gratin.finetune_lr", gc.finetune_lr);
    gc.head_l2 = c.get_double("gratin.head_l2", gc.head_l2);
    gc.gmm.max_iter = static_cast<int>(c.get_int("gratin.gmm_max_iter", gc.gmm.max_iter));
    gc.gmm.tol = c.get_double("gratin.gmm_tol", gc.gmm.tol);
    gc.gmm.reg = c.get_double("gratin.gmm_reg", gc.gmm.reg);
    gc.seed = derive(seed, 5);
    const double damping = c.get_double("gratin.damping", 1e-3);
    const double keep_frac = check_range("gratin.keep_frac", c.get_double("gratin.keep_frac", 1.0), 0, 1);
    const std::string store = c.get("gratin.store", "");
    return [=] {
        const GraphDataset data = stage("data", [&] { return two_clique_graphs(graphs, label_noise, derive(seed, 0)); });
        ModelSpec spec = base;
        spec.in_dim = data.graphs.front().features.cols();
        spec.num_classes = data.num_classes;
        Model m = make_model(spec, derive(seed, 1));
        stage("train", [&] { return train(m, data, tc); });
        GratinConfig plain = gc;
        plain.augment_per_class = 0;
        const GratinResult no_aug = stage("finetune", [&] { return gratin_train(m, data, plain); });
        const GratinResult res = stage("gratin", [&] { return gratin_train(m, data, gc); });
        json r{{"pretrained_test_accuracy", graph_accuracy(m, data, data.test)},
               {"no_aug_test_accuracy", graph_accuracy(no_aug.model, data, data.test)},
               {"gratin_test_accuracy", graph_accuracy(res.model, data, data.test)},
               {"augmented", res.augmented.size()},
               {"components_used", res.components_used},
               {"warnings", res.warnings}};
        HeadData kept = res.augmented;
        if (res.augmented.size() > 0 && !data.val.empty()) {
            HeadData train_rows, val_rows;
            train_rows.embeddings = graph_embeddings(res.model, data, data.train);
            for (Index i : data.train) train_rows.labels.push_back(data.graphs[i].label);
            val_rows.embeddings = graph_embeddings(res.model, data, data.val);
            for (Index i : data.val) val_rows.labels.push_back(data.graphs[i].label);
            const InfluenceReport inf = stage("influence", [&] {
                return influence_scores(res.model.head, train_rows, res.augmented, val_rows, gc.head_l2, damping);
            });
            r["influence_mean"] = inf.score.mean();
            kept = fisher_filter(res.augmented, inf.score, keep_frac);
            r["embedding_shift"] = expected_embedding_shift(train_rows.embeddings, res.augmented.embeddings);
        }
        r["kept"] = kept.size();
        if (!store.empty()) {
            stage("store", [&] {
                write_augmented_csv(store, kept);
                return 0;
            });
            r["store"] = store;
        }
        return r;
    };
}

}  // namespace

std::string run_experiment(const Config& c) {
    const std::string command = c.require("run.command");
    const std::uint64_t seed = c.get_seed("run.seed", 0);
    if (!c.has("run.seed")) throw ConfigError("run.seed", "required");
    const std::string output = c.get("run.output", "");
    Pipeline pipeline;
    if (command == "generate") pipeline = plan_generate(c, seed);
    else if (command == "cluster") pipeline = plan_cluster(c, seed);
    else if (command == "train") pipeline = plan_train(c, seed);
    else if (command == "admp") pipeline = plan_admp(c, seed);
    else if (command == "gcorn") pipeline = plan_gcorn(c, seed);
    else if (command == "estimate") pipeline = plan_estimate(c, seed);
    else if (command == "crf") pipeline = plan_crf(c, seed);
    else if (command == "gratin") pipeline = plan_gratin(c, seed);
    else throw ConfigError("run.command", "unknown command '" + command + "'");
    c.check_consumed();

    json report;
    report["command"] = command;
    report["seed"] = seed;
    report["results"] = pipeline();
    report["config"] = c.resolved();
    report["timestamp"] = timestamp();
    const std::string text = report.dump(2) + "\n";
    if (!output.empty()) {
        std::ofstream os(output);
        if (!os) throw PipelineError("report", "cannot write " + output);
        os << text;
    }
    return text;
}

std::string strip_volatile(const std::string& report) {
    json j = json::parse(report);
    j.erase("timestamp");
    return j.dump(2);
}

}  // namespace cgl
