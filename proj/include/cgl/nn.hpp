#pragma once

#include "cgl/autodiff.hpp"
#include "cgl/bjorck.hpp"
#include "cgl/centrality.hpp"
#include "cgl/graph.hpp"
#include "cgl/gso.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cgl {

enum class LayerKind { gcn, gin, cgnn };
enum class Activation { relu, identity };
enum class Readout { none, sum, mean };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);
std::string to_string(Readout readout);
Readout parse_readout(const std::string& name);

struct Linear {
    MatrixXd weight;  // in x out
    Eigen::RowVectorXd bias;
    bool use_bias = true;

    Index in_dim() const { return weight.rows(); }
    Index out_dim() const { return weight.cols(); }
};

/// One message-passing layer: act(Phi(H) W + b) where Phi is the GCN
/// operator, the GIN sum (1 + eps) h_v + sum of neighbors, or a CGSO.
struct Layer {
    LayerKind kind = LayerKind::gcn;
    Linear lin;
    double gin_eps = 0.0;
    CgsoParams cgso;
    CentralityKind centrality = CentralityKind::degree;
    Activation act = Activation::relu;
};

struct Model {
    std::vector<Layer> layers;
    Readout readout = Readout::none;
    Linear head;
    /// When set, every weight matrix passes through Björck before use.
    std::optional<BjorckConfig> orthonormal;

    Index input_dim() const;
    Index num_classes() const { return head.out_dim(); }
};

/// Same shapes as the model; each parameter field holds its partial derivative.
using Gradients = Model;

struct ModelSpec {
    LayerKind kind = LayerKind::gcn;
    Index in_dim = 0;
    std::vector<Index> hidden;
    Index num_classes = 2;
    Readout readout = Readout::none;
    Activation act = Activation::relu;
    bool bias = true;
    double gin_eps = 0.0;
    CgsoParams cgso = CgsoParams::normalized_adjacency();
    CentralityKind centrality = CentralityKind::degree;
};

/// Glorot-uniform weights, zero biases.
Model make_model(const ModelSpec& spec, std::uint64_t seed);
Linear make_linear(Index in, Index out, bool bias, std::uint64_t seed);

/// Graph-derived operators reused across forward passes.
struct PreparedGraph {
    Index n = 0;
    SparseMatrix adjacency;
    SparseMatrix normalized;  // D~^-1/2 (A + I) D~^-1/2
    std::map<CentralityKind, VectorXd> centrality;

    PreparedGraph() = default;
    explicit PreparedGraph(const Graph& g, const std::vector<CentralityKind>& kinds = {});
    const VectorXd& centrality_of(CentralityKind kind) const;
};

/// Centralities needed by the model's CGNN layers.
std::vector<CentralityKind> required_centralities(const Model& model);
PreparedGraph prepare(const Graph& g, const Model& model);

// ---------------------------------------------------------------------------
// Parameters

enum class ParamGroup { weight, bias, gin_eps, cgso_coefficient, cgso_exponent };

struct ParamSlot {
    std::string name;
    /// Layer index; the head is layers.size().
    int layer = 0;
    ParamGroup group = ParamGroup::weight;
    Index offset = 0;
    Index size = 0;
};

/// Flat layout of the trainable parameters in a fixed order.
std::vector<ParamSlot> param_layout(const Model& model);
VectorXd pack(const Model& model);
void unpack(Model& model, const VectorXd& flat);

// ---------------------------------------------------------------------------
// Forward and gradients

/// Leaf variables bound to a model's parameters on a tape.
struct ModelVars {
    struct LayerVars {
        ad::Var weight, bias, gin_eps;
        ad::Var m1, m2, m3, e1, e2, e3, a;
    };
    std::vector<LayerVars> layers;
    ad::Var head_weight, head_bias;
};

ModelVars bind(ad::Tape& tape, const Model& model, bool trainable);
Gradients collect(const ModelVars& vars, const Model& model);

/// Effective weight after the optional orthonormal projection.
ad::Var effective_weight(ad::Var weight, const std::optional<BjorckConfig>& cfg);
MatrixXd effective_weight(const MatrixXd& weight, const std::optional<BjorckConfig>& cfg);

ad::Var layer_forward(const Layer& layer, const ModelVars::LayerVars& vars, const PreparedGraph& pg, ad::Var h,
                      const std::optional<BjorckConfig>& ortho);
ad::Var linear_forward(const Linear& lin, ad::Var weight, ad::Var bias, ad::Var h,
                       const std::optional<BjorckConfig>& ortho);

struct TapeForward {
    std::vector<ad::Var> hidden;  // hidden[0] is the input
    ad::Var embedding;
    ad::Var logits;
};

TapeForward forward_on_tape(const Model& model, const ModelVars& vars, const PreparedGraph& pg, ad::Var x);

struct ForwardResult {
    std::vector<MatrixXd> hidden;
    MatrixXd embedding;
    MatrixXd logits;
    MatrixXd probabilities;
};

ForwardResult forward(const Model& model, const Graph& g, const MatrixXd& x);
ForwardResult forward(const Model& model, const PreparedGraph& pg, const MatrixXd& x);

MatrixXd softmax_rows(const MatrixXd& logits);
/// Mean -log p[target] over rows (or the selected rows).
double cross_entropy(const MatrixXd& probs, const std::vector<int>& targets);
double cross_entropy(const MatrixXd& probs, const std::vector<int>& targets, const std::vector<Index>& rows);
std::vector<int> argmax_rows(const MatrixXd& m);
double accuracy(const MatrixXd& scores, const std::vector<int>& targets, const std::vector<Index>& rows);

// ---------------------------------------------------------------------------
// Tasks

/// Semi-supervised node classification on one graph.
struct NodeTask {
    Graph graph;
    MatrixXd features;
    Labels labels;
    std::vector<Index> train, val, test;
};

struct GraphSample {
    Graph graph;
    MatrixXd features;
    int label = 0;
};

struct GraphDataset {
    std::vector<GraphSample> graphs;
    std::vector<Index> train, val, test;
    int num_classes = 0;
};

struct LossGrad {
    double loss = 0.0;
    Gradients grad;
};

/// Mean cross-entropy over the mask (all nodes if empty) and its gradient.
LossGrad loss_and_grad(const Model& model, const PreparedGraph& pg, const MatrixXd& x, const Labels& targets,
                       const std::vector<Index>& mask = {});
LossGrad loss_and_grad(const Model& model, const Graph& g, const MatrixXd& x, const Labels& targets,
                       const std::vector<Index>& mask = {});
/// Mean cross-entropy over the selected graphs of a graph-level dataset.
LossGrad loss_and_grad(const Model& model, const std::vector<PreparedGraph>& pgs, const GraphDataset& data,
                       const std::vector<Index>& subset);

// ---------------------------------------------------------------------------
// Optimization

struct AdamState {
    VectorXd m, v;
    int t = 0;
};

/// Bias-corrected Adam. Entries whose learning rate is exactly zero are
/// skipped entirely, leaving both the parameter and its moments untouched.
void adam_step(VectorXd& params, const VectorXd& grads, AdamState& state, const VectorXd& lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);
void adam_step(VectorXd& params, const VectorXd& grads, AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

struct TrainConfig {
    int epochs = 200;
    double lr = 0.01;
    /// Learning rate for CGSO exponents; non-positive means lr.
    double exponent_lr = 0.0;
    double weight_decay = 0.0;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::uint64_t seed = 0;
};

struct History {
    std::vector<double> loss;
    std::vector<double> train_accuracy;
    std::vector<double> val_accuracy;
};

/// Per-parameter learning rates for a layout; frozen layers get zero.
VectorXd learning_rates(const std::vector<ParamSlot>& layout, const TrainConfig& cfg,
                        const std::function<bool(const ParamSlot&)>& trainable = {});

using Objective = std::function<double(const Model&, Gradients*)>;

/// Adam on an arbitrary objective. Calls on_epoch after each step.
History optimize(Model& model, const Objective& objective, const TrainConfig& cfg, const VectorXd& lr,
                 const std::function<void(const Model&, History&)>& on_epoch = {});

History train(Model& model, const NodeTask& task, const TrainConfig& cfg);
History train(Model& model, const GraphDataset& data, const TrainConfig& cfg);

/// Readout embeddings of the selected graphs, one row each.
MatrixXd graph_embeddings(const Model& model, const GraphDataset& data, const std::vector<Index>& subset);

// ---------------------------------------------------------------------------
// Checkpoints

/// Text format: a header line, then one record per layer and the head with
/// every value printed at 17 significant digits.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace cgl
