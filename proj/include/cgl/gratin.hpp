#pragma once

#include "cgl/gmm.hpp"
#include "cgl/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cgl {

/// Labeled rows in the head's input space: readout embeddings, original or sampled.
struct HeadData {
    MatrixXd embeddings;
    Labels labels;

    Index size() const { return embeddings.rows(); }
};

HeadData concat(const HeadData& a, const HeadData& b);

/// Head parameters flattened class by class: for class c the weight column
/// followed by the bias entry (when used).
VectorXd pack_head(const Linear& head);
void unpack_head(const VectorXd& theta, Linear& head);

/// sum_i w_i CE_i + (l2 / 2) ||theta||^2 with optional analytic gradient and Hessian.
double head_objective(const Linear& head, const HeadData& data, const VectorXd& row_weights, double l2,
                      VectorXd* grad = nullptr, MatrixXd* hessian = nullptr);
/// Mean cross-entropy plus (l2 / 2) ||theta||^2.
double head_objective(const Linear& head, const HeadData& data, double l2, VectorXd* grad = nullptr,
                      MatrixXd* hessian = nullptr);

/// Per-row cross-entropy gradients, one column per row.
MatrixXd head_row_gradients(const Linear& head, const HeadData& data);

/// Exact minimizer of the weighted objective by damped Newton steps.
void fit_head_newton(Linear& head, const HeadData& data, const VectorXd& row_weights, double l2, double tol = 1e-12,
                     int max_iter = 100);

/// Full-batch Adam on the mean objective; returns the loss per epoch.
std::vector<double> train_head(Linear& head, const HeadData& data, int epochs, double lr, double l2);

struct GratinConfig {
    bool pretrain = true;
    TrainConfig train;
    int components_per_class = 2;
    Index augment_per_class = 20;
    int finetune_epochs = 100;
    double finetune_lr = 0.01;
    double head_l2 = 1e-2;
    GmmOptions gmm;
    std::uint64_t seed = 0;
};

struct GratinResult {
    Model model;
    HeadData augmented;
    History pretrain;
    std::vector<double> finetune_loss;
    std::vector<int> components_used;
    std::vector<std::string> warnings;
};

/// Train, embed the training graphs, fit one mixture per class, sample
/// labeled embeddings and finetune only the head on the union.
GratinResult gratin_train(Model model, const GraphDataset& data, const GratinConfig& cfg);

/// -g_test^T (H + damping I)^{-1} g_aug. Throws if the damped matrix is not positive definite.
double influence(const VectorXd& grad_test, const MatrixXd& hessian, const VectorXd& grad_aug, double damping);

struct InfluenceReport {
    /// Mean over the evaluation rows of d loss_test / d eps, per augmented row.
    VectorXd derivative;
    /// Negated derivative: positive values lower the evaluation loss.
    VectorXd score;
    double damping = 0.0;
};

/// Influence of upweighting each augmented row on the evaluation loss, with
/// the Hessian of the head's training objective.
InfluenceReport influence_scores(const Linear& head, const HeadData& train, const HeadData& augmented,
                                 const HeadData& eval, double l2, double damping = 1e-3);

/// Indices of the top ceil(keep_frac * m) scores, ties to the lower index, in ascending order.
std::vector<Index> fisher_keep(const VectorXd& scores, double keep_frac);
HeadData fisher_filter(const HeadData& store, const VectorXd& scores, double keep_frac);

enum class AugmentKind { drop_edge, drop_node, feature_noise };

AugmentKind parse_augment_kind(const std::string& name);

/// Rate for the drop kinds, noise scale for feature_noise.
Graph baseline_augment(const Graph& g, AugmentKind kind, double rate, std::uint64_t seed);
GraphSample baseline_augment(const GraphSample& s, AugmentKind kind, double rate, std::uint64_t seed);

/// Mean L2 distance over all (original, augmented) row pairs.
double expected_embedding_shift(const MatrixXd& original, const MatrixXd& augmented);

void write_augmented_csv(const std::string& path, const HeadData& store);
HeadData read_augmented_csv(const std::string& path);

}  // namespace cgl
