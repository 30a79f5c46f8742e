#pragma once

#include "cgl/centrality.hpp"
#include "cgl/nn.hpp"

#include <functional>
#include <vector>

namespace cgl {

/// Message-passing layers with one exit head per depth: exit_heads[l]
/// classifies the state after l layers, so there are layers.size() + 1 heads.
struct AdmpModel {
    std::vector<Layer> layers;
    std::vector<Linear> exit_heads;

    int depth() const { return static_cast<int>(layers.size()); }
    /// The plain model that predicts at exit l.
    Model truncated(int l) const;
};

AdmpModel make_admp_model(const ModelSpec& spec, std::uint64_t seed);

/// Probabilities at every exit, index l after l layers.
std::vector<MatrixXd> admp_forward(const AdmpModel& m, const PreparedGraph& pg, const MatrixXd& x);
std::vector<MatrixXd> admp_forward(const AdmpModel& m, const Graph& g, const MatrixXd& x);

struct AdmpSlot {
    ParamSlot slot;
    /// Depth the parameter belongs to: layer l has depth l + 1, exit head l has depth l.
    int depth = 0;
};

std::vector<AdmpSlot> admp_layout(const AdmpModel& m);
VectorXd admp_pack(const AdmpModel& m);
void admp_unpack(AdmpModel& m, const VectorXd& flat);

struct AdmpLossGrad {
    double loss = 0.0;
    VectorXd grad;  // admp_pack order
};

/// sum_l weight[l] * CE(p^(l)) over the mask, with its gradient.
AdmpLossGrad admp_loss_and_grad(const AdmpModel& m, const PreparedGraph& pg, const MatrixXd& x, const Labels& targets,
                                const std::vector<Index>& mask, const std::vector<double>& exit_weights);

/// Trains all depths jointly on the summed exit losses.
History train_alm(AdmpModel& m, const NodeTask& task, const TrainConfig& cfg);

/// Stage t trains layer t and exit head t for cfg.epochs, then freezes them.
/// on_stage is called after each stage with the stage index.
History train_st(AdmpModel& m, const NodeTask& task, const TrainConfig& cfg,
                 const std::function<void(int, const AdmpModel&)>& on_stage = {});

/// Per-exit accuracy over the rows.
std::vector<double> exit_accuracies(const std::vector<MatrixXd>& preds, const Labels& targets,
                                    const std::vector<Index>& rows);

/// Fraction of rows whose label is the argmax of at least one exit.
double oracle_accuracy(const std::vector<MatrixXd>& preds, const Labels& targets, const std::vector<Index>& rows);

struct ExitPolicy {
    CentralityKind kind = CentralityKind::degree;
    /// edges[c] is the smallest centrality of bucket c; edges.back() is the maximum.
    std::vector<double> edges;
    std::vector<int> bucket_layer;

    /// Largest bucket whose lower edge is <= value, clamped to the first bucket.
    int bucket_of(double value) const;
};

/// Ranks all nodes by centrality (ties by index), splits them into equal-count
/// buckets and picks the most accurate validation exit per bucket. Ties go to
/// the shallower exit; buckets without validation nodes use the best global exit.
ExitPolicy learn_exit_policy(const std::vector<MatrixXd>& preds, const Labels& targets,
                             const std::vector<Index>& val_mask, const CentralityVector& centrality, int buckets);

struct PolicyResult {
    std::vector<int> predictions;  // per node
    std::vector<int> layer;        // exit used per node
    double accuracy = 0.0;         // over the test rows
};

PolicyResult apply_exit_policy(const ExitPolicy& policy, const std::vector<MatrixXd>& preds,
                               const VectorXd& centrality, const Labels& targets, const std::vector<Index>& test_mask);

}  // namespace cgl
