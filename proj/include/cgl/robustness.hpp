#pragma once

#include "cgl/bjorck.hpp"
#include "cgl/nn.hpp"
#include "cgl/rng.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace cgl {

struct RobustnessConfig {
    double eps = 0.1;
    double sigma = 0.1;
    /// Feature norm order; infinity selects the max norm.
    double p = 2.0;
    int samples = 200;
    std::uint64_t seed = 0;

    void validate() const;
};

struct WalkSums {
    VectorXd per_node;  // A_hat^(L-1) 1
    double max = 0.0;
    double total = 0.0;
};

WalkSums normalized_walk_sums(const Graph& g, int layers);

enum class BoundKind { gcn_feat_d1, gcn_feat_dinf, gcn_struct, gin_feat };

BoundKind parse_bound_kind(const std::string& name);

/// Max absolute column sum.
double norm_1(const MatrixXd& w);
/// Max absolute row sum.
double norm_inf(const MatrixXd& w);

/// Product of the chosen operator norm over every effective weight matrix,
/// message-passing layers and head.
double weight_norm_product(const Model& model, BoundKind kind);

/// Upper bound on expected vulnerability for the given attack family. The
/// features supply ||X||_2 for structural attacks and the bound B for GIN.
double robustness_bound(const Model& model, const Graph& g, const MatrixXd& x, const RobustnessConfig& cfg,
                        BoundKind kind);

/// Uniform perturbation Z with max_i ||Z_i||_p <= eps, drawn by radius
/// stratification. The row i0 attains the sampled radius exactly.
struct Perturbation {
    MatrixXd z;
    double radius = 0.0;
    Index anchor_row = 0;
};

Perturbation sample_perturbation(Index rows, Index cols, double eps, double p, Rng& rng);
MatrixXd sample_feature_perturbation(const MatrixXd& x, double eps, double p, std::uint64_t seed);

/// X + psi * N(0, I).
MatrixXd attack_random(const MatrixXd& x, double psi, std::uint64_t seed);

/// Gradient of the mean cross-entropy over the rows with respect to the features.
MatrixXd feature_gradient(const Model& model, const PreparedGraph& pg, const MatrixXd& x, const Labels& targets,
                          const std::vector<Index>& rows);

/// Projected ascent on the cross-entropy; each row's perturbation stays in
/// the L2 ball of radius eps. step_size <= 0 means eps / steps.
MatrixXd attack_pgd_features(const Model& model, const Graph& g, const MatrixXd& x, const Labels& targets, double eps,
                             int steps = 10, double step_size = 0.0, const std::vector<Index>& rows = {});

/// ||P1 - P2||_F / (2 sqrt(n)) for row-stochastic outputs; lies in [0, 1].
double output_distance(const MatrixXd& a, const MatrixXd& b);

struct RobustnessInput {
    Graph graph;
    MatrixXd features;
};

struct RobustnessReport {
    double adv = 0.0;
    double standard_error = 0.0;
    /// d-infinity feature bound, or NaN when the model is not a GCN stack.
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double eps = 0.0;
    double sigma = 0.0;
    double p = 0.0;
    int samples = 0;
    std::uint64_t seed = 0;
    int n_inputs = 0;
};

RobustnessReport estimate_expected_vulnerability(const Model& model, const std::vector<RobustnessInput>& inputs,
                                                 const RobustnessConfig& cfg);
std::string to_json(const RobustnessReport& report);

/// Plain training with every weight passed through Björck in each forward pass.
History train_gcorn(Model& model, const NodeTask& task, const TrainConfig& cfg, const BjorckConfig& bjorck);
History train_gcorn(Model& model, const GraphDataset& data, const TrainConfig& cfg, const BjorckConfig& bjorck);

}  // namespace cgl
