#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "decamp/eval_metrics.hpp"
#include "decamp/measure_prop.hpp"
#include "decamp/tensor_net.hpp"

namespace decamp {

struct ClusterHead {
    Matrix centers;  // K x d_z
    std::size_t k() const { return centers.rows(); }
    std::size_t dim() const { return centers.cols(); }
};

// Student-t soft assignment: q_ik = (1+||z_i-mu_k||^2)^-1, row-normalized.
SoftLabels soft_assign(const Matrix& z, const ClusterHead& head);

struct SoftAssignGrads {
    Matrix dz;       // batch x d_z
    Matrix dcenters; // K x d_z
};
// Backpropagates a loss gradient w.r.t. q through the soft assignment.
// q must be the output of soft_assign(z, head).
SoftAssignGrads soft_assign_backward(const Matrix& z, const ClusterHead& head, const SoftLabels& q,
                                     const Matrix& dq);

// Self-training target p_ik ~ q_ik^2 / f_k with f_k the mean of column k over
// the full q. Throws when some cluster frequency is zero.
SoftLabels dec_target(const SoftLabels& q);

struct LossResult {
    double value = 0.0;
    Matrix dq;
};

// (1/|B|) sum_i KL(p_i||q_i) - xi * H(mean_B q). p is treated as constant.
LossResult kl_balance_loss(const SoftLabels& q, const SoftLabels& p, double xi);

// (lambda/|B|) sum_i RenyiEntropy_{1/(1-lambda)}(q_i) - xi * H(mean_B q).
// Requires lambda in (0, 1).
LossResult dece2e_loss(const SoftLabels& q, double lambda, double xi);

// Lloyd's algorithm with greedy farthest-point seeding; the seed picks the
// first center. Warns on degenerate (all-identical) data.
ClusterHead kmeans_init(const Matrix& z, std::size_t k, std::uint64_t seed,
                        std::size_t max_iters = 100);

// Hard assignment of each row to its nearest center (squared Euclidean).
LabelVector kmeans_assign(const Matrix& z, const ClusterHead& head);

// Moves every center that lost all argmax members onto the point farthest
// from its own assigned center, refreshing q; returns the number of reseeded
// centers. The training loops call this each refresh.
std::size_t reseed_empty_clusters(const Matrix& z, ClusterHead& head, SoftLabels& q);

LabelVector argmax_labels(const SoftLabels& q);

struct ClusterConfig {
    std::size_t k = 2;
    double xi = 1.0;
    MpConfig mp;  // nu, lambda, alpha, MP iteration controls
    std::size_t epochs = 50;            // plain SGD epochs (DECE2E)
    std::size_t max_outer_iters = 100;  // pseudo-label refreshes (DEC/DECAMP)
    std::size_t batch_size = 256;
    std::size_t update_interval = 0;  // mini-batches per refresh; 0 = one epoch
    double tol_label_change = 0.001;  // stop when fewer argmax labels change
    double learning_rate = 0.1;
    double momentum = 0.9;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrajectoryRow {
    std::size_t outer_iter = 0;
    double kl_term = 0.0;       // data-fit term of the loss at refresh time
    double balance_term = 0.0;  // -xi * H(mean q)
    double acc = std::numeric_limits<double>::quiet_NaN();
    double nmi = std::numeric_limits<double>::quiet_NaN();
    double ari = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    DenseNet encoder;
    ClusterHead head;
    SoftLabels q;  // final full-data assignment
    LabelVector labels;
    std::vector<TrajectoryRow> trajectory;
    std::size_t outer_iters = 0;
};

// Shared alternating loop: full-data soft assignment -> target() -> a block of
// mini-batch steps on kl_balance_loss with the target fixed. Stops when the
// fraction of changed argmax labels drops below tol_label_change.
using TargetFn = std::function<SoftLabels(const SoftLabels& q)>;
TrainResult run_self_training(const Matrix& data, DenseNet encoder, const ClusterConfig& cfg,
                              double xi, const TargetFn& target, const LabelVector* truth = nullptr);

// Original DEC: squared-frequency target, no balance term.
TrainResult run_dec(const Matrix& data, DenseNet encoder, const ClusterConfig& cfg,
                    const LabelVector* truth = nullptr);

// End-to-end Renyi-entropy objective, no pseudo-label phase.
TrainResult run_dece2e(const Matrix& data, DenseNet encoder, const ClusterConfig& cfg,
                       const LabelVector* truth = nullptr);

// Full algorithm: pseudo-labels from measure propagation over the affinity
// graph, network trained with the balance regularizer.
TrainResult run_decamp(const Matrix& data, const SparseAffinity& graph, DenseNet encoder,
                       const ClusterConfig& cfg, const LabelVector* truth = nullptr);

}  // namespace decamp
