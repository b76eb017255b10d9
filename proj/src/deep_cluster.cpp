#include "decamp/deep_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

#include "decamp/errors.hpp"
#include "decamp/parallel.hpp"

namespace decamp {

SoftLabels soft_assign(const Matrix& z, const ClusterHead& head) {
    if (z.cols() != head.dim()) throw DimensionError("soft_assign: latent width does not match centers");
    const std::size_t k = head.k();
    SoftLabels q(z.rows(), k);
    parallel_for(z.rows(), [&](std::size_t i) {
        double* row = q.row(i);
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            row[c] = 1.0 / (1.0 + squared_distance(z.row_span(i), head.centers.row_span(c)));
            sum += row[c];
        }
        for (std::size_t c = 0; c < k; ++c) row[c] /= sum;
    });
    return q;
}

SoftAssignGrads soft_assign_backward(const Matrix& z, const ClusterHead& head, const SoftLabels& q,
                                     const Matrix& dq) {
    check_same_shape(q, dq, "soft_assign_backward");
    const std::size_t k = head.k();
    const std::size_t d = head.dim();
    SoftAssignGrads grads;
    grads.dz = Matrix(z.rows(), d);
    grads.dcenters = Matrix(k, d);
    // Serial over the batch: center gradients accumulate across samples.
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const double* qi = q.row(i);
        const double* gi = dq.row(i);
        // Through the row normalization: s_ik = (1+d_ik)^-1, q = s / sum(s).
        double weighted = 0.0;
        for (std::size_t c = 0; c < k; ++c) weighted += gi[c] * qi[c];
        double sum_s = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            sum_s += 1.0 / (1.0 + squared_distance(z.row_span(i), head.centers.row_span(c)));
        for (std::size_t c = 0; c < k; ++c) {
            const double s = qi[c] * sum_s;  // recover s_ik
            const double ds = (gi[c] - weighted) / sum_s;
            const double dd = -s * s * ds;  // d s / d dist = -s^2
            const double* mu = head.centers.row(c);
            double* dzi = grads.dz.row(i);
            double* dmu = grads.dcenters.row(c);
            const double* zi = z.row(i);
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = 2.0 * (zi[j] - mu[j]) * dd;
                dzi[j] += diff;
                dmu[j] -= diff;
            }
        }
    }
    return grads;
}

SoftLabels dec_target(const SoftLabels& q) {
    const std::size_t n = q.rows();
    const std::size_t k = q.cols();
    std::vector<double> freq(k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) freq[c] += q(i, c);
    for (std::size_t c = 0; c < k; ++c) {
        freq[c] /= static_cast<double>(n);
        if (freq[c] <= 0.0)
            throw NumericError("dec_target: empty cluster " + std::to_string(c));
    }
    SoftLabels p(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        double* row = p.row(i);
        for (std::size_t c = 0; c < k; ++c) {
            row[c] = q(i, c) * q(i, c) / freq[c];
            sum += row[c];
        }
        for (std::size_t c = 0; c < k; ++c) row[c] /= sum;
    }
    return p;
}

namespace {

// Mean prediction entropy term shared by both losses: value -xi*H(mean q),
// gradient xi*(log mean_k + 1)/|B| added onto dq.
double balance_term(const SoftLabels& q, double xi, Matrix* dq) {
    const std::size_t b = q.rows();
    const std::size_t k = q.cols();
    std::vector<double> mean(k, 0.0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t c = 0; c < k; ++c) mean[c] += q(i, c);
    double entropy = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        mean[c] /= static_cast<double>(b);
        if (mean[c] > 0.0) entropy -= mean[c] * std::log(mean[c]);
    }
    if (dq && xi != 0.0) {
        for (std::size_t c = 0; c < k; ++c) {
            const double g = xi * (floored_log(mean[c]) + 1.0) / static_cast<double>(b);
            for (std::size_t i = 0; i < b; ++i) (*dq)(i, c) += g;
        }
    }
    return -xi * entropy;
}

}  // namespace

LossResult kl_balance_loss(const SoftLabels& q, const SoftLabels& p, double xi) {
    check_same_shape(q, p, "kl_balance_loss");
    const std::size_t b = q.rows();
    const std::size_t k = q.cols();
    LossResult result;
    result.dq = Matrix(b, k);
    double kl = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            const double pv = p(i, c);
            if (pv > 0.0) {
                kl += pv * (std::log(pv) - floored_log(q(i, c)));
                result.dq(i, c) = -pv / std::max(q(i, c), kProbFloor) / static_cast<double>(b);
            }
        }
    }
    result.value = kl / static_cast<double>(b) + balance_term(q, xi, &result.dq);
    return result;
}

LossResult dece2e_loss(const SoftLabels& q, double lambda, double xi) {
    if (lambda <= 0.0 || lambda >= 1.0)
        throw std::invalid_argument("dece2e_loss: lambda must lie in (0, 1)");
    const std::size_t b = q.rows();
    const std::size_t k = q.cols();
    const double order = 1.0 / (1.0 - lambda);  // Renyi entropy order
    LossResult result;
    result.dq = Matrix(b, k);
    double renyi_sum = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) z += std::pow(q(i, c), order);
        renyi_sum += std::log(z) / (1.0 - order);
        for (std::size_t c = 0; c < k; ++c)
            result.dq(i, c) = -std::pow(q(i, c), order - 1.0) / z / static_cast<double>(b);
    }
    result.value = lambda * renyi_sum / static_cast<double>(b) + balance_term(q, xi, &result.dq);
    return result;
}

LabelVector argmax_labels(const SoftLabels& q) {
    LabelVector labels(q.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const double* row = q.row(i);
        labels[i] = static_cast<int>(std::max_element(row, row + q.cols()) - row);
    }
    return labels;
}

ClusterHead kmeans_init(const Matrix& z, std::size_t k, std::uint64_t seed, std::size_t max_iters) {
    const std::size_t n = z.rows();
    if (k < 1 || n < k) throw std::invalid_argument("kmeans_init: requires n >= k >= 1");
    ClusterHead head;
    head.centers = Matrix(k, z.cols());

    // Greedy farthest-point seeding; the seed only picks the first point.
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> chosen;
    chosen.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        const std::size_t last = chosen.back();
        for (std::size_t i = 0; i < n; ++i)
            min_dist[i] = std::min(min_dist[i], squared_distance(z.row_span(i), z.row_span(last)));
        std::size_t farthest = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (min_dist[i] > min_dist[farthest]) farthest = i;
        if (min_dist[farthest] == 0.0)
            std::cerr << "kmeans_init: degenerate data, centers coincide\n";
        chosen.push_back(farthest);
    }
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < z.cols(); ++j) head.centers(c, j) = z(chosen[c], j);

    LabelVector assign(n, -1);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        LabelVector next = kmeans_assign(z, head);
        if (next == assign) break;
        assign = std::move(next);
        Matrix sums(k, z.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assign[i]);
            ++counts[c];
            for (std::size_t j = 0; j < z.cols(); ++j) sums(c, j) += z(i, j);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its center
            for (std::size_t j = 0; j < z.cols(); ++j)
                head.centers(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        }
    }
    return head;
}

LabelVector kmeans_assign(const Matrix& z, const ClusterHead& head) {
    LabelVector assign(z.rows());
    parallel_for(z.rows(), [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < head.k(); ++c) {
            const double d = squared_distance(z.row_span(i), head.centers.row_span(c));
            if (d < best) {
                best = d;
                best_c = c;
            }
        }
        assign[i] = static_cast<int>(best_c);
    });
    return assign;
}

void ClusterConfig::validate() const {
    if (k < 2) throw std::invalid_argument("ClusterConfig: k must be at least 2");
    if (batch_size < 2 && xi > 0.0)
        throw std::invalid_argument("ClusterConfig: batch_size must be >= 2 when xi > 0");
    if (tol_label_change <= 0.0 || tol_label_change > 1.0)
        throw std::invalid_argument("ClusterConfig: tol_label_change must lie in (0, 1]");
    if (learning_rate <= 0.0) throw std::invalid_argument("ClusterConfig: learning_rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("ClusterConfig: momentum must lie in [0, 1)");
    mp.validate();
}

std::size_t reseed_empty_clusters(const Matrix& z, ClusterHead& head, SoftLabels& q) {
    std::size_t reseeded = 0;
    for (;;) {
        const LabelVector labels = argmax_labels(q);
        std::vector<std::size_t> counts(head.k(), 0);
        for (int c : labels) ++counts[static_cast<std::size_t>(c)];
        std::size_t empty = head.k();
        for (std::size_t c = 0; c < head.k(); ++c)
            if (counts[c] == 0) {
                empty = c;
                break;
            }
        if (empty == head.k()) return reseeded;
        std::size_t farthest = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < z.rows(); ++i) {
            const auto assigned = static_cast<std::size_t>(labels[i]);
            const double d = squared_distance(z.row_span(i), head.centers.row_span(assigned));
            if (d > best) {
                best = d;
                farthest = i;
            }
        }
        std::cerr << "cluster " << empty << " lost all members; reseeding from point " << farthest
                  << "\n";
        for (std::size_t j = 0; j < z.cols(); ++j) head.centers(empty, j) = z(farthest, j);
        q = soft_assign(z, head);
        ++reseeded;
    }
}

namespace {

double changed_fraction(const LabelVector& a, const LabelVector& b) {
    std::size_t changed = 0;
    for (std::size_t i = 0; i < a.size(); ++i) changed += a[i] != b[i];
    return static_cast<double>(changed) / static_cast<double>(a.size());
}

TrajectoryRow make_row(std::size_t outer, double fit_term, double bal_term,
                       const LabelVector& labels, const LabelVector* truth) {
    TrajectoryRow row;
    row.outer_iter = outer;
    row.kl_term = fit_term;
    row.balance_term = bal_term;
    if (truth) {
        row.acc = accuracy(*truth, labels);
        row.nmi = nmi(*truth, labels);
        row.ari = ari(*truth, labels);
    }
    return row;
}

// One block of mini-batch SGD steps against a fixed per-sample loss.
// loss(q_batch, batch_indices) -> LossResult.
using BatchLossFn = std::function<LossResult(const SoftLabels&, std::span<const std::size_t>)>;

class MiniBatchTrainer {
public:
    MiniBatchTrainer(const Matrix& data, DenseNet& encoder, ClusterHead& head,
                     const ClusterConfig& cfg)
        : data_(data),
          encoder_(encoder),
          head_(head),
          opt_{cfg.learning_rate, cfg.momentum, {}},
          rng_(cfg.seed),
          order_(data.rows()),
          batch_size_(std::min<std::size_t>(std::max<std::size_t>(1, cfg.batch_size), data.rows())) {
        std::iota(order_.begin(), order_.end(), 0);
        cursor_ = order_.size();  // force a shuffle on first batch
    }

    std::size_t batches_per_epoch() const {
        return (order_.size() + batch_size_ - 1) / batch_size_;
    }

    void run_steps(std::size_t steps, const BatchLossFn& loss) {
        for (std::size_t s = 0; s < steps; ++s) {
            if (cursor_ >= order_.size()) {
                std::shuffle(order_.begin(), order_.end(), rng_);
                cursor_ = 0;
            }
            const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
            const std::span<const std::size_t> idx{order_.data() + cursor_, end - cursor_};
            cursor_ = end;

            const Matrix x = data_.gather_rows(idx);
            const Matrix z = encoder_.forward_train(x);
            const SoftLabels q = soft_assign(z, head_);
            const LossResult loss_result = loss(q, idx);
            if (!std::isfinite(loss_result.value))
                throw NumericError("training loss diverged");
            const SoftAssignGrads grads = soft_assign_backward(z, head_, q, loss_result.dq);
            encoder_.backward(grads.dz);
            auto params = encoder_.parameters();
            params.push_back({{head_.centers.data(), head_.centers.size()},
                              {grads.dcenters.data(), grads.dcenters.size()}});
            opt_.step(params);
        }
    }

private:
    const Matrix& data_;
    DenseNet& encoder_;
    ClusterHead& head_;
    SgdState opt_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::size_t batch_size_;
};

}  // namespace

TrainResult run_self_training(const Matrix& data, DenseNet encoder, const ClusterConfig& cfg,
                              double xi, const TargetFn& target, const LabelVector* truth) {
    cfg.validate();
    if (encoder.input_dim() != data.cols())
        throw DimensionError("run_self_training: encoder input does not match data width");

    TrainResult result;
    result.encoder = std::move(encoder);
    result.head = kmeans_init(result.encoder.forward(data), cfg.k, cfg.seed);

    MiniBatchTrainer trainer(data, result.encoder, result.head, cfg);
    const std::size_t steps =
        cfg.update_interval > 0 ? cfg.update_interval : trainer.batches_per_epoch();

    SoftLabels p;
    LabelVector prev_labels;
    for (std::size_t outer = 0; outer < cfg.max_outer_iters; ++outer) {
        const Matrix z = result.encoder.forward(data);
        result.q = soft_assign(z, result.head);
        reseed_empty_clusters(z, result.head, result.q);
        result.labels = argmax_labels(result.q);
        result.outer_iters = outer;
        if (outer > 0 && changed_fraction(result.labels, prev_labels) < cfg.tol_label_change) break;
        prev_labels = result.labels;

        p = target(result.q);
        const LossResult full = kl_balance_loss(result.q, p, xi);
        const double bal = full.value - kl_balance_loss(result.q, p, 0.0).value;
        result.trajectory.push_back(
            make_row(outer, full.value - bal, bal, result.labels, truth));

        trainer.run_steps(steps, [&](const SoftLabels& q_batch, std::span<const std::size_t> idx) {
            return kl_balance_loss(q_batch, p.gather_rows(idx), xi);
        });
    }
    // The loop may have exited by exhausting max_outer_iters right after a
    // training block; refresh the assignment either way.
    result.q = soft_assign(result.encoder.forward(data), result.head);
    result.labels = argmax_labels(result.q);
    return result;
}

TrainResult run_dec(const Matrix& data, DenseNet encoder, const ClusterConfig& cfg,
                    const LabelVector* truth) {
    // Original self-training has no balance term.
    return run_self_training(data, std::move(encoder), cfg, 0.0,
                             [](const SoftLabels& q) { return dec_target(q); }, truth);
}

TrainResult run_decamp(const Matrix& data, const SparseAffinity& graph, DenseNet encoder,
                       const ClusterConfig& cfg, const LabelVector* truth) {
    if (graph.n != data.rows()) throw DimensionError("run_decamp: graph size does not match data");
    return run_self_training(
        data, std::move(encoder), cfg, cfg.xi,
        [&](const SoftLabels& q) { return propagate(q, graph, cfg.mp).p; }, truth);
}

TrainResult run_dece2e(const Matrix& data, DenseNet encoder, const ClusterConfig& cfg,
                       const LabelVector* truth) {
    cfg.validate();
    if (encoder.input_dim() != data.cols())
        throw DimensionError("run_dece2e: encoder input does not match data width");

    TrainResult result;
    result.encoder = std::move(encoder);
    result.head = kmeans_init(result.encoder.forward(data), cfg.k, cfg.seed);

    MiniBatchTrainer trainer(data, result.encoder, result.head, cfg);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Matrix z = result.encoder.forward(data);
        result.q = soft_assign(z, result.head);
        reseed_empty_clusters(z, result.head, result.q);
        result.labels = argmax_labels(result.q);
        result.outer_iters = epoch;

        const LossResult full = dece2e_loss(result.q, cfg.mp.lambda, cfg.xi);
        const double bal = full.value - dece2e_loss(result.q, cfg.mp.lambda, 0.0).value;
        result.trajectory.push_back(make_row(epoch, full.value - bal, bal, result.labels, truth));

        trainer.run_steps(trainer.batches_per_epoch(),
                          [&](const SoftLabels& q_batch, std::span<const std::size_t>) {
                              return dece2e_loss(q_batch, cfg.mp.lambda, cfg.xi);
                          });
    }
    const Matrix z = result.encoder.forward(data);
    result.q = soft_assign(z, result.head);
    result.labels = argmax_labels(result.q);
    return result;
}

}  // namespace decamp
