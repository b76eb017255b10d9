#include "decamp/measure_prop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "decamp/corpus.hpp"
#include "decamp/errors.hpp"
#include "decamp/parallel.hpp"

namespace decamp {

SoftLabels uniform_labels(std::size_t n, std::size_t k) {
    return SoftLabels(n, k, 1.0 / static_cast<double>(k));
}

void row_normalize(SoftLabels& labels) {
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        double sum = 0.0;
        double* row = labels.row(i);
        for (std::size_t k = 0; k < labels.cols(); ++k) sum += row[k];
        if (sum <= 0.0) throw NumericError("row_normalize: nonpositive row sum");
        for (std::size_t k = 0; k < labels.cols(); ++k) row[k] /= sum;
    }
}

bool is_row_stochastic(const SoftLabels& labels, double tol) {
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < labels.cols(); ++k) {
            const double v = labels(i, k);
            if (v < 0.0 || !std::isfinite(v)) return false;
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

void MpConfig::validate() const {
    if (nu < 0.0) throw std::invalid_argument("MpConfig: nu must be nonnegative");
    if (lambda < 0.0 || lambda >= 1.0) throw std::invalid_argument("MpConfig: lambda must lie in [0, 1)");
    if (alpha <= 0.0) throw std::invalid_argument("MpConfig: alpha must be positive");
    if (tol <= 0.0) throw std::invalid_argument("MpConfig: tol must be positive");
}

std::vector<double> lambda_tilde(const SparseAffinity& graph, const MpConfig& cfg) {
    cfg.validate();
    std::vector<double> lt(graph.n);
    for (std::size_t i = 0; i < graph.n; ++i) {
        lt[i] = (1.0 - cfg.lambda) + cfg.nu * graph.row_sum(i);
        if (lt[i] <= 0.0) throw NumericError("lambda_tilde: nonpositive value at node " + std::to_string(i));
    }
    return lt;
}

SoftLabels update_p(const SoftLabels& q, const SoftLabels& r, const SparseAffinity& graph,
                    const MpConfig& cfg) {
    check_same_shape(q, r, "update_p");
    if (q.rows() != graph.n) throw DimensionError("update_p: label rows do not match graph size");
    const std::size_t k = q.cols();
    const std::vector<double> lt = lambda_tilde(graph, cfg);

    Matrix log_r(r.rows(), k);
    for (std::size_t idx = 0; idx < r.size(); ++idx)
        log_r.storage()[idx] = floored_log(r.storage()[idx]);

    SoftLabels p(q.rows(), k);
    parallel_for(q.rows(), [&](std::size_t i) {
        std::vector<double> score(k);
        for (std::size_t c = 0; c < k; ++c) score[c] = floored_log(q(i, c));
        for (const auto& e : graph.rows[i]) {
            const double* lr = log_r.row(e.col);
            const double w = cfg.nu * e.weight;
            for (std::size_t c = 0; c < k; ++c) score[c] += w * lr[c];
        }
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            score[c] /= lt[i];
            max_score = std::max(max_score, score[c]);
        }
        double sum = 0.0;
        double* out = p.row(i);
        for (std::size_t c = 0; c < k; ++c) {
            out[c] = std::exp(score[c] - max_score);
            sum += out[c];
        }
        if (!std::isfinite(sum) || sum <= 0.0)
            throw NumericError("update_p: non-finite row after stabilization");
        for (std::size_t c = 0; c < k; ++c) out[c] /= sum;
    });
    return p;
}

SoftLabels update_r(const SoftLabels& p, const SparseAffinity& graph) {
    if (p.rows() != graph.n) throw DimensionError("update_r: label rows do not match graph size");
    const std::size_t k = p.cols();
    SoftLabels r(graph.n, k);
    std::vector<double> in_degree(graph.n, 0.0);
    for (std::size_t i = 0; i < graph.n; ++i) {
        const double* pi = p.row(i);
        for (const auto& e : graph.rows[i]) {
            double* rj = r.row(e.col);
            for (std::size_t c = 0; c < k; ++c) rj[c] += e.weight * pi[c];
            in_degree[e.col] += e.weight;
        }
    }
    for (std::size_t j = 0; j < graph.n; ++j) {
        if (in_degree[j] <= 0.0)
            throw NumericError("update_r: zero column sum at node " + std::to_string(j));
        double* rj = r.row(j);
        for (std::size_t c = 0; c < k; ++c) rj[c] /= in_degree[j];
    }
    return r;
}

double cmp_objective(const SoftLabels& p, const SoftLabels& r, const SoftLabels& q,
                     const SparseAffinity& graph, const MpConfig& cfg) {
    cfg.validate();
    const std::size_t n = p.rows();
    const std::size_t k = p.cols();
    auto kl_rows = [&](const double* a, const double* b) {
        double kl = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            if (a[c] > 0.0) kl += a[c] * (std::log(a[c]) - floored_log(b[c]));
        return kl;
    };
    double fit = 0.0, entropy = 0.0, graph_term = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* pi = p.row(i);
        fit += kl_rows(pi, q.row(i));
        for (std::size_t c = 0; c < k; ++c)
            if (pi[c] > 0.0) entropy -= pi[c] * std::log(pi[c]);
        for (const auto& e : graph.rows[i]) graph_term += e.weight * kl_rows(pi, r.row(e.col));
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    return inv_n * fit + cfg.lambda * inv_n * entropy + cfg.nu * inv_n * graph_term;
}

PropagateResult propagate(const SoftLabels& q, const SparseAffinity& graph, const MpConfig& cfg) {
    cfg.validate();
    if (q.rows() != graph.n) throw DimensionError("propagate: label rows do not match graph size");
    PropagateResult result;
    SoftLabels r = q;
    SoftLabels prev = q;
    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        result.p = update_p(q, r, graph, cfg);
        r = update_r(result.p, graph);
        result.iterations = iter;
        if (cfg.record_objective)
            result.objective_history.push_back(cmp_objective(result.p, r, q, graph, cfg));
        if (!cfg.dump_dir.empty())
            save_matrix(cfg.dump_dir + "/mp_p_" + std::to_string(iter) + ".bin", result.p, 0);
        double delta = 0.0;
        for (std::size_t idx = 0; idx < prev.size(); ++idx)
            delta = std::max(delta, std::abs(result.p.storage()[idx] - prev.storage()[idx]));
        prev = result.p;
        if (delta < cfg.tol) break;
    }
    return result;
}

}  // namespace decamp
