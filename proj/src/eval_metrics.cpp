#include "decamp/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "decamp/errors.hpp"

namespace decamp {

namespace {

std::size_t label_range(const LabelVector& v) {
    int max_label = -1;
    for (int x : v) {
        if (x < 0) throw std::invalid_argument("labels must be nonnegative");
        max_label = std::max(max_label, x);
    }
    return static_cast<std::size_t>(max_label + 1);
}

double comb2(std::int64_t x) { return x < 2 ? 0.0 : 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

}  // namespace

Contingency build_contingency(const LabelVector& y, const LabelVector& c) {
    if (y.size() != c.size()) throw DimensionError("contingency: label vectors differ in length");
    Contingency t;
    t.n_true = label_range(y);
    t.n_pred = label_range(c);
    t.total = static_cast<std::int64_t>(y.size());
    t.counts.assign(t.n_true * t.n_pred, 0);
    t.row_sums.assign(t.n_true, 0);
    t.col_sums.assign(t.n_pred, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto a = static_cast<std::size_t>(y[i]);
        const auto b = static_cast<std::size_t>(c[i]);
        ++t.counts[a * t.n_pred + b];
        ++t.row_sums[a];
        ++t.col_sums[b];
    }
    return t;
}

// Shortest-augmenting-path formulation with row/column potentials, O(n^3).
std::vector<std::size_t> hungarian(const Matrix& cost) {
    if (cost.rows() != cost.cols()) throw DimensionError("hungarian: cost matrix must be square");
    const std::size_t n = cost.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (!std::isfinite(cost(i, j))) throw NumericError("hungarian: non-finite cost entry");

    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; index 0 is the virtual unmatched column.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0);  // column -> row
    for (std::size_t i = 1; i <= n; ++i) {
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        std::vector<std::size_t> way(n + 1, 0);
        std::size_t j0 = 0;
        match[0] = i;
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        // Augment along the alternating path.
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n, 0);
    for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
    return assignment;
}

double accuracy(const LabelVector& y, const LabelVector& c) {
    if (y.size() != c.size()) throw DimensionError("accuracy: label vectors differ in length");
    if (y.empty()) throw std::invalid_argument("accuracy: empty labels");
    const Contingency t = build_contingency(y, c);
    const std::size_t k = std::max(t.n_true, t.n_pred);
    // Maximize matched counts == minimize negated counts, padded square.
    Matrix cost(k, k, 0.0);
    for (std::size_t i = 0; i < t.n_true; ++i)
        for (std::size_t j = 0; j < t.n_pred; ++j)
            cost(i, j) = -static_cast<double>(t.at(i, j));
    const auto assign = hungarian(cost);
    std::int64_t matched = 0;
    for (std::size_t i = 0; i < t.n_true; ++i)
        if (assign[i] < t.n_pred) matched += t.at(i, assign[i]);
    return static_cast<double>(matched) / static_cast<double>(t.total);
}

bool same_partition(const LabelVector& y, const LabelVector& c) {
    if (y.size() != c.size()) return false;
    const Contingency t = build_contingency(y, c);
    // Identical partitions <=> every nonempty row hits exactly one column and
    // vice versa.
    for (std::size_t i = 0; i < t.n_true; ++i) {
        std::size_t nonzero = 0;
        for (std::size_t j = 0; j < t.n_pred; ++j) nonzero += t.at(i, j) > 0;
        if (t.row_sums[i] > 0 && nonzero != 1) return false;
    }
    for (std::size_t j = 0; j < t.n_pred; ++j) {
        std::size_t nonzero = 0;
        for (std::size_t i = 0; i < t.n_true; ++i) nonzero += t.at(i, j) > 0;
        if (t.col_sums[j] > 0 && nonzero != 1) return false;
    }
    return true;
}

double nmi(const LabelVector& y, const LabelVector& c) {
    if (y.size() != c.size()) throw DimensionError("nmi: label vectors differ in length");
    if (y.empty()) throw std::invalid_argument("nmi: empty labels");
    const Contingency t = build_contingency(y, c);
    const double n = static_cast<double>(t.total);
    double hy = 0.0, hc = 0.0, mi = 0.0;
    for (std::size_t i = 0; i < t.n_true; ++i) {
        const double p = t.row_sums[i] / n;
        if (p > 0) hy -= p * std::log(p);
    }
    for (std::size_t j = 0; j < t.n_pred; ++j) {
        const double p = t.col_sums[j] / n;
        if (p > 0) hc -= p * std::log(p);
    }
    if (hy == 0.0 || hc == 0.0) return same_partition(y, c) ? 1.0 : 0.0;
    for (std::size_t i = 0; i < t.n_true; ++i) {
        for (std::size_t j = 0; j < t.n_pred; ++j) {
            const auto nij = t.at(i, j);
            if (nij == 0) continue;
            const double pij = nij / n;
            mi += pij * std::log(pij * n * n / (static_cast<double>(t.row_sums[i]) * static_cast<double>(t.col_sums[j])));
        }
    }
    // Rounding can push the plug-in MI a hair outside [0, H]; clamp the ratio.
    return std::clamp(mi / std::sqrt(hy * hc), 0.0, 1.0);
}

double ari(const LabelVector& y, const LabelVector& c) {
    if (y.size() != c.size()) throw DimensionError("ari: label vectors differ in length");
    if (y.size() < 2) throw std::invalid_argument("ari: needs at least two samples");
    const Contingency t = build_contingency(y, c);
    double sum_ij = 0.0;
    for (std::size_t i = 0; i < t.n_true; ++i)
        for (std::size_t j = 0; j < t.n_pred; ++j) sum_ij += comb2(t.at(i, j));
    double sum_a = 0.0, sum_b = 0.0;
    for (auto a : t.row_sums) sum_a += comb2(a);
    for (auto b : t.col_sums) sum_b += comb2(b);
    const double expected = sum_a * sum_b / comb2(t.total);
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return same_partition(y, c) ? 1.0 : 0.0;
    return (sum_ij - expected) / (max_index - expected);
}

}  // namespace decamp
