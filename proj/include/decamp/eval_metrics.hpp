#pragma once

#include <cstdint>
#include <vector>

#include "decamp/matrix.hpp"

namespace decamp {

using LabelVector = std::vector<int>;

// Co-occurrence counts between true classes (rows) and predicted clusters
// (columns). Labels may be any nonnegative ids; rows/cols span [0, max+1).
struct Contingency {
    std::vector<std::int64_t> counts;  // row-major, n_true x n_pred
    std::vector<std::int64_t> row_sums;
    std::vector<std::int64_t> col_sums;
    std::size_t n_true = 0;
    std::size_t n_pred = 0;
    std::int64_t total = 0;

    std::int64_t at(std::size_t i, std::size_t j) const { return counts[i * n_pred + j]; }
};

Contingency build_contingency(const LabelVector& y, const LabelVector& c);

// Minimum-cost assignment on a square cost matrix. Returns per-row column
// choices; optimal for any finite costs.
std::vector<std::size_t> hungarian(const Matrix& cost);

// Clustering accuracy under the best one-to-one cluster-to-class matching.
double accuracy(const LabelVector& y, const LabelVector& c);

// Mutual information normalized by the geometric mean of the two entropies.
// If either partition has zero entropy: 1 when the partitions are identical,
// 0 otherwise.
double nmi(const LabelVector& y, const LabelVector& c);

// Adjusted Rand index (pair-counting, corrected for chance). Range [-1, 1];
// 1 iff the partitions are identical.
double ari(const LabelVector& y, const LabelVector& c);

// True when the two labelings induce the same partition of the index set.
bool same_partition(const LabelVector& y, const LabelVector& c);

}  // namespace decamp
