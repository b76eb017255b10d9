#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "decamp/matrix.hpp"

namespace decamp {

// Sparse nonnegative affinity matrix stored as per-row adjacency lists
// sorted by column index. Immutable once the construction pipeline
// (knn -> symmetrize -> self links -> normalize) has run.
struct SparseAffinity {
    struct Edge {
        std::size_t col;
        double weight;
        bool operator==(const Edge&) const = default;
    };

    std::size_t n = 0;
    std::vector<std::vector<Edge>> rows;

    double row_sum(std::size_t i) const {
        double s = 0.0;
        for (const auto& e : rows[i]) s += e.weight;
        return s;
    }
    std::size_t nnz() const {
        std::size_t count = 0;
        for (const auto& row : rows) count += row.size();
        return count;
    }
    bool operator==(const SparseAffinity&) const = default;
};

// Binary m-nearest-neighbor graph under cosine similarity (rows are assumed
// l2-normalized so cosine is the dot product). Exact search; similarity ties
// break toward the smaller index. No self edges.
SparseAffinity knn_graph(const Matrix& data, std::size_t m);

// OR-symmetrization of a binary graph: keep an edge when either direction had one.
SparseAffinity symmetrize(const SparseAffinity& graph);

// Adds alpha to every diagonal entry (alpha > 0).
SparseAffinity add_self_links(const SparseAffinity& graph, double alpha);

// Symmetric degree normalization w_ij <- w_ij / sqrt(d_i d_j) with d the
// pre-normalization row sums. Requires every row sum positive.
SparseAffinity normalize(const SparseAffinity& graph);

// knn -> symmetrize -> self links -> normalize.
SparseAffinity build_affinity(const Matrix& data, std::size_t m, double alpha);

// Text coordinate-list file with an n/m/alpha header plus the producing
// config hash, so a cached graph can be reused across runs.
void save_graph(const std::string& path, const SparseAffinity& graph, std::size_t m, double alpha,
                std::uint64_t config_hash);
struct GraphFile {
    SparseAffinity graph;
    std::size_t m = 0;
    double alpha = 0.0;
    std::uint64_t config_hash = 0;
};
GraphFile load_graph(const std::string& path);

}  // namespace decamp
