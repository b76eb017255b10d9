#include "decamp/affinity_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "decamp/errors.hpp"
#include "decamp/parallel.hpp"

namespace decamp {

SparseAffinity knn_graph(const Matrix& data, std::size_t m) {
    const std::size_t n = data.rows();
    if (m == 0) throw std::invalid_argument("knn_graph: m must be positive");
    if (m >= n) throw std::invalid_argument("knn_graph: m must be smaller than the point count");

    SparseAffinity graph;
    graph.n = n;
    graph.rows.resize(n);
    parallel_for(n, [&](std::size_t i) {
        // (-similarity, index) so nth_element picks the m most similar,
        // ties toward the smaller index.
        std::vector<std::pair<double, std::size_t>> sims;
        sims.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sims.emplace_back(-dot(data.row_span(i), data.row_span(j)), j);
        }
        std::nth_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(m - 1), sims.end());
        sims.resize(m);
        std::sort(sims.begin(), sims.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
        auto& row = graph.rows[i];
        row.reserve(m);
        for (const auto& [neg_sim, j] : sims) row.push_back({j, 1.0});
    });
    return graph;
}

SparseAffinity symmetrize(const SparseAffinity& graph) {
    SparseAffinity out;
    out.n = graph.n;
    out.rows.resize(graph.n);
    for (std::size_t i = 0; i < graph.n; ++i) {
        for (const auto& e : graph.rows[i]) {
            out.rows[i].push_back({e.col, 1.0});
            out.rows[e.col].push_back({i, 1.0});
        }
    }
    for (auto& row : out.rows) {
        std::sort(row.begin(), row.end(),
                  [](const auto& a, const auto& b) { return a.col < b.col; });
        row.erase(std::unique(row.begin(), row.end(),
                              [](const auto& a, const auto& b) { return a.col == b.col; }),
                  row.end());
    }
    return out;
}

SparseAffinity add_self_links(const SparseAffinity& graph, double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("add_self_links: alpha must be positive");
    SparseAffinity out = graph;
    for (std::size_t i = 0; i < out.n; ++i) {
        auto& row = out.rows[i];
        auto it = std::lower_bound(row.begin(), row.end(), i,
                                   [](const auto& e, std::size_t col) { return e.col < col; });
        if (it != row.end() && it->col == i)
            it->weight += alpha;
        else
            row.insert(it, {i, alpha});
    }
    return out;
}

SparseAffinity normalize(const SparseAffinity& graph) {
    std::vector<double> degree(graph.n);
    for (std::size_t i = 0; i < graph.n; ++i) {
        degree[i] = graph.row_sum(i);
        if (degree[i] <= 0.0) throw NumericError("normalize: zero row sum at node " + std::to_string(i));
    }
    SparseAffinity out = graph;
    for (std::size_t i = 0; i < out.n; ++i)
        for (auto& e : out.rows[i]) e.weight /= std::sqrt(degree[i] * degree[e.col]);
    return out;
}

SparseAffinity build_affinity(const Matrix& data, std::size_t m, double alpha) {
    return normalize(add_self_links(symmetrize(knn_graph(data, m)), alpha));
}

void save_graph(const std::string& path, const SparseAffinity& graph, std::size_t m, double alpha,
                std::uint64_t config_hash) {
    std::ofstream out(path);
    if (!out) throw FileMissingError("cannot write file: " + path);
    out << "decamp-graph 1\n";
    out << "n " << graph.n << " m " << m << " alpha " << alpha << " hash " << std::hex
        << config_hash << std::dec << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < graph.n; ++i)
        for (const auto& e : graph.rows[i]) out << i << ' ' << e.col << ' ' << e.weight << '\n';
    if (!out) throw FormatError("short write: " + path);
}

GraphFile load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileMissingError("cannot open file: " + path);
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "decamp-graph" || version != 1)
        throw FormatError("not a graph file: " + path);
    GraphFile file;
    std::string key;
    std::size_t n = 0;
    if (!(in >> key >> n) || key != "n") throw FormatError("bad graph header in " + path);
    if (!(in >> key >> file.m) || key != "m") throw FormatError("bad graph header in " + path);
    if (!(in >> key >> file.alpha) || key != "alpha") throw FormatError("bad graph header in " + path);
    if (!(in >> key >> std::hex >> file.config_hash >> std::dec) || key != "hash")
        throw FormatError("bad graph header in " + path);
    file.graph.n = n;
    file.graph.rows.resize(n);
    std::size_t i, j;
    double w;
    while (in >> i >> j >> w) {
        if (i >= n || j >= n) throw FormatError("edge index out of range in " + path);
        file.graph.rows[i].push_back({j, w});
    }
    if (!in.eof()) throw FormatError("malformed edge line in " + path);
    return file;
}

}  // namespace decamp
