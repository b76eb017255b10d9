#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "decamp/affinity_graph.hpp"
#include "decamp/matrix.hpp"

namespace decamp {

// n x K row-stochastic table. The same shape serves three roles: network
// predictions q, pseudo-labels p, auxiliary labels r.
using SoftLabels = Matrix;

// Floor applied inside logarithms so KL terms stay finite at exact zeros.
inline constexpr double kProbFloor = 1e-30;

inline double floored_log(double x) {
    return std::log(x < kProbFloor ? kProbFloor : x);
}

SoftLabels uniform_labels(std::size_t n, std::size_t k);
void row_normalize(SoftLabels& labels);
bool is_row_stochastic(const SoftLabels& labels, double tol = 1e-9);

struct MpConfig {
    double nu = 0.5;      // graph coupling strength
    double lambda = 0.5;  // pseudo-label entropy weight, must stay < 1
    double alpha = 1.0;   // self-link weight used at graph build time
    std::size_t max_iters = 100;
    double tol = 1e-4;             // max-abs change in p between iterations
    bool record_objective = false;  // keep per-iteration objective values
    std::string dump_dir;           // when set, write p after each iteration (debug)

    void validate() const;
};

// lambda_i = (1 - lambda) + nu * sum_j w_ij over the normalized graph.
std::vector<double> lambda_tilde(const SparseAffinity& graph, const MpConfig& cfg);

// p_ik proportional to exp((log q_ik + nu * sum_j w_ij log r_jk) / lambda_i),
// row-normalized via log-sum-exp.
SoftLabels update_p(const SoftLabels& q, const SoftLabels& r, const SparseAffinity& graph,
                    const MpConfig& cfg);

// r_jk = sum_i w_ij p_ik / sum_i w_ij (graph-weighted average over incoming edges).
SoftLabels update_r(const SoftLabels& p, const SparseAffinity& graph);

// Objective the alternating updates descend on at fixed network output q:
//   (1/n) sum_i KL(p_i||q_i) + (lambda/n) sum_i H(p_i)
//   + (nu/n) sum_ij w_ij KL(p_i||r_j)
// Natural log, 0*log 0 = 0. The balance term is constant in (p, r) and
// excluded.
double cmp_objective(const SoftLabels& p, const SoftLabels& r, const SoftLabels& q,
                     const SparseAffinity& graph, const MpConfig& cfg);

struct PropagateResult {
    SoftLabels p;
    std::size_t iterations = 0;
    std::vector<double> objective_history;  // per iteration, when recorded
};

// Alternates update_p / update_r from r = q until the max-abs change in p
// drops below tol or max_iters is reached.
PropagateResult propagate(const SoftLabels& q, const SparseAffinity& graph, const MpConfig& cfg);

}  // namespace decamp
