#pragma once

#include <cstdint>
#include <vector>

#include "hazebridge/common.hpp"

namespace hazebridge {

// Discrete transport plan between two histograms. Row-major m x n matrix,
// entries nonnegative and summing to 1; row/column sums match the marginals
// up to solver tolerance.
struct DiscreteCoupling {
    int64_t m = 0, n = 0;
    std::vector<real> matrix;
    std::vector<real> source_marginal;
    std::vector<real> target_marginal;

    real at(int64_t i, int64_t j) const { return matrix[i * n + j]; }

    // max of the L1 row-sum and column-sum errors
    real marginal_violation() const;
};

// Entropy-regularized transport via log-domain Sinkhorn scaling.
// Throws ConvergenceError (carrying the final violation) if the marginal
// violation is still above tol after max_iter sweeps.
DiscreteCoupling sinkhorn(const std::vector<real>& cost, int64_t m, int64_t n,
                          const std::vector<real>& a, const std::vector<real>& b, real epsilon,
                          int64_t max_iter, real tol,
                          std::vector<real>* violation_trace = nullptr);

// Exact unregularized optimum by exhausting all permutation couplings.
// Requires square instances with uniform marginals and n <= 8.
DiscreteCoupling brute_force_ot(const std::vector<real>& cost, int64_t n);

// sum_ij gamma_ij * cost_ij - 2 * tau * H(gamma), H = -sum gamma log gamma.
real entropic_objective(const DiscreteCoupling& gamma, const std::vector<real>& cost, real tau);

real transport_cost(const DiscreteCoupling& gamma, const std::vector<real>& cost);

// Pairwise squared Euclidean costs between two point lists of dimension d.
std::vector<real> squared_cost_matrix(const std::vector<real>& points0,
                                      const std::vector<real>& points1, int64_t d);

}  // namespace hazebridge
