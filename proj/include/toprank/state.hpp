#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "toprank/errors.hpp"

namespace toprank {

// Dual iterate shared between the problem formulas and the solver driver.
// Indexing is positives-first: alpha has length n_pos, beta length n_neg,
// scores length n_pos + n_neg with scores = K * [alpha; beta].
struct SolverState {
    std::vector<double> alpha;
    std::vector<double> beta;
    double delta_mult = 0.0;  // PatMat multiplier; 0 and unused for TopPushK
    std::vector<double> scores;
    double sum_alpha = 0.0;
    double sum_beta_sq = 0.0;
    std::uint64_t loop_count = 0;
    std::mt19937_64 rng;

    std::size_t n_pos() const { return alpha.size(); }
    std::size_t n_neg() const { return beta.size(); }
    std::size_t n() const { return alpha.size() + beta.size(); }

    double dual_variable(std::size_t global_index) const {
        return global_index < alpha.size() ? alpha[global_index]
                                           : beta[global_index - alpha.size()];
    }

    // Recompute the cached sums from scratch; called periodically to bound
    // incremental drift.
    void refresh_sums() {
        double sa = 0.0;
        for (double a : alpha) sa += a;
        sum_alpha = sa;
        double sb2 = 0.0;
        for (double b : beta) sb2 += b * b;
        sum_beta_sq = sb2;
    }
};

}  // namespace toprank
