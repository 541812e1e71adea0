#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "toprank/problem.hpp"
#include "toprank/state.hpp"
#include "toprank/surrogate.hpp"

namespace toprank {

enum class ThresholdKind { TopKMean, HardQuantile, SurrogateQuantile };

struct ThresholdSpec {
    ThresholdKind kind = ThresholdKind::TopKMean;
    std::size_t K = 1;                // TopKMean
    double tau = 0.05;                // quantile kinds
    SurrogateSpec surrogate_neg;      // SurrogateQuantile only

    static ThresholdSpec top_k_mean(std::size_t K) {
        if (K < 1) throw invalid_spec("TopKMean requires K >= 1");
        ThresholdSpec t;
        t.kind = ThresholdKind::TopKMean;
        t.K = K;
        return t;
    }
    static ThresholdSpec hard_quantile(double tau) {
        if (!(tau > 0.0 && tau < 1.0)) throw invalid_spec("quantile requires tau in (0,1)");
        ThresholdSpec t;
        t.kind = ThresholdKind::HardQuantile;
        t.tau = tau;
        return t;
    }
    static ThresholdSpec surrogate_quantile(double tau, const SurrogateSpec& l2) {
        ThresholdSpec t = hard_quantile(tau);
        t.kind = ThresholdKind::SurrogateQuantile;
        t.surrogate_neg = l2;
        return t;
    }
};

inline const char* to_string(ThresholdKind k) {
    switch (k) {
        case ThresholdKind::TopKMean: return "top_k_mean";
        case ThresholdKind::HardQuantile: return "hard_quantile";
        default: return "surrogate_quantile";
    }
}

// Decision threshold from negative-sample scores. n_total is the full sample
// count n: the quantile level is n*tau even though only negatives are summed.
inline double threshold(const ThresholdSpec& spec, std::span<const double> neg_scores,
                        std::size_t n_total) {
    if (neg_scores.empty()) throw degenerate_quantile("no negative scores");
    const std::size_t nn = neg_scores.size();

    if (spec.kind == ThresholdKind::TopKMean) {
        if (spec.K > nn) throw degenerate_quantile("TopKMean K exceeds negative count");
        std::vector<double> sorted(neg_scores.begin(), neg_scores.end());
        std::partial_sort(sorted.begin(), sorted.begin() + spec.K, sorted.end(),
                          std::greater<>());
        double acc = 0.0;
        for (std::size_t j = 0; j < spec.K; ++j) acc += sorted[j];
        return acc / static_cast<double>(spec.K);
    }

    const double n_tau = spec.tau * static_cast<double>(n_total);
    if (spec.kind == ThresholdKind::HardQuantile) {
        if (n_tau < 1.0) throw degenerate_quantile("n*tau < 1");
        const auto rank = static_cast<std::size_t>(std::ceil(n_tau));
        if (rank > nn) throw degenerate_quantile("n*tau exceeds negative count");
        std::vector<double> sorted(neg_scores.begin(), neg_scores.end());
        std::partial_sort(sorted.begin(), sorted.begin() + rank, sorted.end(), std::greater<>());
        return sorted[rank - 1];
    }

    // SurrogateQuantile: unique t with sum_j l2(s_j - t) = n*tau, found by
    // bisection. The sum is continuous, non-increasing in t and strictly
    // decreasing wherever positive.
    const double th2 = spec.surrogate_neg.theta;
    const auto [mn, mx] = std::minmax_element(neg_scores.begin(), neg_scores.end());
    double lo = *mn - (1.0 + 1.0 / th2);
    double hi = *mx + (1.0 + 1.0 / th2);
    auto surplus = [&](double t) {
        double acc = 0.0;
        for (double s : neg_scores) acc += loss(spec.surrogate_neg, s - t);
        return acc - n_tau;
    };
    if (surplus(lo) < 0.0) throw degenerate_quantile("n*tau unreachable by surrogate quantile");
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        (surplus(mid) >= 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Per-sample primal scores w^T x recovered from the signed score vector:
// positive-block entries equal w^T x+, negative-block entries equal -w^T x-.
inline std::vector<double> negative_primal_scores(const SolverState& state) {
    const std::size_t np = state.n_pos();
    std::vector<double> out(state.n_neg());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = -state.scores[np + j];
    return out;
}

inline ThresholdSpec primal_threshold_spec(const ProblemSpec& problem) {
    if (problem.kind == ProblemKind::TopPushK) return ThresholdSpec::top_k_mean(problem.K);
    return ThresholdSpec::surrogate_quantile(problem.tau, problem.surrogate_neg);
}

// Primal objective 1/2 ||w||^2 + C sum_i l1(t - w^T x_i+) evaluated at the
// dual iterate, with ||w||^2 = [alpha;beta]^T s and t from the problem's own
// threshold rule. Returns (value, t).
inline std::pair<double, double> primal_objective(const ProblemSpec& problem,
                                                  const SolverState& state) {
    const std::size_t np = state.n_pos();
    double quad = 0.0;
    for (std::size_t i = 0; i < np; ++i) quad += state.alpha[i] * state.scores[i];
    for (std::size_t j = 0; j < state.n_neg(); ++j)
        quad += state.beta[j] * state.scores[np + j];

    const std::vector<double> neg = negative_primal_scores(state);
    const double t = threshold(primal_threshold_spec(problem), neg, state.n());

    double lsum = 0.0;
    for (std::size_t i = 0; i < np; ++i) lsum += loss(problem.surrogate_pos, t - state.scores[i]);
    return {0.5 * quad + problem.C * lsum, t};
}

}  // namespace toprank
