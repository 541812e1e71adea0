#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "toprank/kernel.hpp"
#include "toprank/state.hpp"
#include "toprank/surrogate.hpp"

namespace toprank {

enum class ProblemKind { TopPushK, PatMat };

// Which classifier is being trained. TopPush is TopPushK with K = 1.
// PatMat carries two surrogates: surrogate_pos penalizes positives below the
// threshold, surrogate_neg defines the surrogate quantile.
struct ProblemSpec {
    ProblemKind kind = ProblemKind::TopPushK;
    std::size_t K = 1;   // TopPushK only
    double tau = 0.05;   // PatMat only
    double C = 1.0;
    SurrogateSpec surrogate_pos;
    SurrogateSpec surrogate_neg;

    static ProblemSpec top_push(double C, const SurrogateSpec& s) {
        return top_push_k(1, C, s);
    }
    static ProblemSpec top_push_k(std::size_t K, double C, const SurrogateSpec& s) {
        ProblemSpec p;
        p.kind = ProblemKind::TopPushK;
        p.K = K;
        p.C = C;
        p.surrogate_pos = s;
        p.surrogate_neg = s;
        p.check();
        return p;
    }
    static ProblemSpec pat_mat(double tau, double C, const SurrogateSpec& pos,
                               const SurrogateSpec& neg) {
        ProblemSpec p;
        p.kind = ProblemKind::PatMat;
        p.tau = tau;
        p.C = C;
        p.surrogate_pos = pos;
        p.surrogate_neg = neg;
        p.check();
        return p;
    }

    void check() const {
        if (!(C > 0.0)) throw invalid_spec("C must be positive");
        if (kind == ProblemKind::TopPushK) {
            if (K < 1) throw invalid_spec("TopPushK requires K >= 1");
        } else {
            if (!(tau > 0.0 && tau < 1.0)) throw invalid_spec("PatMat requires tau in (0,1)");
            if (surrogate_pos.family != surrogate_neg.family)
                throw invalid_spec("PatMat requires the same surrogate family on both sides");
        }
    }

    // Data-dependent feasibility of the spec itself.
    void validate_for(std::size_t n_pos, std::size_t n_neg) const {
        check();
        if (n_pos == 0 || n_neg == 0)
            throw infeasible_config("need at least one sample of each class");
        if (kind == ProblemKind::TopPushK && K > n_neg)
            throw infeasible_config("TopPushK requires K <= number of negative samples");
        if (kind == ProblemKind::PatMat && tau * static_cast<double>(n_pos + n_neg) < 1.0)
            throw infeasible_config("PatMat requires tau * n >= 1");
    }

    bool quadratic() const {
        return surrogate_pos.family == SurrogateFamily::TruncatedQuadratic;
    }
};

enum class UpdateRule { PosPos = 0, PosNeg = 1, NegNeg = 2 };

// Outcome of one closed-form two-coordinate line optimization.
// delta_star = clip(delta_lb, delta_ub, gamma); applying it to a feasible
// state keeps the state feasible and changes the dual objective by
// objective_gain exactly (up to rounding).
struct StepCandidate {
    UpdateRule rule = UpdateRule::PosPos;
    std::size_t k = 0;  // global index receiving +delta
    std::size_t l = 0;  // global partner index
    double delta_lb = 0.0;
    double delta_ub = 0.0;
    double gamma = 0.0;
    double delta_star = 0.0;
    std::optional<double> new_delta_mult;  // PatMat multiplier after the step
    double objective_gain = 0.0;
};

struct FeasibilityReport {
    bool ok = true;
    std::string violation;

    explicit operator bool() const { return ok; }
};

// Kernel and score entries a step formula needs; fetched once per candidate.
struct PairEntries {
    double s_k = 0.0;
    double s_l = 0.0;
    double k_kk = 0.0;
    double k_ll = 0.0;
    double k_kl = 0.0;
};

// Per-loop caches shared by all candidates of one scan.
struct StepContext {
    double sum_alpha = 0.0;
    double sum_beta_sq = 0.0;
    // Largest three beta values with their beta-indices, descending.
    // Missing slots hold value 0 and index npos (beta_max over an empty set
    // is defined as 0).
    std::array<std::pair<double, std::size_t>, 3> beta_top{};
    std::size_t valid_top = 0;
};

inline StepContext make_step_context(const SolverState& state) {
    StepContext ctx;
    ctx.sum_alpha = state.sum_alpha;
    ctx.sum_beta_sq = state.sum_beta_sq;
    constexpr auto npos = std::numeric_limits<std::size_t>::max();
    for (auto& slot : ctx.beta_top) slot = {0.0, npos};
    for (std::size_t j = 0; j < state.beta.size(); ++j) {
        const double b = state.beta[j];
        if (b > ctx.beta_top[0].first) {
            ctx.beta_top[2] = ctx.beta_top[1];
            ctx.beta_top[1] = ctx.beta_top[0];
            ctx.beta_top[0] = {b, j};
        } else if (b > ctx.beta_top[1].first) {
            ctx.beta_top[2] = ctx.beta_top[1];
            ctx.beta_top[1] = {b, j};
        } else if (b > ctx.beta_top[2].first) {
            ctx.beta_top[2] = {b, j};
        }
    }
    ctx.valid_top = std::min<std::size_t>(3, state.beta.size());
    return ctx;
}

inline double beta_max_excluding(const StepContext& ctx, std::size_t skip) {
    for (const auto& [v, idx] : ctx.beta_top)
        if (idx != skip) return v;
    return 0.0;
}

inline double beta_max_excluding(const StepContext& ctx, std::size_t skip_a, std::size_t skip_b) {
    for (const auto& [v, idx] : ctx.beta_top)
        if (idx != skip_a && idx != skip_b) return v;
    return 0.0;
}

namespace detail {

constexpr double kDegenerateDenominator = 1e-14;
constexpr double kFeasibilityTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

inline double clip(double lb, double ub, double x) { return std::min(ub, std::max(lb, x)); }

// delta* maximizing -delta*S(beta')/(4 theta^2 n tau) ... the PatMat
// quadratic multiplier in closed form from the post-step sum of squares.
inline double patmat_quadratic_delta(double sum_beta_sq, double theta_neg, double n_tau) {
    if (sum_beta_sq <= 0.0) return 0.0;
    return std::sqrt(sum_beta_sq / (4.0 * theta_neg * theta_neg * n_tau));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feasibility
// ---------------------------------------------------------------------------

inline FeasibilityReport is_feasible(const ProblemSpec& problem, const SolverState& state) {
    const double tol = detail::kFeasibilityTol;
    auto fail = [](std::string msg) { return FeasibilityReport{false, std::move(msg)}; };

    double sum_alpha = 0.0;
    for (std::size_t i = 0; i < state.alpha.size(); ++i) {
        const double a = state.alpha[i];
        if (!std::isfinite(a)) return fail("alpha[" + std::to_string(i) + "] is not finite");
        if (a < -tol) return fail("alpha[" + std::to_string(i) + "] < 0");
        sum_alpha += a;
    }
    double sum_beta = 0.0;
    for (std::size_t j = 0; j < state.beta.size(); ++j) {
        const double b = state.beta[j];
        if (!std::isfinite(b)) return fail("beta[" + std::to_string(j) + "] is not finite");
        if (b < -tol) return fail("beta[" + std::to_string(j) + "] < 0");
        sum_beta += b;
    }
    const double sum_scale = std::max(1.0, std::abs(sum_alpha));
    if (std::abs(sum_alpha - sum_beta) > tol * sum_scale)
        return fail("sum(alpha) != sum(beta)");

    const bool hinge = problem.surrogate_pos.family == SurrogateFamily::Hinge;
    if (hinge) {
        const double cap = problem.C * problem.surrogate_pos.theta;
        for (std::size_t i = 0; i < state.alpha.size(); ++i)
            if (state.alpha[i] > cap + tol * std::max(1.0, cap))
                return fail("alpha[" + std::to_string(i) + "] > C*theta");
    }

    if (problem.kind == ProblemKind::TopPushK) {
        const double cap = sum_alpha / static_cast<double>(problem.K);
        for (std::size_t j = 0; j < state.beta.size(); ++j)
            if (state.beta[j] > cap + tol * sum_scale)
                return fail("beta[" + std::to_string(j) + "] > sum(alpha)/K");
    } else {
        const double delta = state.delta_mult;
        if (!std::isfinite(delta) || delta < -tol) return fail("delta < 0");
        if (hinge) {
            const double cap = delta * problem.surrogate_neg.theta;
            for (std::size_t j = 0; j < state.beta.size(); ++j)
                if (state.beta[j] > cap + tol * std::max(1.0, cap))
                    return fail("beta[" + std::to_string(j) + "] > delta*theta2");
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Dual objective
// ---------------------------------------------------------------------------

// Exact dual objective in O(n) using the cached score vector:
// -1/2 [alpha;beta]^T s plus the conjugate terms of the bound combination.
// Returns -infinity for a PatMat quadratic state with delta == 0 and some
// beta > 0 (perspective convention). Throws infeasible_state when a dual
// constraint or conjugate domain is violated.
inline double dual_objective(const ProblemSpec& problem, const SolverState& state) {
    if (auto rep = is_feasible(problem, state); !rep)
        throw infeasible_state("dual state infeasible: " + rep.violation);

    const std::size_t npos = state.n_pos();
    double quad = 0.0;
    double sum_a = 0.0, sum_a2 = 0.0;
    for (std::size_t i = 0; i < npos; ++i) {
        quad += state.alpha[i] * state.scores[i];
        sum_a += state.alpha[i];
        sum_a2 += state.alpha[i] * state.alpha[i];
    }
    double sum_b = 0.0, sum_b2 = 0.0;
    for (std::size_t j = 0; j < state.beta.size(); ++j) {
        quad += state.beta[j] * state.scores[npos + j];
        sum_b += state.beta[j];
        sum_b2 += state.beta[j] * state.beta[j];
    }

    double value = -0.5 * quad;
    const double c = problem.C;
    const double th1 = problem.surrogate_pos.theta;
    if (problem.quadratic())
        value += sum_a / th1 - sum_a2 / (4.0 * c * th1 * th1);
    else
        value += sum_a / th1;

    if (problem.kind == ProblemKind::PatMat) {
        const double th2 = problem.surrogate_neg.theta;
        const double n_tau = problem.tau * static_cast<double>(state.n());
        const double delta = state.delta_mult;
        if (problem.quadratic()) {
            value += sum_b / th2;
            if (delta > 0.0)
                value -= sum_b2 / (4.0 * delta * th2 * th2);
            else if (sum_b2 > 0.0)
                return -detail::kInf;  // perspective of l2* at delta = 0
            value -= delta * n_tau;
        } else {
            value += sum_b / th2 - delta * n_tau;
        }
    }
    return value;
}

inline double dual_objective(const ProblemSpec& problem, const KernelMatrix&, const SolverState& state) {
    return dual_objective(problem, state);
}

// ---------------------------------------------------------------------------
// Closed-form steps
// ---------------------------------------------------------------------------

namespace detail {

// Quadratic ascent candidate for gain(delta) = -num*delta - denom*delta^2/2
// over [lb, ub]. Returns nullopt for degenerate denominators or empty
// intervals (both only arise from rounding noise or coincident columns).
inline std::optional<StepCandidate> quadratic_candidate(UpdateRule rule, std::size_t k,
                                                        std::size_t l, double lb, double ub,
                                                        double num, double denom) {
    if (!(denom > kDegenerateDenominator)) return std::nullopt;
    if (!(lb <= ub)) return std::nullopt;
    StepCandidate cand;
    cand.rule = rule;
    cand.k = k;
    cand.l = l;
    cand.delta_lb = lb;
    cand.delta_ub = ub;
    cand.gamma = -num / denom;
    cand.delta_star = clip(lb, ub, cand.gamma);
    cand.objective_gain = -num * cand.delta_star - 0.5 * denom * cand.delta_star * cand.delta_star;
    return cand;
}

}  // namespace detail

// Rule (a,a): alpha_k += delta, alpha_l -= delta. k, l are positive-sample
// indices, k != l.
inline std::optional<StepCandidate> step_pospos(const ProblemSpec& problem,
                                                const PairEntries& e, const SolverState& state,
                                                const StepContext& /*ctx*/, std::size_t k,
                                                std::size_t l) {
    const double ak = state.alpha[k];
    const double al = state.alpha[l];
    const double q = e.k_kk + e.k_ll - 2.0 * e.k_kl;
    const double th = problem.surrogate_pos.theta;
    const double c = problem.C;

    double lb, ub, num, denom;
    if (problem.quadratic()) {
        lb = -ak;
        ub = al;
        denom = q + 1.0 / (c * th * th);
        num = e.s_k - e.s_l + (ak - al) / (2.0 * c * th * th);
    } else {
        const double cap = c * th;
        lb = std::max(-ak, al - cap);
        ub = std::min(cap - ak, al);
        denom = q;
        num = e.s_k - e.s_l;
    }
    auto cand = detail::quadratic_candidate(UpdateRule::PosPos, k, l, lb, ub, num, denom);
    if (cand && problem.kind == ProblemKind::PatMat) cand->new_delta_mult = state.delta_mult;
    return cand;
}

// Rule (a,b): alpha_k += delta, beta_{l-npos} += delta. k is a positive
// index, l a global negative index.
inline std::optional<StepCandidate> step_posneg(const ProblemSpec& problem,
                                                const PairEntries& e, const SolverState& state,
                                                const StepContext& ctx, std::size_t k,
                                                std::size_t l) {
    const std::size_t npos = state.n_pos();
    const std::size_t lh = l - npos;
    const double ak = state.alpha[k];
    const double bl = state.beta[lh];
    const double q = e.k_kk + e.k_ll + 2.0 * e.k_kl;
    const double c = problem.C;
    const double th1 = problem.surrogate_pos.theta;

    if (problem.kind == ProblemKind::TopPushK) {
        const double sum_a = ctx.sum_alpha;
        double lb, ub;
        if (problem.K == 1) {
            lb = std::max(-ak, -bl);
            ub = detail::kInf;
        } else {
            const double bmax = beta_max_excluding(ctx, lh);
            lb = std::max({-ak, -bl, static_cast<double>(problem.K) * bmax - sum_a});
            ub = (sum_a - static_cast<double>(problem.K) * bl) /
                 (static_cast<double>(problem.K) - 1.0);
        }
        double num, denom;
        if (problem.quadratic()) {
            denom = q + 1.0 / (2.0 * c * th1 * th1);
            num = e.s_k + e.s_l - 1.0 / th1 + ak / (2.0 * c * th1 * th1);
        } else {
            ub = std::min(ub, c * th1 - ak);
            denom = q;
            num = e.s_k + e.s_l - 1.0 / th1;
        }
        return detail::quadratic_candidate(UpdateRule::PosNeg, k, l, lb, ub, num, denom);
    }

    // PatMat
    const double th2 = problem.surrogate_neg.theta;
    const double n_tau = problem.tau * static_cast<double>(state.n());
    const double delta = state.delta_mult;
    if (problem.quadratic()) {
        if (!(delta > 0.0)) return std::nullopt;  // any beta increase is blocked at delta == 0
        const double lb = std::max(-ak, -bl);
        const double ub = detail::kInf;
        const double denom = q + 1.0 / (2.0 * c * th1 * th1) + 1.0 / (2.0 * delta * th2 * th2);
        const double num = e.s_k + e.s_l - 1.0 / th1 - 1.0 / th2 + ak / (2.0 * c * th1 * th1) +
                           bl / (2.0 * delta * th2 * th2);
        auto cand = detail::quadratic_candidate(UpdateRule::PosNeg, k, l, lb, ub, num, denom);
        if (!cand) return cand;
        const double d = cand->delta_star;
        const double new_sum_b2 = ctx.sum_beta_sq + 2.0 * d * bl + d * d;
        const double new_delta = detail::patmat_quadratic_delta(new_sum_b2, th2, n_tau);
        cand->new_delta_mult = new_delta;
        // exact gain includes snapping delta to its closed-form optimum:
        // the fixed-delta gain already carries the conjugate change, so add
        // the post-step conjugate term at the old delta minus the snapped one
        cand->objective_gain +=
            new_sum_b2 / (4.0 * delta * th2 * th2) + delta * n_tau - 2.0 * new_delta * n_tau;
        return cand;
    }

    // PatMat hinge: the multiplier tracks max(beta)/theta2, so the line
    // objective is piecewise quadratic. Try both branch optimizers plus the
    // kink and keep the exact-objective maximizer.
    const double q_denom = q;
    if (!(q_denom > detail::kDegenerateDenominator)) return std::nullopt;
    const double lb = std::max(-ak, -bl);
    const double ub = c * th1 - ak;
    if (!(lb <= ub)) return std::nullopt;
    const double bmax = beta_max_excluding(ctx, lh);
    const double base_num = e.s_k + e.s_l - 1.0 / th1 - 1.0 / th2;
    const std::array<double, 3> gammas = {
        -base_num / q_denom,                        // beta_l + delta below bmax
        -(base_num + n_tau / th2) / q_denom,        // beta_l + delta above bmax
        bmax - bl,                                  // kink between the two pieces
    };
    auto exact_gain = [&](double d, double& new_delta) {
        new_delta = std::max(bmax, bl + d) / th2;
        return -d * (e.s_k + e.s_l) - 0.5 * d * d * q + d / th1 + d / th2 -
               (new_delta - delta) * n_tau;
    };
    std::optional<StepCandidate> best;
    for (double g : gammas) {
        const double d = detail::clip(lb, ub, g);
        double nd = 0.0;
        const double gain = exact_gain(d, nd);
        if (!best || gain > best->objective_gain) {
            StepCandidate cand;
            cand.rule = UpdateRule::PosNeg;
            cand.k = k;
            cand.l = l;
            cand.delta_lb = lb;
            cand.delta_ub = ub;
            cand.gamma = g;
            cand.delta_star = d;
            cand.new_delta_mult = nd;
            cand.objective_gain = gain;
            best = cand;
        }
    }
    return best;
}

// Rule (b,b): beta_{k-npos} += delta, beta_{l-npos} -= delta. k, l are global
// negative indices, k != l.
inline std::optional<StepCandidate> step_negneg(const ProblemSpec& problem,
                                                const PairEntries& e, const SolverState& state,
                                                const StepContext& ctx, std::size_t k,
                                                std::size_t l) {
    const std::size_t npos = state.n_pos();
    const std::size_t kh = k - npos;
    const std::size_t lh = l - npos;
    const double bk = state.beta[kh];
    const double bl = state.beta[lh];
    const double q = e.k_kk + e.k_ll - 2.0 * e.k_kl;

    if (problem.kind == ProblemKind::TopPushK) {
        double lb, ub;
        if (problem.K == 1) {
            lb = -bk;
            ub = bl;
        } else {
            const double cap = ctx.sum_alpha / static_cast<double>(problem.K);
            lb = std::max(-bk, bl - cap);
            ub = std::min(bl, cap - bk);
        }
        return detail::quadratic_candidate(UpdateRule::NegNeg, k, l, lb, ub, e.s_k - e.s_l, q);
    }

    const double th2 = problem.surrogate_neg.theta;
    const double n_tau = problem.tau * static_cast<double>(state.n());
    const double delta = state.delta_mult;
    if (problem.quadratic()) {
        if (!(delta > 0.0)) return std::nullopt;
        const double denom = q + 1.0 / (delta * th2 * th2);
        const double num = e.s_k - e.s_l + (bk - bl) / (2.0 * delta * th2 * th2);
        auto cand = detail::quadratic_candidate(UpdateRule::NegNeg, k, l, -bk, bl, num, denom);
        if (!cand) return cand;
        const double d = cand->delta_star;
        const double new_sum_b2 = ctx.sum_beta_sq + 2.0 * d * (bk - bl) + 2.0 * d * d;
        const double new_delta = detail::patmat_quadratic_delta(new_sum_b2, th2, n_tau);
        cand->new_delta_mult = new_delta;
        cand->objective_gain +=
            new_sum_b2 / (4.0 * delta * th2 * th2) + delta * n_tau - 2.0 * new_delta * n_tau;
        return cand;
    }

    // PatMat hinge: three pieces depending on which beta dominates the
    // multiplier after the move; try each branch optimizer and every kink.
    if (!(q > detail::kDegenerateDenominator)) return std::nullopt;
    const double lb = -bk;
    const double ub = bl;
    if (!(lb <= ub)) return std::nullopt;
    const double bmax = beta_max_excluding(ctx, kh, lh);
    const double s_diff = e.s_k - e.s_l;
    const std::array<double, 6> gammas = {
        -s_diff / q,                     // bmax dominates
        -(s_diff + n_tau / th2) / q,     // beta_k + delta dominates
        -(s_diff - n_tau / th2) / q,     // beta_l - delta dominates
        bmax - bk,                       // kink: beta_k + delta == bmax
        bl - bmax,                       // kink: beta_l - delta == bmax
        0.5 * (bl - bk),                 // kink: beta_k + delta == beta_l - delta
    };
    auto exact_gain = [&](double d, double& new_delta) {
        new_delta = std::max({bmax, bk + d, bl - d}) / th2;
        return -d * s_diff - 0.5 * d * d * q - (new_delta - delta) * n_tau;
    };
    std::optional<StepCandidate> best;
    for (double g : gammas) {
        const double d = detail::clip(lb, ub, g);
        double nd = 0.0;
        const double gain = exact_gain(d, nd);
        if (!best || gain > best->objective_gain) {
            StepCandidate cand;
            cand.rule = UpdateRule::NegNeg;
            cand.k = k;
            cand.l = l;
            cand.delta_lb = lb;
            cand.delta_ub = ub;
            cand.gamma = g;
            cand.delta_star = d;
            cand.new_delta_mult = nd;
            cand.objective_gain = gain;
            best = cand;
        }
    }
    return best;
}

// Convenience wrappers fetching kernel entries and caches themselves; the
// solver uses the core overloads with a buffered column instead.
inline PairEntries pair_entries(const KernelMatrix& K, const SolverState& state, std::size_t k,
                                std::size_t l) {
    PairEntries e;
    e.s_k = state.scores[k];
    e.s_l = state.scores[l];
    e.k_kk = K.diagonal()[k];
    e.k_ll = K.diagonal()[l];
    e.k_kl = K.entry(k, l);
    return e;
}

inline std::optional<StepCandidate> step_pospos(const ProblemSpec& problem, const KernelMatrix& K,
                                                const SolverState& state, std::size_t k,
                                                std::size_t l) {
    return step_pospos(problem, pair_entries(K, state, k, l), state, make_step_context(state), k, l);
}

inline std::optional<StepCandidate> step_posneg(const ProblemSpec& problem, const KernelMatrix& K,
                                                const SolverState& state, std::size_t k,
                                                std::size_t l) {
    return step_posneg(problem, pair_entries(K, state, k, l), state, make_step_context(state), k, l);
}

inline std::optional<StepCandidate> step_negneg(const ProblemSpec& problem, const KernelMatrix& K,
                                                const SolverState& state, std::size_t k,
                                                std::size_t l) {
    return step_negneg(problem, pair_entries(K, state, k, l), state, make_step_context(state), k, l);
}

inline const char* to_string(ProblemKind k) {
    return k == ProblemKind::TopPushK ? "toppushk" : "patmat";
}

}  // namespace toprank
