#pragma once

// Independent oracles used by the unit and acceptance suites. Everything in
// this header recomputes from first principles (dense quadratic forms,
// generic conjugate perspective terms, exhaustive threshold sweeps) and
// deliberately avoids the incremental caches used by the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "toprank/kernel.hpp"
#include "toprank/metrics.hpp"
#include "toprank/problem.hpp"
#include "toprank/state.hpp"
#include "toprank/surrogate.hpp"

namespace oracle {

using toprank::KernelMatrix;
using toprank::ProblemKind;
using toprank::ProblemSpec;
using toprank::SolverState;
using toprank::SurrogateFamily;
using toprank::UpdateRule;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Dual objective from scratch: dense quadratic form over kernel entries plus
// the generic conjugate/perspective terms. Returns -inf outside the
// conjugate domains.
inline double dual_objective(const ProblemSpec& problem, const KernelMatrix& K,
                             const std::vector<double>& alpha, const std::vector<double>& beta,
                             double delta) {
    const std::size_t np = alpha.size();
    const std::size_t n = np + beta.size();
    std::vector<double> v(n);
    for (std::size_t i = 0; i < np; ++i) v[i] = alpha[i];
    for (std::size_t j = 0; j < beta.size(); ++j) v[np + j] = beta[j];
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) quad += v[i] * K.entry(i, j) * v[j];

    double value = -0.5 * quad;
    for (double a : alpha) {
        const auto c = toprank::conjugate(problem.surrogate_pos, a / problem.C);
        if (!c) return kNegInf;
        value -= problem.C * *c;
    }
    if (problem.kind == ProblemKind::PatMat) {
        const double n_tau = problem.tau * static_cast<double>(n);
        if (delta < 0.0) return kNegInf;
        if (delta == 0.0) {
            for (double b : beta)
                if (b != 0.0) return kNegInf;  // perspective of l2* at delta = 0
        } else {
            for (double b : beta) {
                const auto c = toprank::conjugate(problem.surrogate_neg, b / delta);
                if (!c) return kNegInf;
                value -= delta * *c;
            }
        }
        value -= delta * n_tau;
    }
    return value;
}

// How the PatMat multiplier is paired with a trial step.
enum class DeltaPolicy {
    Keep,               // TopPushK, and PatMat moves at a frozen multiplier
    QuadDefinitional,   // sqrt(sum beta^2 / (4 theta2^2 n tau))
    HingeDefinitional,  // max(beta) / theta2
};

struct TrialState {
    std::vector<double> alpha;
    std::vector<double> beta;
    double delta = 0.0;
};

inline TrialState apply_step(const ProblemSpec& problem, const SolverState& state,
                             UpdateRule rule, std::size_t k, std::size_t l, double step,
                             DeltaPolicy policy) {
    TrialState t{state.alpha, state.beta, state.delta_mult};
    const std::size_t np = state.n_pos();
    switch (rule) {
        case UpdateRule::PosPos:
            t.alpha[k] += step;
            t.alpha[l] -= step;
            break;
        case UpdateRule::PosNeg:
            t.alpha[k] += step;
            t.beta[l - np] += step;
            break;
        case UpdateRule::NegNeg:
            t.beta[k - np] += step;
            t.beta[l - np] -= step;
            break;
    }
    if (policy == DeltaPolicy::QuadDefinitional) {
        double sb2 = 0.0;
        for (double b : t.beta) sb2 += b * b;
        const double n_tau = problem.tau * static_cast<double>(state.n());
        t.delta = sb2 > 0.0 ? std::sqrt(sb2 / (4.0 * problem.surrogate_neg.theta *
                                               problem.surrogate_neg.theta * n_tau))
                            : 0.0;
    } else if (policy == DeltaPolicy::HingeDefinitional) {
        double bmax = 0.0;
        for (double b : t.beta) bmax = std::max(bmax, b);
        t.delta = bmax / problem.surrogate_neg.theta;
    }
    return t;
}

inline double objective_after(const ProblemSpec& problem, const KernelMatrix& K,
                              const SolverState& state, UpdateRule rule, std::size_t k,
                              std::size_t l, double step, DeltaPolicy policy) {
    const TrialState t = apply_step(problem, state, rule, k, l, step, policy);
    return dual_objective(problem, K, t.alpha, t.beta, t.delta);
}

struct LineGridMax {
    double value = kNegInf;
    double arg = 0.0;
};

// Exhaustive grid search of the dual objective along one update line.
inline LineGridMax grid_line_max(const ProblemSpec& problem, const KernelMatrix& K,
                                 const SolverState& state, UpdateRule rule, std::size_t k,
                                 std::size_t l, double lo, double hi, DeltaPolicy policy,
                                 std::size_t points) {
    LineGridMax best;
    for (std::size_t i = 0; i < points; ++i) {
        const double step =
            points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        const double value = objective_after(problem, K, state, rule, k, l, step, policy);
        if (value > best.value) {
            best.value = value;
            best.arg = step;
        }
    }
    return best;
}

// Grid over the PatMat multiplier at a frozen (alpha, beta).
inline LineGridMax grid_delta_max(const ProblemSpec& problem, const KernelMatrix& K,
                                  const std::vector<double>& alpha,
                                  const std::vector<double>& beta, double hi,
                                  std::size_t points) {
    LineGridMax best;
    for (std::size_t i = 0; i < points; ++i) {
        const double d = hi * static_cast<double>(i) / static_cast<double>(points - 1);
        const double value = dual_objective(problem, K, alpha, beta, d);
        if (value > best.value) {
            best.value = value;
            best.arg = d;
        }
    }
    return best;
}

// Random feasible dual state for a bound problem; sprinkles exact zeros to
// exercise bound corners. The PatMat multiplier is drawn away from its
// closed-form optimum now and then so step formulas cannot assume tightness.
inline SolverState random_feasible_state(const ProblemSpec& problem, const KernelMatrix& K,
                                         std::mt19937_64& rng) {
    const std::size_t np = K.n_pos();
    const std::size_t nn = K.n_neg();
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SolverState state;
    state.alpha.resize(np);
    state.beta.resize(nn);

    const bool hinge = problem.surrogate_pos.family == SurrogateFamily::Hinge;
    const double cap_a = hinge ? problem.C * problem.surrogate_pos.theta : 2.0;
    for (auto& a : state.alpha) a = unit(rng) < 0.2 ? 0.0 : unit(rng) * cap_a;
    double sum_a = 0.0;
    for (double a : state.alpha) sum_a += a;
    if (sum_a < 1e-6) {
        state.alpha[0] = 0.5 * cap_a;
        sum_a = state.alpha[0];
    }

    double sum_b = 0.0;
    for (auto& b : state.beta) {
        b = unit(rng) < 0.2 ? 0.0 : unit(rng);
        sum_b += b;
    }
    if (sum_b <= 0.0) {
        state.beta[0] = 1.0;
        sum_b = 1.0;
    }
    for (auto& b : state.beta) b *= sum_a / sum_b;

    if (problem.kind == ProblemKind::TopPushK) {
        const double cap = sum_a / static_cast<double>(problem.K);
        for (int iter = 0; iter < 200; ++iter) {
            for (auto& b : state.beta) b = std::min(b, cap);
            double s = 0.0;
            for (double b : state.beta) s += b;
            const double deficit = sum_a - s;
            if (std::abs(deficit) <= 1e-13 * std::max(1.0, sum_a)) break;
            double headroom = 0.0;
            for (double b : state.beta) headroom += cap - b;
            if (headroom <= 0.0) break;  // K == n_neg: all beta pinned at the cap
            for (auto& b : state.beta) b += deficit * (cap - b) / headroom;
        }
    } else {
        const double th2 = problem.surrogate_neg.theta;
        double bmax = 0.0, sb2 = 0.0;
        for (double b : state.beta) {
            bmax = std::max(bmax, b);
            sb2 += b * b;
        }
        if (problem.quadratic()) {
            const double n_tau = problem.tau * static_cast<double>(np + nn);
            const double tight = std::sqrt(sb2 / (4.0 * th2 * th2 * n_tau));
            state.delta_mult = tight * (0.25 + 1.5 * unit(rng));
        } else {
            state.delta_mult = bmax / th2 * (1.0 + (unit(rng) < 0.5 ? 0.0 : unit(rng)));
        }
    }

    std::vector<double> v(np + nn);
    for (std::size_t i = 0; i < np; ++i) v[i] = state.alpha[i];
    for (std::size_t j = 0; j < nn; ++j) v[np + j] = state.beta[j];
    state.scores = K.multiply(v);
    state.refresh_sums();
    return state;
}

// O(1)-per-point line evaluator for dense grids. The restriction of the dual
// objective to an update line is reconstructed from bilinearity of the
// quadratic form plus the generic conjugate terms of the two touched
// coordinates; box constraints are checked per point, so the grid may extend
// beyond the candidate's claimed bounds and adjudicates them as well.
class FastLineOracle {
public:
    FastLineOracle(const ProblemSpec& problem, const KernelMatrix& K, const SolverState& state,
                   UpdateRule rule, std::size_t k, std::size_t l, DeltaPolicy policy)
        : problem_(problem), state_(state), rule_(rule), policy_(policy), k_(k), l_(l) {
        const std::size_t np = state.n_pos();
        const std::size_t n = state.n();
        std::vector<double> v(n);
        for (std::size_t i = 0; i < np; ++i) v[i] = state.alpha[i];
        for (std::size_t j = 0; j < n - np; ++j) v[np + j] = state.beta[j];
        const auto s = K.multiply(v);
        quad0_ = 0.0;
        for (std::size_t i = 0; i < n; ++i) quad0_ += v[i] * s[i];
        const double sign_l = rule == UpdateRule::PosNeg ? 1.0 : -1.0;
        u_s_ = s[k] + sign_l * s[l];
        u_Ku_ = K.entry(k, k) + K.entry(l, l) + 2.0 * sign_l * K.entry(k, l);

        alpha_conj0_ = 0.0;
        for (double a : state.alpha) {
            const auto c = toprank::conjugate(problem.surrogate_pos, a / problem.C);
            alpha_conj0_ += problem.C * (c ? *c : 0.0);  // feasible states stay in-domain
        }
        sum_alpha0_ = 0.0;
        for (double a : state.alpha) sum_alpha0_ += a;
        sum_beta0_ = 0.0;
        sum_beta_sq0_ = 0.0;
        for (double b : state.beta) {
            sum_beta0_ += b;
            sum_beta_sq0_ += b * b;
        }
        kh_ = k >= np ? k - np : 0;
        lh_ = l >= np ? l - np : 0;
        beta_max_excl_ = 0.0;
        for (std::size_t j = 0; j < state.beta.size(); ++j) {
            const bool touched = (rule != UpdateRule::PosPos && j == lh_ && l >= np) ||
                                 (rule == UpdateRule::NegNeg && j == kh_);
            if (!touched) beta_max_excl_ = std::max(beta_max_excl_, state.beta[j]);
        }
        n_tau_ = problem.tau * static_cast<double>(n);
    }

    double eval(double step) const {
        constexpr double slack = 1e-12;
        const std::size_t np = state_.n_pos();
        double value = -0.5 * (quad0_ + 2.0 * step * u_s_ + step * step * u_Ku_);

        double conj = alpha_conj0_;
        double sum_alpha = sum_alpha0_;
        double sum_beta = sum_beta0_;
        double sum_beta_sq = sum_beta_sq0_;
        double beta_max = beta_max_excl_;
        auto alpha_term = [&](double a) -> std::optional<double> {
            if (a < -slack) return std::nullopt;
            const auto c = toprank::conjugate(problem_.surrogate_pos, a / problem_.C);
            if (!c) return std::nullopt;
            return problem_.C * *c;
        };
        auto swap_alpha = [&](std::size_t i, double now) -> bool {
            const auto before = alpha_term(state_.alpha[i]);
            const auto after = alpha_term(now);
            if (!after) return false;
            conj += *after - (before ? *before : 0.0);
            return true;
        };

        switch (rule_) {
            case UpdateRule::PosPos: {
                if (!swap_alpha(k_, state_.alpha[k_] + step)) return kNegInf;
                if (!swap_alpha(l_, state_.alpha[l_] - step)) return kNegInf;
                break;
            }
            case UpdateRule::PosNeg: {
                if (!swap_alpha(k_, state_.alpha[k_] + step)) return kNegInf;
                const double b = state_.beta[lh_] + step;
                if (b < -slack) return kNegInf;
                sum_alpha += step;
                sum_beta += step;
                sum_beta_sq += 2.0 * step * state_.beta[lh_] + step * step;
                beta_max = std::max(beta_max, b);
                break;
            }
            case UpdateRule::NegNeg: {
                const double bk = state_.beta[kh_] + step;
                const double bl = state_.beta[lh_] - step;
                if (bk < -slack || bl < -slack) return kNegInf;
                sum_beta_sq += 2.0 * step * (state_.beta[kh_] - state_.beta[lh_]) +
                               2.0 * step * step;
                beta_max = std::max({beta_max, bk, bl});
                break;
            }
        }
        value -= conj;

        if (problem_.kind == ProblemKind::TopPushK) {
            // box: every beta <= sum(alpha)/K
            const double cap = sum_alpha / static_cast<double>(problem_.K) + slack;
            if (beta_max > cap) return kNegInf;
            if (rule_ != UpdateRule::PosPos && l_ >= np) {
                const double bl = rule_ == UpdateRule::PosNeg ? state_.beta[lh_] + step
                                                              : state_.beta[lh_] - step;
                if (bl > cap) return kNegInf;
            }
            if (rule_ == UpdateRule::NegNeg && state_.beta[kh_] + step > cap) return kNegInf;
            return value;
        }

        const double th2 = problem_.surrogate_neg.theta;
        switch (policy_) {
            case DeltaPolicy::Keep: {
                const double delta = state_.delta_mult;
                if (problem_.quadratic()) {
                    if (delta > 0.0)
                        value += sum_beta / th2 - sum_beta_sq / (4.0 * delta * th2 * th2) -
                                 delta * n_tau_;
                    else if (sum_beta_sq > slack)
                        return kNegInf;
                } else {
                    if (beta_max > delta * th2 + slack) return kNegInf;
                    value += sum_beta / th2 - delta * n_tau_;
                }
                break;
            }
            case DeltaPolicy::QuadDefinitional: {
                const double delta =
                    sum_beta_sq > 0.0 ? std::sqrt(sum_beta_sq / (4.0 * th2 * th2 * n_tau_)) : 0.0;
                value += sum_beta / th2 - 2.0 * delta * n_tau_;
                break;
            }
            case DeltaPolicy::HingeDefinitional: {
                const double delta = beta_max / th2;
                value += sum_beta / th2 - delta * n_tau_;
                break;
            }
        }
        return value;
    }

private:
    const ProblemSpec& problem_;
    const SolverState& state_;
    UpdateRule rule_;
    DeltaPolicy policy_;
    std::size_t k_, l_, kh_ = 0, lh_ = 0;
    double quad0_ = 0.0, u_s_ = 0.0, u_Ku_ = 0.0;
    double alpha_conj0_ = 0.0, sum_alpha0_ = 0.0, sum_beta0_ = 0.0, sum_beta_sq0_ = 0.0;
    double beta_max_excl_ = 0.0, n_tau_ = 0.0;
};

// ---------------------------------------------------------------------------
// Projected gradient with Dykstra projection for the TopPushK-quadratic dual
// ---------------------------------------------------------------------------

struct PgResult {
    std::vector<double> alpha;
    std::vector<double> beta;
    double objective = kNegInf;
};

inline PgResult projected_gradient_toppushk_quadratic(const ProblemSpec& problem,
                                                      const KernelMatrix& K,
                                                      std::size_t iterations) {
    const std::size_t np = K.n_pos();
    const std::size_t nn = K.n_neg();
    const std::size_t n = np + nn;
    const double C = problem.C;
    const double th = problem.surrogate_pos.theta;
    const double Kk = static_cast<double>(problem.K);

    std::vector<double> Kd(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) Kd[i * n + j] = K.entry(i, j);

    // crude Lipschitz bound: max row sum of |K| plus the separable curvature
    double L = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += std::abs(Kd[i * n + j]);
        L = std::max(L, row);
    }
    L += 1.0 / (2.0 * C * th * th);
    const double eta = 1.0 / L;

    // Dykstra over: the sum hyperplane, alpha >= 0, beta >= 0 and the
    // K * beta_j <= sum(alpha) halfspaces.
    const std::size_t n_sets = 1 + np + nn + nn;
    auto project = [&](std::vector<double>& v) {
        std::vector<std::vector<double>> corr(n_sets, std::vector<double>(n, 0.0));
        std::vector<double> y(n);
        for (int cycle = 0; cycle < 60; ++cycle) {
            for (std::size_t s = 0; s < n_sets; ++s) {
                for (std::size_t i = 0; i < n; ++i) y[i] = v[i] + corr[s][i];
                std::vector<double> proj = y;
                if (s == 0) {
                    double resid = 0.0;
                    for (std::size_t i = 0; i < np; ++i) resid += y[i];
                    for (std::size_t j = 0; j < nn; ++j) resid -= y[np + j];
                    const double shift = resid / static_cast<double>(n);
                    for (std::size_t i = 0; i < np; ++i) proj[i] -= shift;
                    for (std::size_t j = 0; j < nn; ++j) proj[np + j] += shift;
                } else if (s <= np) {
                    proj[s - 1] = std::max(0.0, proj[s - 1]);
                } else if (s <= np + nn) {
                    proj[np + (s - np - 1)] = std::max(0.0, proj[np + (s - np - 1)]);
                } else {
                    // beta_j - (1/K) sum(alpha) <= 0
                    const std::size_t j = s - np - nn - 1;
                    double viol = y[np + j];
                    for (std::size_t i = 0; i < np; ++i) viol -= y[i] / Kk;
                    if (viol > 0.0) {
                        const double norm2 = 1.0 + static_cast<double>(np) / (Kk * Kk);
                        const double scale = viol / norm2;
                        proj[np + j] -= scale;
                        for (std::size_t i = 0; i < np; ++i) proj[i] += scale / Kk;
                    }
                }
                for (std::size_t i = 0; i < n; ++i) {
                    corr[s][i] = y[i] - proj[i];
                    v[i] = proj[i];
                }
            }
        }
    };

    std::vector<double> v(n, 0.0);
    for (std::size_t i = 0; i < np; ++i) v[i] = 0.5;
    for (std::size_t j = 0; j < nn; ++j) v[np + j] = 0.5 * static_cast<double>(np) / static_cast<double>(nn);
    project(v);

    std::vector<double> grad(n);
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double kv = 0.0;
            for (std::size_t j = 0; j < n; ++j) kv += Kd[i * n + j] * v[j];
            grad[i] = -kv;
        }
        for (std::size_t i = 0; i < np; ++i)
            grad[i] += 1.0 / th - v[i] / (2.0 * C * th * th);
        for (std::size_t i = 0; i < n; ++i) v[i] += eta * grad[i];
        project(v);
    }

    PgResult out;
    out.alpha.assign(v.begin(), v.begin() + np);
    out.beta.assign(v.begin() + np, v.end());
    out.objective = dual_objective(problem, K, out.alpha, out.beta, 0.0);
    return out;
}

// ---------------------------------------------------------------------------
// Small symmetric eigenvalues (cyclic Jacobi) for PSD checks
// ---------------------------------------------------------------------------

inline std::vector<double> jacobi_eigenvalues(std::vector<double> A, std::size_t n) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += A[p * n + q] * A[p * n + q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A[p * n + q];
                if (std::abs(apq) < 1e-18) continue;
                const double app = A[p * n + p];
                const double aqq = A[q * n + q];
                const double phi = 0.5 * std::atan2(2.0 * apq, aqq - app);
                const double c = std::cos(phi);
                const double s = std::sin(phi);
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = A[i * n + p];
                    const double aiq = A[i * n + q];
                    A[i * n + p] = c * aip - s * aiq;
                    A[i * n + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = A[p * n + i];
                    const double aqi = A[q * n + i];
                    A[p * n + i] = c * api - s * aqi;
                    A[q * n + i] = s * api + c * aqi;
                }
            }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = A[i * n + i];
    return eig;
}

// ---------------------------------------------------------------------------
// Brute-force precision/recall per threshold
// ---------------------------------------------------------------------------

struct BrutePrPoint {
    double threshold;
    double recall;
    double precision;
};

inline std::vector<BrutePrPoint> brute_force_pr(const toprank::ScoredLabels& sl) {
    std::vector<double> thresholds(sl.scores);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::vector<BrutePrPoint> out;
    for (double t : thresholds) {
        std::size_t tp = 0, predicted = 0, pos = 0;
        for (std::size_t i = 0; i < sl.scores.size(); ++i) {
            if (sl.labels[i]) ++pos;
            if (sl.scores[i] >= t) {
                ++predicted;
                if (sl.labels[i]) ++tp;
            }
        }
        if (predicted == 0) continue;
        out.push_back({t, static_cast<double>(tp) / static_cast<double>(pos),
                       static_cast<double>(tp) / static_cast<double>(predicted)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Independent TopPush (K = 1) step formulas for the specialization check
// ---------------------------------------------------------------------------

struct ReferenceStep {
    double lb;
    double ub;
    double step;
};

inline ReferenceStep toppush_reference_step(const ProblemSpec& p, const toprank::PairEntries& e,
                                            const SolverState& st, UpdateRule rule,
                                            std::size_t k, std::size_t l) {
    const std::size_t np = st.n_pos();
    const double C = p.C;
    const double th = p.surrogate_pos.theta;
    const bool quad = p.quadratic();
    double lb = 0.0, ub = 0.0, num = 0.0, den = 0.0;
    switch (rule) {
        case UpdateRule::PosPos: {
            const double ak = st.alpha[k], al = st.alpha[l];
            den = e.k_kk + e.k_ll - 2.0 * e.k_kl;
            if (quad) {
                lb = -ak;
                ub = al;
                den += 1.0 / (C * th * th);
                num = e.s_k - e.s_l + (ak - al) / (2.0 * C * th * th);
            } else {
                lb = std::max(-ak, al - C * th);
                ub = std::min(C * th - ak, al);
                num = e.s_k - e.s_l;
            }
            break;
        }
        case UpdateRule::PosNeg: {
            const double ak = st.alpha[k], bl = st.beta[l - np];
            den = e.k_kk + e.k_ll + 2.0 * e.k_kl;
            lb = std::max(-ak, -bl);
            if (quad) {
                ub = std::numeric_limits<double>::infinity();
                den += 1.0 / (2.0 * C * th * th);
                num = e.s_k + e.s_l - 1.0 / th + ak / (2.0 * C * th * th);
            } else {
                ub = C * th - ak;
                num = e.s_k + e.s_l - 1.0 / th;
            }
            break;
        }
        case UpdateRule::NegNeg: {
            const double bk = st.beta[k - np], bl = st.beta[l - np];
            lb = -bk;
            ub = bl;
            den = e.k_kk + e.k_ll - 2.0 * e.k_kl;
            num = e.s_k - e.s_l;
            break;
        }
    }
    const double gamma = -num / den;
    return {lb, ub, std::min(ub, std::max(lb, gamma))};
}

}  // namespace oracle
