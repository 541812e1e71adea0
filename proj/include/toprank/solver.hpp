#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "toprank/problem.hpp"

namespace toprank {

struct SolverConfig {
    std::uint64_t max_loops = 20000;
    std::uint64_t seed = 0;
    std::optional<double> gain_tolerance;  // early stop when the best gain falls below
    std::uint64_t trace_every = 100;
    std::uint64_t score_refresh_every = 4096;
    bool zero_start = false;  // default is the uniform warm start

    void check() const {
        if (max_loops < 1) throw invalid_spec("max_loops must be >= 1");
        if (trace_every < 1) throw invalid_spec("trace_every must be >= 1");
        if (score_refresh_every < 1) throw invalid_spec("score_refresh_every must be >= 1");
    }
};

struct TracePoint {
    std::uint64_t loop = 0;
    double time_s = 0.0;
    double dual_objective = 0.0;
    std::optional<double> primal_objective;
    std::optional<double> gap;
};

struct ConvergenceTrace {
    std::vector<TracePoint> points;

    bool has_primal() const {
        return !points.empty() && points.front().primal_objective.has_value();
    }

    // loop,time_s,dual_obj[,primal_obj,gap]
    void write_csv(std::ostream& out) const {
        out << "loop,time_s,dual_obj";
        if (has_primal()) out << ",primal_obj,gap";
        out << '\n';
        char buf[512];
        for (const auto& p : points) {
            if (p.primal_objective) {
                std::snprintf(buf, sizeof buf, "%llu,%.6f,%.17g,%.17g,%.17g\n",
                              static_cast<unsigned long long>(p.loop), p.time_s, p.dual_objective,
                              *p.primal_objective, p.gap.value_or(0.0));
            } else {
                std::snprintf(buf, sizeof buf, "%llu,%.6f,%.17g\n",
                              static_cast<unsigned long long>(p.loop), p.time_s, p.dual_objective);
            }
            out << buf;
        }
    }
};

// Feasible starting point. The uniform warm start uses alpha_i = c and
// beta_j = c * n_pos / n_neg with c = C*theta/2 for hinge (inside the box)
// and c = 1 for the quadratic surrogate; scores come from one dense multiply.
inline SolverState initialize(const ProblemSpec& problem, const KernelMatrix& K,
                              const SolverConfig& config) {
    config.check();
    const std::size_t np = K.n_pos();
    const std::size_t nn = K.n_neg();
    problem.validate_for(np, nn);

    SolverState state;
    state.alpha.assign(np, 0.0);
    state.beta.assign(nn, 0.0);
    state.rng.seed(config.seed);

    if (!config.zero_start) {
        const double c = problem.quadratic() ? 1.0 : 0.5 * problem.C * problem.surrogate_pos.theta;
        const double b = c * static_cast<double>(np) / static_cast<double>(nn);
        for (auto& a : state.alpha) a = c;
        for (auto& v : state.beta) v = b;
    }
    state.refresh_sums();

    if (problem.kind == ProblemKind::PatMat) {
        const double th2 = problem.surrogate_neg.theta;
        const double n_tau = problem.tau * static_cast<double>(np + nn);
        if (problem.quadratic()) {
            state.delta_mult = detail::patmat_quadratic_delta(state.sum_beta_sq, th2, n_tau);
        } else {
            double bmax = 0.0;
            for (double v : state.beta) bmax = std::max(bmax, v);
            state.delta_mult = bmax / th2;
        }
    }

    std::vector<double> v(np + nn);
    for (std::size_t i = 0; i < np; ++i) v[i] = state.alpha[i];
    for (std::size_t j = 0; j < nn; ++j) v[np + j] = state.beta[j];
    state.scores = K.multiply(v);

    if (auto rep = is_feasible(problem, state); !rep)
        throw infeasible_state("initial state infeasible: " + rep.violation);
    return state;
}

// Random-coordinate two-variable ascent. One run_loop draws k uniformly,
// scans every admissible partner l, and applies the candidate with the
// largest exact objective gain using the incremental score update.
class CoordinateSolver {
public:
    using GapEvaluator = std::function<double(const SolverState&)>;

    CoordinateSolver(ProblemSpec problem, const KernelMatrix& K, SolverConfig config)
        : problem_(std::move(problem)),
          kernel_(K),
          config_(std::move(config)),
          state_(initialize(problem_, K, config_)),
          col_k_(K.size()),
          col_l_(K.size()) {}

    const ProblemSpec& problem() const { return problem_; }
    SolverState& state() { return state_; }
    const SolverState& state() const { return state_; }
    const ConvergenceTrace& trace() const { return trace_; }

    // Best candidate over all partners of k; fills the internal column buffer.
    std::optional<StepCandidate> scan_best(std::size_t k) {
        kernel_.column_into(k, col_k_);
        scanned_k_ = k;
        const StepContext ctx = make_step_context(state_);
        const std::size_t n = state_.n();
        const std::size_t np = state_.n_pos();
        const auto& diag = kernel_.diagonal();
        std::optional<StepCandidate> best;
        for (std::size_t l = 0; l < n; ++l) {
            if (l == k) continue;
            PairEntries e;
            e.k_kl = col_k_[l];
            std::optional<StepCandidate> cand;
            const bool k_pos = k < np;
            const bool l_pos = l < np;
            if (k_pos && l_pos) {
                e.s_k = state_.scores[k];
                e.s_l = state_.scores[l];
                e.k_kk = diag[k];
                e.k_ll = diag[l];
                cand = step_pospos(problem_, e, state_, ctx, k, l);
            } else if (k_pos) {
                e.s_k = state_.scores[k];
                e.s_l = state_.scores[l];
                e.k_kk = diag[k];
                e.k_ll = diag[l];
                cand = step_posneg(problem_, e, state_, ctx, k, l);
            } else if (l_pos) {
                // canonical order: the positive index owns the alpha slot
                e.s_k = state_.scores[l];
                e.s_l = state_.scores[k];
                e.k_kk = diag[l];
                e.k_ll = diag[k];
                cand = step_posneg(problem_, e, state_, ctx, l, k);
            } else {
                e.s_k = state_.scores[k];
                e.s_l = state_.scores[l];
                e.k_kk = diag[k];
                e.k_ll = diag[l];
                cand = step_negneg(problem_, e, state_, ctx, k, l);
            }
            if (cand && (!best || cand->objective_gain > best->objective_gain)) best = cand;
        }
        return best;
    }

    void apply(const StepCandidate& cand) {
        const std::size_t np = state_.n_pos();
        const double d = cand.delta_star;
        // col_k_ must hold column(cand.k), col_l_ column(cand.l)
        if (scanned_k_ == cand.k) {
            kernel_.column_into(cand.l, col_l_);
        } else if (scanned_k_ == cand.l) {
            std::swap(col_k_, col_l_);
            kernel_.column_into(cand.k, col_k_);
        } else {
            kernel_.column_into(cand.k, col_k_);
            kernel_.column_into(cand.l, col_l_);
        }
        scanned_k_ = std::numeric_limits<std::size_t>::max();

        switch (cand.rule) {
            case UpdateRule::PosPos:
                state_.alpha[cand.k] += d;
                state_.alpha[cand.l] -= d;
                for (std::size_t i = 0; i < state_.scores.size(); ++i)
                    state_.scores[i] += (col_k_[i] - col_l_[i]) * d;
                break;
            case UpdateRule::PosNeg: {
                const std::size_t lh = cand.l - np;
                state_.sum_beta_sq += 2.0 * d * state_.beta[lh] + d * d;
                state_.alpha[cand.k] += d;
                state_.beta[lh] += d;
                state_.sum_alpha += d;
                for (std::size_t i = 0; i < state_.scores.size(); ++i)
                    state_.scores[i] += (col_k_[i] + col_l_[i]) * d;
                break;
            }
            case UpdateRule::NegNeg: {
                const std::size_t kh = cand.k - np;
                const std::size_t lh = cand.l - np;
                state_.sum_beta_sq += 2.0 * d * (state_.beta[kh] - state_.beta[lh]) + 2.0 * d * d;
                state_.beta[kh] += d;
                state_.beta[lh] -= d;
                for (std::size_t i = 0; i < state_.scores.size(); ++i)
                    state_.scores[i] += (col_k_[i] - col_l_[i]) * d;
                break;
            }
        }
        if (cand.new_delta_mult) state_.delta_mult = *cand.new_delta_mult;
    }

    // One repeat loop; returns the applied candidate or nullopt when no
    // candidate improves the objective (state unchanged either way except
    // for the loop counter).
    std::optional<StepCandidate> run_loop() {
        std::uniform_int_distribution<std::size_t> pick(0, state_.n() - 1);
        const std::size_t k = pick(state_.rng);
        std::optional<StepCandidate> best = scan_best(k);
        std::optional<StepCandidate> applied;
        if (best && best->objective_gain > 0.0) {
            apply(*best);
            applied = best;
        }
        last_best_gain_ = best ? best->objective_gain : 0.0;
        ++state_.loop_count;
        if (state_.loop_count % config_.score_refresh_every == 0) refresh_scores();
        return applied;
    }

    void refresh_scores() {
        const std::size_t np = state_.n_pos();
        std::vector<double> v(state_.n());
        for (std::size_t i = 0; i < np; ++i) v[i] = state_.alpha[i];
        for (std::size_t j = 0; j < state_.n_neg(); ++j) v[np + j] = state_.beta[j];
        state_.scores = kernel_.multiply(v);
        state_.refresh_sums();
    }

    // Runs until max_loops or the optional gain threshold; records the trace
    // every trace_every loops (and at the final loop).
    ConvergenceTrace solve(const GapEvaluator& gap_evaluator = {}) {
        const auto t0 = std::chrono::steady_clock::now();
        auto elapsed = [&] {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        };
        auto record = [&] {
            TracePoint p;
            p.loop = state_.loop_count;
            p.time_s = elapsed();
            p.dual_objective = dual_objective(problem_, state_);
            if (gap_evaluator) {
                p.primal_objective = gap_evaluator(state_);
                p.gap = *p.primal_objective - p.dual_objective;
            }
            trace_.points.push_back(p);
        };
        for (std::uint64_t loop = 1; loop <= config_.max_loops; ++loop) {
            run_loop();
            const bool stop =
                config_.gain_tolerance && last_best_gain_ < *config_.gain_tolerance;
            if (loop % config_.trace_every == 0 || loop == config_.max_loops || stop) record();
            if (stop) break;
        }
        return trace_;
    }

    double last_best_gain() const { return last_best_gain_; }

private:
    ProblemSpec problem_;
    const KernelMatrix& kernel_;
    SolverConfig config_;
    SolverState state_;
    ConvergenceTrace trace_;
    std::vector<double> col_k_;
    std::vector<double> col_l_;
    std::size_t scanned_k_ = std::numeric_limits<std::size_t>::max();
    double last_best_gain_ = 0.0;
};

inline std::pair<SolverState, ConvergenceTrace> solve(
    const ProblemSpec& problem, const KernelMatrix& K, const SolverConfig& config,
    const CoordinateSolver::GapEvaluator& gap_evaluator = {}) {
    CoordinateSolver solver(problem, K, config);
    ConvergenceTrace trace = solver.solve(gap_evaluator);
    return {std::move(solver.state()), std::move(trace)};
}

}  // namespace toprank
