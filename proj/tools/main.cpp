// Command-line front end: train, predict, evaluate, grid-search, benchmark
// and kernel-cache maintenance for the TopPush/TopPushK/PatMat solvers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "toprank/toprank.hpp"

namespace fs = std::filesystem;
using namespace toprank;
using cli::RunConfig;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

Dataset load_dataset(const RunConfig& cfg) {
    if (cfg.dataset.path.empty()) throw invalid_spec("dataset.path is not set");
    DelimitedFormat fmt;
    fmt.delimiter = cfg.dataset.delimiter;
    fmt.has_header = cfg.dataset.has_header;
    fmt.label_column = cfg.dataset.label_column;
    const auto format =
        cfg.dataset.format == "sparse" ? DataFormat::SparseText : DataFormat::Delimited;
    auto raw = load(cfg.dataset.path, format, fmt);
    auto ds = binarize(raw, cfg.dataset.pos_labels);
    ds.source_path = cfg.dataset.path;
    ds.source_format = cfg.dataset.format;
    return ds;
}

Split make_split(const RunConfig& cfg, const Dataset& ds) {
    const auto scheme = cfg.split.scheme == "fixed_test" ? SplitScheme::FixedTest
                                                         : SplitScheme::TrainValidTest;
    auto sp = split(ds, scheme, cfg.split.seed, cfg.split.stratify, cfg.split.test_size);
    if (cfg.split.standardize) {
        const auto st = Standardizer::fit(sp.train.features);
        st.apply(sp.train.features);
        st.apply(sp.valid.features);
        st.apply(sp.test.features);
    }
    return sp;
}

KernelMatrix train_kernel(const RunConfig& cfg, const FeatureMatrix& pos,
                          const FeatureMatrix& neg) {
    if (!cfg.kernel_cache.empty()) {
        auto K = KernelMatrix::open_cache(cfg.kernel_cache);
        if (K.n_pos() != pos.rows() || K.n_neg() != neg.rows())
            throw format_error("kernel cache shape does not match the training split");
        if (K.spec().family != cfg.kernel.family ||
            (K.spec().family == KernelFamily::Gaussian && K.spec().sigma != cfg.kernel.sigma))
            throw format_error("kernel cache was built with a different kernel spec");
        return K;
    }
    return KernelMatrix::build(cfg.kernel, pos, neg, cfg.memory_budget);
}

// Decision threshold stored with the model: the problem's own rule evaluated
// on the final training scores.
ThresholdSpec model_threshold_spec(const ProblemSpec& problem) {
    if (problem.kind == ProblemKind::TopPushK) return ThresholdSpec::top_k_mean(problem.K);
    return ThresholdSpec::hard_quantile(problem.tau);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << content;
    out.close();
    if (!out) throw io_error("failed to write " + path);
}

struct TrainingResult {
    TrainedModel model;
    ConvergenceTrace trace;
    json summary;
    Split split_parts;
    double wall_seconds = 0.0;
};

TrainingResult run_training(const RunConfig& cfg) {
    auto ds = load_dataset(cfg);
    auto sp = make_split(cfg, ds);
    const auto [posX, negX] = sp.train.class_blocks();
    cfg.problem.validate_for(posX.rows(), negX.rows());
    const auto K = train_kernel(cfg, posX, negX);

    CoordinateSolver solver(cfg.problem, K, cfg.solver);
    const auto t0 = std::chrono::steady_clock::now();
    const auto trace = solver.solve(
        [&](const SolverState& st) { return primal_objective(cfg.problem, st).first; });
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const auto& st = solver.state();
    const double dual = dual_objective(cfg.problem, st);
    const auto [primal, primal_t] = primal_objective(cfg.problem, st);
    const auto neg_scores = negative_primal_scores(st);
    const double cut = threshold(model_threshold_spec(cfg.problem), neg_scores, st.n());

    TrainingResult result;
    result.model = make_model(cfg.kernel, cfg.problem, st, posX, negX, cut);
    result.model.metadata.seed = cfg.solver.seed;
    result.model.metadata.final_dual_objective = dual;
    result.trace = trace;
    result.split_parts = std::move(sp);
    result.wall_seconds = wall;

    json summary;
    summary["final_dual_objective"] = dual;
    summary["final_primal_objective"] = primal;
    summary["duality_gap"] = primal - dual;
    summary["relative_gap"] = (primal - dual) / std::max(std::abs(primal), 1e-12);
    summary["primal_threshold"] = primal_t;
    summary["threshold"] = cut;
    summary["threshold_kind"] = to_string(model_threshold_spec(cfg.problem).kind);
    summary["loops"] = st.loop_count;
    summary["wall_time_s"] = wall;
    summary["wall_time_per_loop_ms"] =
        st.loop_count > 0 ? 1e3 * wall / static_cast<double>(st.loop_count) : 0.0;
    summary["n_train"] = st.n();
    summary["n_train_pos"] = st.n_pos();
    summary["n_train_neg"] = st.n_neg();
    summary["support_pos"] = result.model.alpha.size();
    summary["support_neg"] = result.model.beta.size();
    result.summary = std::move(summary);
    return result;
}

void write_split_manifest(const std::string& path, const Split& sp) {
    std::ostringstream out;
    out << "index,role\n";
    for (auto i : sp.train_index) out << i << ",train\n";
    for (auto i : sp.valid_index) out << i << ",valid\n";
    for (auto i : sp.test_index) out << i << ",test\n";
    write_text(path, out.str());
}

const Dataset& pick_split(const Split& sp, const Dataset& full, const std::string& name) {
    if (name == "train") return sp.train;
    if (name == "valid") return sp.valid;
    if (name == "test") return sp.test;
    if (name == "all") return full;
    throw invalid_spec("unknown split '" + name + "' (train|valid|test|all)");
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& cfg) {
    ensure_dir(cfg.output_dir);
    const auto result = run_training(cfg);
    const auto dir = fs::path(cfg.output_dir);

    save(result.model, (dir / "model.json").string());
    std::ostringstream trace_csv;
    result.trace.write_csv(trace_csv);
    write_text((dir / "trace.csv").string(), trace_csv.str());
    write_text((dir / "summary.json").string(), result.summary.dump(2) + "\n");
    write_text((dir / "resolved_config.json").string(), cli::to_json(cfg).dump(2) + "\n");
    write_split_manifest((dir / "splits.csv").string(), result.split_parts);

    std::cout << "trained " << to_string(cfg.problem.kind) << " in " << result.wall_seconds
              << " s; dual " << result.summary["final_dual_objective"].get<double>() << ", gap "
              << result.summary["duality_gap"].get<double>() << "\n"
              << "artifacts in " << cfg.output_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

int cmd_predict(const std::string& model_path, const RunConfig& cfg,
                const std::string& output_path) {
    const auto model = load(model_path);
    // raw table, not a binarized dataset: scoring must work whatever the
    // label column contains
    DelimitedFormat fmt;
    fmt.delimiter = cfg.dataset.delimiter;
    fmt.has_header = cfg.dataset.has_header;
    fmt.label_column = cfg.dataset.label_column;
    const auto raw = toprank::load(cfg.dataset.path,
                                   cfg.dataset.format == "sparse" ? DataFormat::SparseText
                                                                  : DataFormat::Delimited,
                                   fmt);
    const auto scores = predict_scores(model, raw.features);
    std::ostringstream out;
    out << "index,score,predicted,label\n";
    char buf[128];
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%d,%.17g\n", i, scores[i],
                      scores[i] >= model.threshold ? 1 : 0, raw.labels[i]);
        out << buf;
    }
    write_text(output_path, out.str());
    std::cout << "wrote " << scores.size() << " predictions to " << output_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const RunConfig& cfg, const std::string& model_path,
                 const std::string& split_name) {
    ensure_dir(cfg.output_dir);
    const auto model = load(model_path);
    const auto ds = load_dataset(cfg);
    const auto sp = make_split(cfg, ds);
    const auto& part = pick_split(sp, ds, split_name);
    if (part.features.cols() != model.dimension())
        throw dimension_mismatch("evaluation data dimension does not match the model");

    ScoredLabels sl;
    sl.scores = predict_scores(model, part.features);
    sl.labels = part.labels;

    const auto dir = fs::path(cfg.output_dir);
    const auto curve = pr_curve(sl);
    std::ostringstream pr_csv;
    write_pr_curve_csv(pr_csv, curve);
    write_text((dir / "pr_curve.csv").string(), pr_csv.str());

    std::ostringstream patrec;
    patrec << "target_recall,precision\n";
    json patrec_json = json::object();
    char buf[96];
    for (double target : cfg.evaluation.p_at_r_targets) {
        const double p = precision_at_recall(sl, target);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", target, p);
        patrec << buf;
        std::snprintf(buf, sizeof buf, "%g", target);
        patrec_json[buf] = p;
    }
    write_text((dir / "p_at_rec.csv").string(), patrec.str());

    std::ostringstream hist_csv;
    write_histogram_csv(hist_csv, score_histogram(sl, cfg.evaluation.histogram_bins));
    write_text((dir / "score_hist.csv").string(), hist_csv.str());

    // the problem's own threshold recomputed on this split's negative scores
    std::vector<double> neg_scores;
    for (std::size_t i = 0; i < sl.scores.size(); ++i)
        if (!sl.labels[i]) neg_scores.push_back(sl.scores[i]);
    const double split_cut =
        threshold(model_threshold_spec(model.problem), neg_scores, sl.scores.size());
    const auto at_model_cut = precision_recall_at(sl, model.threshold);

    json report;
    report["split"] = split_name;
    report["n"] = sl.scores.size();
    report["n_pos"] = sl.n_pos();
    report["model_threshold"] = model.threshold;
    report["threshold_kind"] = to_string(model_threshold_spec(model.problem).kind);
    report["split_threshold"] = split_cut;
    report["recall_at_model_threshold"] = at_model_cut.recall;
    if (at_model_cut.precision) report["precision_at_model_threshold"] = *at_model_cut.precision;
    report["precision_at_recall"] = patrec_json;
    write_text((dir / "report.json").string(), report.dump(2) + "\n");
    write_text((dir / "resolved_config.json").string(), cli::to_json(cfg).dump(2) + "\n");

    std::cout << "evaluated " << split_name << " split (" << sl.scores.size() << " samples); "
              << "report in " << cfg.output_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// grid search
// ---------------------------------------------------------------------------

struct GridCombo {
    std::size_t index = 0;
    KernelSpec kernel;
    ProblemSpec problem;
};

struct GridOutcome {
    std::size_t index = 0;
    double metric = std::numeric_limits<double>::quiet_NaN();
    double final_dual = 0.0;
    std::string status = "ok";
    TrainedModel model;
};

int cmd_grid_search(RunConfig cfg) {
    if (cfg.grid.empty())
        throw invalid_spec("grid-search needs a non-empty 'grid' section in the config");
    if (cfg.grid.C.empty()) cfg.grid.C = {cfg.problem.C};
    if (cfg.grid.sigma.empty()) cfg.grid.sigma = {cfg.kernel.sigma};
    if (cfg.grid.K.empty()) cfg.grid.K = {cfg.problem.K};
    if (cfg.grid.tau.empty()) cfg.grid.tau = {cfg.problem.tau};

    ensure_dir(cfg.output_dir);
    const auto ds = load_dataset(cfg);
    const auto sp = make_split(cfg, ds);
    const auto [posX, negX] = sp.train.class_blocks();

    // kernel-major enumeration so each Gram matrix is built exactly once
    std::vector<KernelSpec> kernels;
    if (cfg.kernel.family == KernelFamily::Linear) {
        kernels.push_back(KernelSpec::linear());
    } else {
        for (double s : cfg.grid.sigma) kernels.push_back(KernelSpec::gaussian(s));
    }
    std::vector<GridCombo> combos;
    for (const auto& ks : kernels)
        for (double C : cfg.grid.C) {
            if (cfg.problem.kind == ProblemKind::TopPushK) {
                for (std::size_t K : cfg.grid.K) {
                    ProblemSpec p = ProblemSpec::top_push_k(K, C, cfg.problem.surrogate_pos);
                    combos.push_back({combos.size(), ks, p});
                }
            } else {
                for (double tau : cfg.grid.tau) {
                    ProblemSpec p = ProblemSpec::pat_mat(tau, C, cfg.problem.surrogate_pos,
                                                         cfg.problem.surrogate_neg);
                    combos.push_back({combos.size(), ks, p});
                }
            }
        }

    std::vector<GridOutcome> outcomes(combos.size());
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::size_t done = 0;
    while (done < combos.size()) {
        // one kernel group at a time; the Gram matrix is shared read-only
        const KernelSpec group_kernel = combos[done].kernel;
        std::size_t group_end = done;
        while (group_end < combos.size() &&
               combos[group_end].kernel.family == group_kernel.family &&
               combos[group_end].kernel.sigma == group_kernel.sigma)
            ++group_end;
        const auto K = KernelMatrix::build(group_kernel, posX, negX, cfg.memory_budget);

        std::size_t next = done;
        while (next < group_end) {
            const std::size_t batch_end = std::min<std::size_t>(next + workers, group_end);
            std::vector<std::future<GridOutcome>> batch;
            for (std::size_t c = next; c < batch_end; ++c) {
                batch.push_back(std::async(std::launch::async, [&, c]() {
                    const GridCombo& combo = combos[c];
                    GridOutcome out;
                    out.index = combo.index;
                    try {
                        combo.problem.validate_for(posX.rows(), negX.rows());
                        CoordinateSolver solver(combo.problem, K, cfg.solver);
                        solver.solve();
                        const auto& st = solver.state();
                        out.final_dual = dual_objective(combo.problem, st);
                        const auto neg_scores = negative_primal_scores(st);
                        const double cut =
                            threshold(model_threshold_spec(combo.problem), neg_scores, st.n());
                        out.model = make_model(combo.kernel, combo.problem, st, posX, negX, cut);
                        out.model.metadata.seed = cfg.solver.seed;
                        out.model.metadata.final_dual_objective = out.final_dual;
                        ScoredLabels sl;
                        sl.scores = predict_scores(out.model, sp.valid.features);
                        sl.labels = sp.valid.labels;
                        out.metric = precision_at_recall(sl, cfg.evaluation.target_recall);
                    } catch (const std::exception& e) {
                        out.status = e.what();
                        out.metric = std::numeric_limits<double>::quiet_NaN();
                    }
                    return out;
                }));
            }
            for (auto& f : batch) {
                auto out = f.get();
                outcomes[out.index] = std::move(out);
            }
            next = batch_end;
        }
        done = group_end;
    }

    // rank: valid metrics descending, ties by combo order, failures last
    std::vector<std::size_t> order(outcomes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const bool ok_a = outcomes[a].status == "ok";
        const bool ok_b = outcomes[b].status == "ok";
        if (ok_a != ok_b) return ok_a;
        if (ok_a && outcomes[a].metric != outcomes[b].metric)
            return outcomes[a].metric > outcomes[b].metric;
        return a < b;
    });

    std::ostringstream lb;
    lb << "rank,combo,kind,K,tau,C,kernel,sigma,metric,final_dual,status\n";
    char buf[512];
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& combo = combos[order[r]];
        const auto& out = outcomes[order[r]];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%s,%zu,%.17g,%.17g,%s,%.17g,%.17g,%.17g,",
                      r + 1, combo.index, to_string(combo.problem.kind), combo.problem.K,
                      combo.problem.tau, combo.problem.C, to_string(combo.kernel.family),
                      combo.kernel.sigma, out.metric, out.final_dual);
        lb << buf << '"' << (out.status == "ok" ? "ok" : out.status) << '"' << "\n";
    }
    const auto dir = fs::path(cfg.output_dir);
    write_text((dir / "leaderboard.csv").string(), lb.str());
    write_text((dir / "resolved_config.json").string(), cli::to_json(cfg).dump(2) + "\n");

    if (!order.empty() && outcomes[order.front()].status == "ok") {
        save(outcomes[order.front()].model, (dir / "best_model.json").string());
        std::cout << "grid search over " << combos.size() << " combinations; best metric "
                  << outcomes[order.front()].metric << "\n";
    } else {
        std::cout << "grid search over " << combos.size()
                  << " combinations; no combination succeeded\n";
    }
    std::cout << "leaderboard in " << cfg.output_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

FeatureMatrix benchmark_blob(std::size_t n, std::size_t d, double center, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    FeatureMatrix X(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) X.at(i, c) = center + gauss(rng);
    return X;
}

int cmd_benchmark(const RunConfig& cfg, const std::vector<std::size_t>& sizes,
                  std::size_t measured_loops, std::size_t warmup_loops) {
    ensure_dir(cfg.output_dir);
    using clock = std::chrono::steady_clock;
    std::ostringstream table;
    table << "n,loop_ms_mean,loop_ms_std,delta_ns_mean\n";
    std::vector<double> log_n, log_t;

    for (std::size_t n : sizes) {
        if (n < 8) throw invalid_spec("benchmark sizes must be at least 8");
        std::mt19937_64 rng(cfg.solver.seed + n);
        const std::size_t np = std::max<std::size_t>(1, n / 4);
        const auto pos = benchmark_blob(np, 6, 1.0, rng);
        const auto neg = benchmark_blob(n - np, 6, -1.0, rng);
        cfg.problem.validate_for(pos.rows(), neg.rows());
        const auto K = KernelMatrix::build(cfg.kernel, pos, neg, cfg.memory_budget);
        CoordinateSolver solver(cfg.problem, K, cfg.solver);
        for (std::size_t i = 0; i < warmup_loops; ++i) solver.run_loop();

        double sum = 0.0, sum2 = 0.0;
        for (std::size_t i = 0; i < measured_loops; ++i) {
            const auto t0 = clock::now();
            solver.run_loop();
            const double ms =
                std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            sum += ms;
            sum2 += ms * ms;
        }
        const double mean = sum / static_cast<double>(measured_loops);
        const double var = std::max(0.0, sum2 / static_cast<double>(measured_loops) - mean * mean);

        // per-candidate time from scan-only probes
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const std::size_t probes = 100;
        const auto s0 = clock::now();
        for (std::size_t i = 0; i < probes; ++i) solver.scan_best(pick(solver.state().rng));
        const double scan_s = std::chrono::duration<double>(clock::now() - s0).count();
        const double delta_ns = 1e9 * scan_s / static_cast<double>(probes * (n - 1));

        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.3f\n", n, mean, std::sqrt(var), delta_ns);
        table << buf;
        std::cout << buf;
        log_n.push_back(std::log(static_cast<double>(n)));
        log_t.push_back(std::log(std::max(mean, 1e-9)));
    }

    double exponent = 0.0;
    if (sizes.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < log_n.size(); ++i) {
            mx += log_n[i];
            my += log_t[i];
        }
        mx /= static_cast<double>(log_n.size());
        my /= static_cast<double>(log_n.size());
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < log_n.size(); ++i) {
            num += (log_n[i] - mx) * (log_t[i] - my);
            den += (log_n[i] - mx) * (log_n[i] - mx);
        }
        exponent = num / den;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "# fit_exponent,%.4f\n", exponent);
    table << buf;
    std::cout << "per-loop time ~ n^" << exponent << "\n";
    write_text((fs::path(cfg.output_dir) / "benchmark.csv").string(), table.str());
    write_text((fs::path(cfg.output_dir) / "resolved_config.json").string(),
               cli::to_json(cfg).dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// kernel cache
// ---------------------------------------------------------------------------

int cmd_cache_build(const RunConfig& cfg, const std::string& out_path) {
    const auto ds = load_dataset(cfg);
    const auto sp = make_split(cfg, ds);
    const auto [posX, negX] = sp.train.class_blocks();
    KernelMatrix::build_cache(cfg.kernel, posX, negX, out_path);
    std::cout << "kernel cache for " << posX.rows() + negX.rows()
              << " training samples written to " << out_path << "\n";
    return 0;
}

int cmd_cache_inspect(const std::string& path) {
    const auto K = KernelMatrix::open_cache(path);  // validates header + checksum
    json j;
    j["path"] = path;
    j["n_pos"] = K.n_pos();
    j["n_neg"] = K.n_neg();
    j["n"] = K.size();
    j["kernel"] = to_json(K.spec());
    j["checksum_ok"] = true;
    j["bytes"] = fs::file_size(path);
    std::cout << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

struct Overrides {
    std::optional<std::uint64_t> solver_seed, split_seed, max_loops, trace_every;
    std::optional<double> C, tau, sigma, theta;
    std::optional<std::size_t> K;
    std::optional<std::string> problem_kind, kernel_family, surrogate, output_dir;
    bool zero_start = false;

    void apply(RunConfig& cfg) const {
        if (solver_seed) cfg.solver.seed = *solver_seed;
        if (split_seed) cfg.split.seed = *split_seed;
        if (max_loops) cfg.solver.max_loops = *max_loops;
        if (trace_every) cfg.solver.trace_every = *trace_every;
        if (zero_start) cfg.solver.zero_start = true;
        if (output_dir) cfg.output_dir = *output_dir;
        if (kernel_family || sigma) {
            const auto family =
                kernel_family ? kernel_family_from_string(*kernel_family) : cfg.kernel.family;
            cfg.kernel = KernelSpec(family, sigma.value_or(cfg.kernel.sigma));
        }
        const bool rebuild = problem_kind || C || tau || K || surrogate || theta;
        if (rebuild) {
            auto pos = cfg.problem.surrogate_pos;
            auto neg = cfg.problem.surrogate_neg;
            if (surrogate) {
                const auto family = surrogate_family_from_string(*surrogate);
                pos = SurrogateSpec(family, theta.value_or(pos.theta));
                neg = SurrogateSpec(family, theta.value_or(neg.theta));
            } else if (theta) {
                pos = SurrogateSpec(pos.family, *theta);
                neg = SurrogateSpec(neg.family, *theta);
            }
            const std::string kind =
                problem_kind.value_or(std::string(to_string(cfg.problem.kind)));
            const double newC = C.value_or(cfg.problem.C);
            if (kind == "toppush")
                cfg.problem = ProblemSpec::top_push(newC, pos);
            else if (kind == "toppushk")
                cfg.problem = ProblemSpec::top_push_k(K.value_or(cfg.problem.K), newC, pos);
            else if (kind == "patmat")
                cfg.problem = ProblemSpec::pat_mat(tau.value_or(cfg.problem.tau), newC, pos, neg);
            else
                throw invalid_spec("unknown problem kind: " + kind);
        }
    }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--seed", ov.solver_seed, "solver RNG seed");
    cmd->add_option("--split-seed", ov.split_seed, "dataset split seed");
    cmd->add_option("--max-loops", ov.max_loops, "repeat-loop budget");
    cmd->add_option("--trace-every", ov.trace_every, "trace recording stride");
    cmd->add_option("--C", ov.C, "regularization constant");
    cmd->add_option("--K", ov.K, "TopPushK K");
    cmd->add_option("--tau", ov.tau, "PatMat quantile level");
    cmd->add_option("--sigma", ov.sigma, "gaussian kernel width");
    cmd->add_option("--theta", ov.theta, "surrogate scale");
    cmd->add_option("--problem", ov.problem_kind, "toppush|toppushk|patmat");
    cmd->add_option("--kernel", ov.kernel_family, "linear|gaussian");
    cmd->add_option("--surrogate", ov.surrogate, "hinge|quadratic");
    cmd->add_option("--output-dir", ov.output_dir, "output directory");
    cmd->add_flag("--zero-start", ov.zero_start, "start from the zero dual state");
}

int error_exit(const char* type, const std::string& message, int code) {
    json j;
    j["error"] = {{"type", type}, {"message", message}};
    std::cerr << j.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernelized TopPush / TopPushK / PatMat classifiers"};
    app.require_subcommand(1);

    std::string config_path, model_path, data_path, output_path, split_name = "test";
    std::string cache_path;
    std::vector<std::size_t> sizes{500, 1000, 2000, 4000};
    std::size_t bench_loops = 300, bench_warmup = 100;
    Overrides ov;
    RunConfig predict_cfg;

    auto* train = app.add_subcommand("train", "train a model and write its artifacts");
    train->add_option("--config", config_path, "run config JSON")->required();
    add_override_flags(train, ov);

    auto* predict = app.add_subcommand("predict", "score a dataset with a trained model");
    predict->add_option("--model", model_path, "model file")->required();
    predict->add_option("--data", data_path, "dataset file")->required();
    predict->add_option("--format", predict_cfg.dataset.format, "delimited|sparse");
    predict->add_option("--label-column", predict_cfg.dataset.label_column, "label column");
    std::string predict_delim = ",";
    predict->add_option("--delimiter", predict_delim, "field delimiter");
    bool predict_header = false;
    predict->add_flag("--has-header", predict_header, "first row is a header");
    predict->add_option("--output", output_path, "output CSV")->required();

    auto* evaluate = app.add_subcommand("evaluate", "metrics report for a trained model");
    evaluate->add_option("--config", config_path, "run config JSON")->required();
    evaluate->add_option("--model", model_path, "model file")->required();
    evaluate->add_option("--split", split_name, "train|valid|test|all");
    evaluate->add_option("--output-dir", ov.output_dir, "output directory");

    auto* grid = app.add_subcommand("grid-search", "train every grid combination");
    grid->add_option("--config", config_path, "run config JSON")->required();
    add_override_flags(grid, ov);

    auto* bench = app.add_subcommand("benchmark", "per-loop timing across synthetic sizes");
    bench->add_option("--config", config_path, "run config JSON")->required();
    bench->add_option("--sizes", sizes, "sample counts to benchmark");
    bench->add_option("--loops", bench_loops, "measured loops per size");
    bench->add_option("--warmup", bench_warmup, "warmup loops per size");
    add_override_flags(bench, ov);

    auto* cache = app.add_subcommand("kernel-cache", "build or inspect kernel caches");
    auto* cache_build = cache->add_subcommand("build", "precompute the training Gram matrix");
    cache_build->add_option("--config", config_path, "run config JSON")->required();
    cache_build->add_option("--out", cache_path, "cache file")->required();
    auto* cache_inspect = cache->add_subcommand("inspect", "validate and describe a cache file");
    cache_inspect->add_option("--path", cache_path, "cache file")->required();
    cache->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) {
            RunConfig cfg = cli::load_run_config(config_path);
            ov.apply(cfg);
            return cmd_train(cfg);
        }
        if (predict->parsed()) {
            if (predict_cfg.dataset.format != "delimited" && predict_cfg.dataset.format != "sparse")
                throw invalid_spec("--format must be 'delimited' or 'sparse'");
            predict_cfg.dataset.path = data_path;
            predict_cfg.dataset.delimiter = predict_delim.empty() ? ',' : predict_delim[0];
            predict_cfg.dataset.has_header = predict_header;
            return cmd_predict(model_path, predict_cfg, output_path);
        }
        if (evaluate->parsed()) {
            RunConfig cfg = cli::load_run_config(config_path);
            if (ov.output_dir) cfg.output_dir = *ov.output_dir;
            return cmd_evaluate(cfg, model_path, split_name);
        }
        if (grid->parsed()) {
            RunConfig cfg = cli::load_run_config(config_path);
            ov.apply(cfg);
            return cmd_grid_search(cfg);
        }
        if (bench->parsed()) {
            RunConfig cfg = cli::load_run_config(config_path);
            ov.apply(cfg);
            return cmd_benchmark(cfg, sizes, bench_loops, bench_warmup);
        }
        if (cache_build->parsed()) {
            RunConfig cfg = cli::load_run_config(config_path);
            return cmd_cache_build(cfg, cache_path);
        }
        if (cache_inspect->parsed()) return cmd_cache_inspect(cache_path);
        return 2;
    } catch (const invalid_spec& e) {
        return error_exit("config", e.what(), 2);
    } catch (const data_error& e) {
        return error_exit("data", e.what(), 3);
    } catch (const io_error& e) {
        return error_exit("io", e.what(), 3);
    } catch (const numeric_error& e) {
        return error_exit("numeric", e.what(), 4);
    } catch (const error& e) {
        return error_exit("internal", e.what(), 4);
    } catch (const std::exception& e) {
        return error_exit("unexpected", e.what(), 1);
    }
}
