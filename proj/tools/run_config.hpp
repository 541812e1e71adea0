#pragma once

// Run configuration: one JSON file plus command-line overrides. Every run
// writes its fully resolved configuration next to its outputs.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "toprank/toprank.hpp"

namespace cli {

using toprank::json;

struct DatasetConfig {
    std::string path;
    std::string format = "delimited";  // delimited | sparse
    char delimiter = ',';
    bool has_header = false;
    int label_column = -1;
    std::set<double> pos_labels{1.0};
};

struct SplitConfig {
    std::string scheme = "train_valid_test";  // train_valid_test | fixed_test
    std::uint64_t seed = 1;
    bool stratify = false;
    bool standardize = false;
    std::size_t test_size = 0;  // fixed_test only
};

struct EvaluationConfig {
    std::string metric = "p_at_r";
    double target_recall = 0.1;
    std::size_t histogram_bins = 40;
    std::vector<double> p_at_r_targets{0.05, 0.1, 0.2, 0.4, 0.6, 0.8};
};

struct GridConfig {
    std::vector<double> C;
    std::vector<double> sigma;
    std::vector<std::size_t> K;
    std::vector<double> tau;

    bool empty() const { return C.empty() && sigma.empty() && K.empty() && tau.empty(); }
};

struct RunConfig {
    DatasetConfig dataset;
    SplitConfig split;
    toprank::ProblemSpec problem = toprank::ProblemSpec::top_push(1.0, toprank::SurrogateSpec::quadratic());
    toprank::KernelSpec kernel;
    toprank::SolverConfig solver;
    EvaluationConfig evaluation;
    GridConfig grid;
    std::string output_dir = "out";
    std::string kernel_cache;  // optional: reuse a prebuilt cache for training
    std::uint64_t memory_budget = toprank::KernelMatrix::kDefaultMemoryBudget;
};

inline json to_json(const RunConfig& c) {
    json j;
    j["dataset"] = {{"path", c.dataset.path},
                    {"format", c.dataset.format},
                    {"delimiter", std::string(1, c.dataset.delimiter)},
                    {"has_header", c.dataset.has_header},
                    {"label_column", c.dataset.label_column},
                    {"pos_labels", c.dataset.pos_labels}};
    j["split"] = {{"scheme", c.split.scheme},
                  {"seed", c.split.seed},
                  {"stratify", c.split.stratify},
                  {"standardize", c.split.standardize},
                  {"test_size", c.split.test_size}};
    j["problem"] = toprank::to_json(c.problem);
    j["kernel"] = toprank::to_json(c.kernel);
    j["solver"] = {{"max_loops", c.solver.max_loops},
                   {"seed", c.solver.seed},
                   {"trace_every", c.solver.trace_every},
                   {"score_refresh_every", c.solver.score_refresh_every},
                   {"zero_start", c.solver.zero_start}};
    if (c.solver.gain_tolerance) j["solver"]["gain_tolerance"] = *c.solver.gain_tolerance;
    j["evaluation"] = {{"metric", c.evaluation.metric},
                       {"target_recall", c.evaluation.target_recall},
                       {"histogram_bins", c.evaluation.histogram_bins},
                       {"p_at_r_targets", c.evaluation.p_at_r_targets}};
    if (!c.grid.empty()) {
        j["grid"] = json::object();
        if (!c.grid.C.empty()) j["grid"]["C"] = c.grid.C;
        if (!c.grid.sigma.empty()) j["grid"]["sigma"] = c.grid.sigma;
        if (!c.grid.K.empty()) j["grid"]["K"] = c.grid.K;
        if (!c.grid.tau.empty()) j["grid"]["tau"] = c.grid.tau;
    }
    j["output_dir"] = c.output_dir;
    if (!c.kernel_cache.empty()) j["kernel_cache"] = c.kernel_cache;
    j["memory_budget_bytes"] = c.memory_budget;
    return j;
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        c.dataset.path = d.value("path", std::string{});
        c.dataset.format = d.value("format", std::string{"delimited"});
        if (c.dataset.format != "delimited" && c.dataset.format != "sparse")
            throw toprank::invalid_spec("dataset.format must be 'delimited' or 'sparse'");
        const std::string delim = d.value("delimiter", std::string{","});
        if (delim.size() != 1) throw toprank::invalid_spec("dataset.delimiter must be one character");
        c.dataset.delimiter = delim[0];
        c.dataset.has_header = d.value("has_header", false);
        c.dataset.label_column = d.value("label_column", -1);
        if (d.contains("pos_labels")) {
            c.dataset.pos_labels.clear();
            for (const auto& v : d.at("pos_labels")) c.dataset.pos_labels.insert(v.get<double>());
        }
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        c.split.scheme = s.value("scheme", std::string{"train_valid_test"});
        if (c.split.scheme != "train_valid_test" && c.split.scheme != "fixed_test")
            throw toprank::invalid_spec("split.scheme must be 'train_valid_test' or 'fixed_test'");
        c.split.seed = s.value("seed", std::uint64_t{1});
        c.split.stratify = s.value("stratify", false);
        c.split.standardize = s.value("standardize", false);
        c.split.test_size = s.value("test_size", std::size_t{0});
    }
    if (j.contains("problem")) c.problem = toprank::problem_from_json(j.at("problem"));
    if (j.contains("kernel")) c.kernel = toprank::kernel_from_json(j.at("kernel"));
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        c.solver.max_loops = s.value("max_loops", std::uint64_t{20000});
        c.solver.seed = s.value("seed", std::uint64_t{0});
        c.solver.trace_every = s.value("trace_every", std::uint64_t{100});
        c.solver.score_refresh_every = s.value("score_refresh_every", std::uint64_t{4096});
        c.solver.zero_start = s.value("zero_start", false);
        if (s.contains("gain_tolerance") && !s.at("gain_tolerance").is_null())
            c.solver.gain_tolerance = s.at("gain_tolerance").get<double>();
    }
    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        c.evaluation.metric = e.value("metric", std::string{"p_at_r"});
        if (c.evaluation.metric != "p_at_r")
            throw toprank::invalid_spec("unknown validation metric: " + c.evaluation.metric);
        c.evaluation.target_recall = e.value("target_recall", 0.1);
        c.evaluation.histogram_bins = e.value("histogram_bins", std::size_t{40});
        if (e.contains("p_at_r_targets"))
            c.evaluation.p_at_r_targets = e.at("p_at_r_targets").get<std::vector<double>>();
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.contains("C")) c.grid.C = g.at("C").get<std::vector<double>>();
        if (g.contains("sigma")) c.grid.sigma = g.at("sigma").get<std::vector<double>>();
        if (g.contains("K")) c.grid.K = g.at("K").get<std::vector<std::size_t>>();
        if (g.contains("tau")) c.grid.tau = g.at("tau").get<std::vector<double>>();
    }
    c.output_dir = j.value("output_dir", std::string{"out"});
    c.kernel_cache = j.value("kernel_cache", std::string{});
    c.memory_budget =
        j.value("memory_budget_bytes", toprank::KernelMatrix::kDefaultMemoryBudget);
    c.solver.check();
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw toprank::invalid_spec("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw toprank::invalid_spec("malformed config " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace cli
