#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "toprank/dense.hpp"
#include "toprank/kernel.hpp"
#include "toprank/serialize.hpp"
#include "toprank/state.hpp"

namespace toprank {

inline constexpr double kCoefficientPruneTol = 1e-10;
inline constexpr std::uint32_t kModelSchemaVersion = 1;

// Kernel-expansion classifier: pred(z) = sum_i alpha_i k(z, x_i+)
//                                      - sum_j beta_j k(z, x_j-).
// Only samples with coefficients above the pruning tolerance are stored.
struct TrainedModel {
    KernelSpec kernel;
    ProblemSpec problem;
    double threshold = 0.0;
    std::vector<double> alpha;
    std::vector<double> beta;
    FeatureMatrix support_pos;
    FeatureMatrix support_neg;
    std::vector<std::size_t> support_pos_index;  // original training indices
    std::vector<std::size_t> support_neg_index;

    struct Metadata {
        std::uint64_t seed = 0;
        std::uint64_t loop_count = 0;
        double final_dual_objective = 0.0;
    } metadata;

    std::size_t dimension() const {
        return support_pos.empty() ? support_neg.cols() : support_pos.cols();
    }
};

inline TrainedModel make_model(const KernelSpec& kernel, const ProblemSpec& problem,
                               const SolverState& state, const FeatureMatrix& train_pos,
                               const FeatureMatrix& train_neg, double threshold) {
    TrainedModel m;
    m.kernel = kernel;
    m.problem = problem;
    m.threshold = threshold;
    std::vector<std::size_t> pos_idx, neg_idx;
    for (std::size_t i = 0; i < state.alpha.size(); ++i)
        if (state.alpha[i] > kCoefficientPruneTol) {
            m.alpha.push_back(state.alpha[i]);
            pos_idx.push_back(i);
        }
    for (std::size_t j = 0; j < state.beta.size(); ++j)
        if (state.beta[j] > kCoefficientPruneTol) {
            m.beta.push_back(state.beta[j]);
            neg_idx.push_back(j);
        }
    m.support_pos = train_pos.take(pos_idx);
    m.support_neg = train_neg.take(neg_idx);
    m.support_pos_index = std::move(pos_idx);
    m.support_neg_index = std::move(neg_idx);
    m.metadata.loop_count = state.loop_count;
    return m;
}

inline double predict_score(const TrainedModel& m, std::span<const double> z) {
    if ((!m.support_pos.empty() && z.size() != m.support_pos.cols()) ||
        (!m.support_neg.empty() && z.size() != m.support_neg.cols()))
        throw dimension_mismatch("sample dimension does not match the model");
    double acc = 0.0;
    for (std::size_t i = 0; i < m.alpha.size(); ++i)
        acc += m.alpha[i] * kernel_eval(m.kernel, z, m.support_pos.row(i));
    for (std::size_t j = 0; j < m.beta.size(); ++j)
        acc -= m.beta[j] * kernel_eval(m.kernel, z, m.support_neg.row(j));
    return acc;
}

inline bool classify(const TrainedModel& m, std::span<const double> z) {
    return predict_score(m, z) >= m.threshold;
}

inline std::vector<double> predict_scores(const TrainedModel& m, const FeatureMatrix& X) {
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_score(m, X.row(i));
    return out;
}

namespace detail {

inline json features_to_json(const FeatureMatrix& X) {
    json rows = json::array();
    for (std::size_t i = 0; i < X.rows(); ++i) {
        json row = json::array();
        for (double v : X.row(i)) row.push_back(v);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline FeatureMatrix features_from_json(const json& j, std::size_t dim_hint) {
    if (j.empty()) return FeatureMatrix(0, dim_hint);
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().size();
    FeatureMatrix X(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& row = j.at(i);
        if (row.size() != cols) throw format_error("ragged support-vector block in model file");
        for (std::size_t c = 0; c < cols; ++c) X.at(i, c) = row.at(c).get<double>();
    }
    return X;
}

}  // namespace detail

inline json to_json(const TrainedModel& m) {
    json j;
    j["schema_version"] = kModelSchemaVersion;
    j["kernel"] = to_json(m.kernel);
    j["problem"] = to_json(m.problem);
    j["threshold"] = m.threshold;
    j["alpha"] = m.alpha;
    j["beta"] = m.beta;
    j["support_pos"] = detail::features_to_json(m.support_pos);
    j["support_neg"] = detail::features_to_json(m.support_neg);
    j["support_pos_index"] = m.support_pos_index;
    j["support_neg_index"] = m.support_neg_index;
    j["metadata"] = {{"seed", m.metadata.seed},
                     {"loop_count", m.metadata.loop_count},
                     {"final_dual_objective", m.metadata.final_dual_objective}};
    return j;
}

inline TrainedModel model_from_json(const json& j) {
    if (!j.contains("schema_version") || !j.at("schema_version").is_number_unsigned())
        throw format_error("model file has no schema version");
    if (j.at("schema_version").get<std::uint32_t>() != kModelSchemaVersion)
        throw schema_version_error("unsupported model schema version " +
                                   j.at("schema_version").dump());
    TrainedModel m;
    m.kernel = kernel_from_json(j.at("kernel"));
    m.problem = problem_from_json(j.at("problem"));
    m.threshold = j.at("threshold").get<double>();
    m.alpha = j.at("alpha").get<std::vector<double>>();
    m.beta = j.at("beta").get<std::vector<double>>();
    m.support_pos = detail::features_from_json(j.at("support_pos"), 0);
    m.support_neg = detail::features_from_json(j.at("support_neg"), m.support_pos.cols());
    m.support_pos_index = j.value("support_pos_index", std::vector<std::size_t>{});
    m.support_neg_index = j.value("support_neg_index", std::vector<std::size_t>{});
    if (m.alpha.size() != m.support_pos.rows() || m.beta.size() != m.support_neg.rows())
        throw format_error("model coefficient/support-vector counts disagree");
    const auto& meta = j.at("metadata");
    m.metadata.seed = meta.value("seed", std::uint64_t{0});
    m.metadata.loop_count = meta.value("loop_count", std::uint64_t{0});
    m.metadata.final_dual_objective = meta.value("final_dual_objective", 0.0);
    return m;
}

inline void save(const TrainedModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open model file for writing: " + path);
    out << to_json(m).dump(2) << '\n';
    out.close();
    if (!out) throw io_error("failed to write model file: " + path);
}

inline TrainedModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw format_error("malformed model file " + path + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace toprank
