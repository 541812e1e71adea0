#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <vector>

#include "toprank/errors.hpp"

namespace toprank {

struct ScoredLabels {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;  // 1 positive, 0 negative

    void check() const {
        if (scores.size() != labels.size())
            throw dimension_mismatch("scores and labels differ in length");
    }
    std::size_t n_pos() const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    }
};

struct PrecisionRecall {
    std::optional<double> precision;  // nullopt when nothing is predicted positive
    double recall = 0.0;
};

// Counts use the >= t convention, matching the classifier decision rule.
inline PrecisionRecall precision_recall_at(const ScoredLabels& sl, double t) {
    sl.check();
    std::size_t tp = 0, predicted = 0, pos = 0;
    for (std::size_t i = 0; i < sl.scores.size(); ++i) {
        const bool hit = sl.scores[i] >= t;
        if (sl.labels[i]) {
            ++pos;
            if (hit) ++tp;
        }
        if (hit) ++predicted;
    }
    PrecisionRecall pr;
    pr.recall = pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pos);
    if (predicted > 0) pr.precision = static_cast<double>(tp) / static_cast<double>(predicted);
    return pr;
}

struct PrCurvePoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

// Thresholds sweep the distinct score values from high to low, so points are
// ordered by non-decreasing recall; tied scores flip together. Points with
// undefined precision (the +inf sentinel) are excluded.
inline std::vector<PrCurvePoint> pr_curve(const ScoredLabels& sl) {
    sl.check();
    const std::size_t n = sl.scores.size();
    const std::size_t pos = sl.n_pos();
    if (pos == 0 || pos == n)
        throw data_error("PR curve needs at least one positive and one negative");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sl.scores[a] > sl.scores[b]; });

    std::vector<PrCurvePoint> curve;
    curve.reserve(n);
    std::size_t tp = 0, predicted = 0;
    std::size_t i = 0;
    while (i < n) {
        const double s = sl.scores[order[i]];
        while (i < n && sl.scores[order[i]] == s) {
            if (sl.labels[order[i]]) ++tp;
            ++predicted;
            ++i;
        }
        curve.push_back({s, static_cast<double>(tp) / static_cast<double>(pos),
                         static_cast<double>(tp) / static_cast<double>(predicted)});
    }
    return curve;
}

// Precision of the highest-cutoff curve point reaching the recall target
// (no interpolation).
inline double precision_at_recall(const ScoredLabels& sl, double target_recall) {
    if (!(target_recall > 0.0 && target_recall <= 1.0))
        throw invalid_spec("target recall must be in (0, 1]");
    if (sl.n_pos() == 0) throw data_error("precision_at_recall needs a positive sample");
    for (const auto& p : pr_curve(sl))
        if (p.recall >= target_recall) return p.precision;
    // unreachable: recall 1 is always attained at the lowest threshold
    throw numeric_error("recall target unreachable");
}

// Running max from the right: the envelope on which precision-at-recall is
// non-increasing in the target.
inline std::vector<PrCurvePoint> monotonized_envelope(std::vector<PrCurvePoint> curve) {
    double best = 0.0;
    for (auto it = curve.rbegin(); it != curve.rend(); ++it) {
        best = std::max(best, it->precision);
        it->precision = best;
    }
    return curve;
}

struct ScoreHistogramBin {
    double lower = 0.0;
    std::size_t count_pos = 0;
    std::size_t count_neg = 0;
};

// Fixed-width score histogram per class; plot-ready density data.
inline std::vector<ScoreHistogramBin> score_histogram(const ScoredLabels& sl, std::size_t bins) {
    sl.check();
    if (bins == 0) throw invalid_spec("histogram needs at least one bin");
    if (sl.scores.empty()) return {};
    const auto [mn, mx] = std::minmax_element(sl.scores.begin(), sl.scores.end());
    const double lo = *mn;
    const double width = (*mx - lo) > 0 ? (*mx - lo) / static_cast<double>(bins) : 1.0;
    std::vector<ScoreHistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) out[b].lower = lo + width * static_cast<double>(b);
    for (std::size_t i = 0; i < sl.scores.size(); ++i) {
        auto b = static_cast<std::size_t>((sl.scores[i] - lo) / width);
        if (b >= bins) b = bins - 1;
        if (sl.labels[i]) ++out[b].count_pos;
        else ++out[b].count_neg;
    }
    return out;
}

inline void write_pr_curve_csv(std::ostream& out, const std::vector<PrCurvePoint>& curve) {
    out << "recall,precision\n";
    char buf[128];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.recall, p.precision);
        out << buf;
    }
}

inline void write_histogram_csv(std::ostream& out, const std::vector<ScoreHistogramBin>& hist) {
    out << "score,count_pos,count_neg\n";
    char buf[128];
    for (const auto& b : hist) {
        std::snprintf(buf, sizeof buf, "%.17g,%zu,%zu\n", b.lower, b.count_pos, b.count_neg);
        out << buf;
    }
}

}  // namespace toprank
