#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "toprank/dense.hpp"
#include "toprank/errors.hpp"

namespace toprank {

// Raw parsed table before binarization.
struct RawTable {
    FeatureMatrix features;
    std::vector<double> labels;
};

struct DelimitedFormat {
    char delimiter = ',';
    bool has_header = false;
    // Label column; negative values count from the end (-1 = last column).
    int label_column = -1;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    if (delim == ' ') {
        while (ss >> field) out.push_back(field);
    } else {
        while (std::getline(ss, field, delim)) out.push_back(field);
    }
    return out;
}

inline double parse_number(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw parse_error("trailing characters in number '" + s + "'", line_no);
        if (!std::isfinite(v)) throw parse_error("non-finite value '" + s + "'", line_no);
        return v;
    } catch (const std::invalid_argument&) {
        throw parse_error("cannot parse number '" + s + "'", line_no);
    } catch (const std::out_of_range&) {
        throw parse_error("number out of range '" + s + "'", line_no);
    }
}

}  // namespace detail

// Delimited numeric file with one sample per row and the label in a
// configurable column.
inline RawTable load_delimited(const std::string& path, const DelimitedFormat& fmt = {}) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open data file: " + path);
    std::string line;
    std::size_t line_no = 0;
    std::size_t expected_fields = 0;
    if (fmt.has_header) {
        if (!std::getline(in, line)) throw empty_file("no rows in " + path);
        ++line_no;
        expected_fields = detail::split_fields(line, fmt.delimiter).size();
    }
    std::vector<double> flat;
    std::vector<double> labels;
    std::size_t cols = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line, fmt.delimiter);
        if (fields.empty()) continue;
        if (expected_fields == 0) expected_fields = fields.size();
        if (fields.size() != expected_fields)
            throw parse_error("row has " + std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(expected_fields),
                              line_no);
        const std::size_t nf = fields.size();
        if (nf < 2) throw parse_error("row needs a label and at least one feature", line_no);
        std::size_t label_idx =
            fmt.label_column >= 0
                ? static_cast<std::size_t>(fmt.label_column)
                : nf - static_cast<std::size_t>(-fmt.label_column);
        if (label_idx >= nf) throw parse_error("label column out of range", line_no);
        labels.push_back(detail::parse_number(fields[label_idx], line_no));
        std::size_t row_cols = 0;
        for (std::size_t f = 0; f < nf; ++f) {
            if (f == label_idx) continue;
            flat.push_back(detail::parse_number(fields[f], line_no));
            ++row_cols;
        }
        cols = row_cols;
    }
    if (labels.empty()) throw empty_file("no data rows in " + path);
    RawTable t;
    t.features = FeatureMatrix(labels.size(), cols, std::move(flat));
    t.labels = std::move(labels);
    return t;
}

// Sparse "label idx:val" text rows with 1-based feature indices; the
// dimension is the largest index seen.
inline RawTable load_sparse_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open data file: " + path);
    struct Entry {
        std::size_t index;
        double value;
    };
    std::vector<std::vector<Entry>> rows;
    std::vector<double> labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string tok;
        if (!(ss >> tok)) continue;
        labels.push_back(detail::parse_number(tok, line_no));
        std::vector<Entry> row;
        while (ss >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                throw parse_error("malformed sparse entry '" + tok + "'", line_no);
            const double raw_idx = detail::parse_number(tok.substr(0, colon), line_no);
            if (raw_idx < 1.0 || raw_idx != std::floor(raw_idx))
                throw parse_error("sparse index must be a positive integer in '" + tok + "'",
                                  line_no);
            const auto idx = static_cast<std::size_t>(raw_idx);
            row.push_back({idx, detail::parse_number(tok.substr(colon + 1), line_no)});
            dim = std::max(dim, idx);
        }
        rows.push_back(std::move(row));
    }
    if (labels.empty()) throw empty_file("no data rows in " + path);
    RawTable t;
    t.features = FeatureMatrix(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (const auto& e : rows[i]) t.features.at(i, e.index - 1) = e.value;
    t.labels = std::move(labels);
    return t;
}

enum class DataFormat { Delimited, SparseText };

inline RawTable load(const std::string& path, DataFormat format,
                     const DelimitedFormat& fmt = {}) {
    return format == DataFormat::Delimited ? load_delimited(path, fmt) : load_sparse_text(path);
}

// Binary dataset with provenance of its construction.
struct Dataset {
    FeatureMatrix features;
    std::vector<std::uint8_t> labels;  // 1 positive, 0 negative
    std::set<double> pos_label_set;
    std::string source_path;
    std::string source_format;
    std::uint64_t split_seed = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t n_pos() const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    }
    std::size_t n_neg() const { return size() - n_pos(); }

    Dataset take(const std::vector<std::size_t>& idx) const {
        Dataset out = *this;
        out.features = features.take(idx);
        out.labels.clear();
        out.labels.reserve(idx.size());
        for (auto i : idx) out.labels.push_back(labels[i]);
        return out;
    }

    // Positive rows first, then negatives; used to build the kernel blocks.
    std::pair<FeatureMatrix, FeatureMatrix> class_blocks() const {
        std::vector<std::size_t> pos, neg;
        for (std::size_t i = 0; i < labels.size(); ++i)
            (labels[i] ? pos : neg).push_back(i);
        return {features.take(pos), features.take(neg)};
    }
};

inline Dataset binarize(const RawTable& raw, const std::set<double>& pos_label_set) {
    if (pos_label_set.empty()) throw invalid_spec("positive label set is empty");
    Dataset ds;
    ds.features = raw.features;
    ds.pos_label_set = pos_label_set;
    ds.labels.reserve(raw.labels.size());
    for (double y : raw.labels)
        ds.labels.push_back(pos_label_set.count(y) ? 1 : 0);
    for (std::size_t i = 0; i < ds.features.rows(); ++i)
        for (double v : ds.features.row(i))
            if (!std::isfinite(v)) throw data_error("non-finite feature value");
    const std::size_t np = ds.n_pos();
    if (np == 0) throw degenerate_class("no sample matches the positive label set");
    if (np == ds.size()) throw degenerate_class("every sample matches the positive label set");
    return ds;
}

enum class SplitScheme {
    TrainValidTest,  // 50 / 25 / 25 with remainders assigned to train
    FixedTest,       // external test set; validation sized like the test set
};

struct Split {
    Dataset train;
    Dataset valid;
    Dataset test;
    std::vector<std::size_t> train_index;
    std::vector<std::size_t> valid_index;
    std::vector<std::size_t> test_index;
};

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed,
                                                 bool stratify,
                                                 const std::vector<std::uint8_t>& labels) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    if (!stratify) {
        std::shuffle(idx.begin(), idx.end(), rng);
        return idx;
    }
    // Interleave shuffled per-class lists so every prefix is balanced.
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (labels[i] ? pos : neg).push_back(i);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<std::size_t> out;
    out.reserve(n);
    std::size_t pi = 0, ni = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double want_pos =
            static_cast<double>(pos.size()) * static_cast<double>(i + 1) / static_cast<double>(n);
        if (pi < pos.size() && (static_cast<double>(pi) < want_pos || ni == neg.size()))
            out.push_back(pos[pi++]);
        else
            out.push_back(neg[ni++]);
    }
    return out;
}

}  // namespace detail

// Seeded shuffle then partition. Default scheme: floor(n/4) validation,
// floor(n/4) test, remainder to train (50/25/25 when divisible).
inline Split split(const Dataset& ds, SplitScheme scheme, std::uint64_t seed,
                   bool stratify = false, std::size_t external_test_size = 0) {
    const std::size_t n = ds.size();
    if (n < 4) throw too_few_samples("need at least 4 samples to split");
    Split out;
    if (scheme == SplitScheme::TrainValidTest) {
        auto idx = detail::shuffled_indices(n, seed, stratify, ds.labels);
        const std::size_t n_valid = n / 4;
        const std::size_t n_test = n / 4;
        const std::size_t n_train = n - n_valid - n_test;
        out.train_index.assign(idx.begin(), idx.begin() + n_train);
        out.valid_index.assign(idx.begin() + n_train, idx.begin() + n_train + n_valid);
        out.test_index.assign(idx.begin() + n_train + n_valid, idx.end());
    } else {
        // The last external_test_size samples are the fixed test set; the
        // remaining pool is split so the validation set matches its size.
        if (external_test_size == 0 || external_test_size >= n)
            throw too_few_samples("fixed-test split needs 0 < test size < n");
        const std::size_t pool = n - external_test_size;
        if (external_test_size > pool)
            throw too_few_samples("fixed-test split: pool smaller than test set");
        std::vector<std::size_t> pool_idx(pool);
        std::iota(pool_idx.begin(), pool_idx.end(), 0);
        std::mt19937_64 rng(seed);
        std::shuffle(pool_idx.begin(), pool_idx.end(), rng);
        out.valid_index.assign(pool_idx.begin(), pool_idx.begin() + external_test_size);
        out.train_index.assign(pool_idx.begin() + external_test_size, pool_idx.end());
        out.test_index.resize(external_test_size);
        std::iota(out.test_index.begin(), out.test_index.end(), pool);
    }
    out.train = ds.take(out.train_index);
    out.valid = ds.take(out.valid_index);
    out.test = ds.take(out.test_index);
    out.train.split_seed = out.valid.split_seed = out.test.split_seed = seed;
    return out;
}

// Per-feature affine standardization fitted on the training split only.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> inv_std;

    static Standardizer fit(const FeatureMatrix& X) {
        Standardizer s;
        const std::size_t d = X.cols();
        s.mean.assign(d, 0.0);
        s.inv_std.assign(d, 1.0);
        if (X.rows() == 0) return s;
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t c = 0; c < d; ++c) s.mean[c] += X.at(i, c);
        for (auto& m : s.mean) m /= static_cast<double>(X.rows());
        std::vector<double> var(d, 0.0);
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t c = 0; c < d; ++c) {
                const double dlt = X.at(i, c) - s.mean[c];
                var[c] += dlt * dlt;
            }
        for (std::size_t c = 0; c < d; ++c) {
            const double sd = std::sqrt(var[c] / static_cast<double>(X.rows()));
            s.inv_std[c] = sd > 0.0 ? 1.0 / sd : 1.0;
        }
        return s;
    }

    void apply(FeatureMatrix& X) const {
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t c = 0; c < X.cols(); ++c)
                X.at(i, c) = (X.at(i, c) - mean[c]) * inv_std[c];
    }
};

}  // namespace toprank
