#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "toprank/data.hpp"

using namespace toprank;

namespace {

std::filesystem::path write_file(const char* name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << content;
    return path;
}

RawTable label_grid() {
    // 100 rows, labels 0..9 ten times each, one informative feature
    RawTable t;
    t.features = FeatureMatrix(100, 2);
    t.labels.resize(100);
    for (std::size_t i = 0; i < 100; ++i) {
        t.labels[i] = static_cast<double>(i % 10);
        t.features.at(i, 0) = static_cast<double>(i);
        t.features.at(i, 1) = static_cast<double>(i % 10);
    }
    return t;
}

}  // namespace

TEST_CASE("sparse text format", "[data]") {
    const auto path = write_file("toprank_sparse.txt",
                                 "1 1:0.5 3:2.0\n"
                                 "0 2:1.5\n");
    const auto t = load(path.string(), DataFormat::SparseText);
    REQUIRE(t.features.rows() == 2);
    REQUIRE(t.features.cols() == 3);
    CHECK(t.labels[0] == 1.0);
    CHECK(t.features.at(0, 0) == 0.5);
    CHECK(t.features.at(0, 1) == 0.0);
    CHECK(t.features.at(0, 2) == 2.0);
    CHECK(t.features.at(1, 1) == 1.5);

    const auto bad = write_file("toprank_sparse_bad.txt", "1 1:0.5\n0 x7\n");
    CHECK_THROWS_MATCHES(load(bad.string(), DataFormat::SparseText), parse_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("line 2")));
    const auto zero = write_file("toprank_sparse_zero.txt", "1 0:0.5\n");
    CHECK_THROWS_AS(load(zero.string(), DataFormat::SparseText), parse_error);
    std::filesystem::remove(path);
    std::filesystem::remove(bad);
    std::filesystem::remove(zero);
}

TEST_CASE("delimited format", "[data]") {
    const auto path = write_file("toprank_delim.csv",
                                 "f1,f2,label\n"
                                 "0.5,1.5,1\n"
                                 "2.0,3.0,0\n");
    DelimitedFormat fmt;
    fmt.has_header = true;
    const auto t = load(path.string(), DataFormat::Delimited, fmt);
    REQUIRE(t.features.rows() == 2);
    REQUIRE(t.features.cols() == 2);
    CHECK(t.labels[0] == 1.0);
    CHECK(t.labels[1] == 0.0);
    CHECK(t.features.at(1, 1) == 3.0);

    SECTION("label column override") {
        DelimitedFormat first;
        first.has_header = true;
        first.label_column = 0;
        const auto t2 = load(path.string(), DataFormat::Delimited, first);
        CHECK(t2.labels[0] == 0.5);
        CHECK(t2.features.at(0, 0) == 1.5);
    }

    SECTION("field count mismatch against the header") {
        const auto bad = write_file("toprank_delim_bad.csv", "a,b,c\n1,2\n");
        CHECK_THROWS_MATCHES(load(bad.string(), DataFormat::Delimited, fmt), parse_error,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("line 2")));
        std::filesystem::remove(bad);
    }

    SECTION("empty files") {
        const auto empty = write_file("toprank_delim_empty.csv", "");
        CHECK_THROWS_AS(load(empty.string(), DataFormat::Delimited, DelimitedFormat{}), empty_file);
        const auto header_only = write_file("toprank_delim_header.csv", "a,b\n");
        CHECK_THROWS_AS(load(header_only.string(), DataFormat::Delimited, fmt), empty_file);
        std::filesystem::remove(empty);
        std::filesystem::remove(header_only);
    }

    SECTION("whitespace delimiter") {
        const auto ws = write_file("toprank_delim_ws.txt", "0.5 1.5 1\n2.0 3.0 0\n");
        DelimitedFormat sp;
        sp.delimiter = ' ';
        const auto t3 = load(ws.string(), DataFormat::Delimited, sp);
        CHECK(t3.features.rows() == 2);
        std::filesystem::remove(ws);
    }

    std::filesystem::remove(path);
}

TEST_CASE("binarization", "[data]") {
    const auto t = label_grid();

    const auto ds = binarize(t, {0.0});
    CHECK(ds.n_pos() == 10);
    CHECK(ds.size() == 100);
    CHECK(static_cast<double>(ds.n_pos()) / ds.size() == Catch::Approx(0.10));

    const auto multi = binarize(t, {7.0, 8.0, 9.0});
    CHECK(multi.n_pos() == 30);

    CHECK_THROWS_AS(binarize(t, {}), invalid_spec);
    CHECK_THROWS_AS(binarize(t, {0., 1., 2., 3., 4., 5., 6., 7., 8., 9.}), degenerate_class);
    CHECK_THROWS_AS(binarize(t, {42.0}), degenerate_class);
}

TEST_CASE("split protocol", "[data]") {
    const auto ds = binarize(label_grid(), {0.0, 1.0, 2.0});

    const auto s = split(ds, SplitScheme::TrainValidTest, 7);
    CHECK(s.train.size() == 50);
    CHECK(s.valid.size() == 25);
    CHECK(s.test.size() == 25);

    // identical seeds give identical partitions, different seeds differ
    const auto s2 = split(ds, SplitScheme::TrainValidTest, 7);
    CHECK(s.train_index == s2.train_index);
    CHECK(s.test_index == s2.test_index);
    const auto s3 = split(ds, SplitScheme::TrainValidTest, 8);
    CHECK(s.train_index != s3.train_index);

    // partitions are disjoint and cover everything
    std::set<std::size_t> seen;
    for (const auto* part : {&s.train_index, &s.valid_index, &s.test_index})
        for (auto i : *part) CHECK(seen.insert(i).second);
    CHECK(seen.size() == 100);

    // remainders go to train
    RawTable four;
    four.features = FeatureMatrix(4, 1);
    four.labels = {0.0, 1.0, 0.0, 1.0};
    for (std::size_t i = 0; i < 4; ++i) four.features.at(i, 0) = static_cast<double>(i);
    const auto tiny = split(binarize(four, {1.0}), SplitScheme::TrainValidTest, 1);
    CHECK(tiny.train.size() == 2);
    CHECK(tiny.valid.size() == 1);
    CHECK(tiny.test.size() == 1);

    RawTable three;
    three.features = FeatureMatrix(3, 1);
    three.labels = {0.0, 1.0, 0.0};
    CHECK_THROWS_AS(split(binarize(three, {1.0}), SplitScheme::TrainValidTest, 1),
                    too_few_samples);

    // fixed external test set: validation sized like the test block
    const auto fixed = split(ds, SplitScheme::FixedTest, 3, false, 20);
    CHECK(fixed.test.size() == 20);
    CHECK(fixed.valid.size() == 20);
    CHECK(fixed.train.size() == 60);
    for (std::size_t i = 0; i < 20; ++i) CHECK(fixed.test_index[i] == 80 + i);

    // stratified option keeps class balance in every part
    const auto strat = split(ds, SplitScheme::TrainValidTest, 5, true);
    CHECK(strat.train.n_pos() == 15);
    CHECK(strat.valid.n_pos() >= 7);
    CHECK(strat.test.n_pos() >= 7);
}

TEST_CASE("standardization is fit on train only", "[data]") {
    auto ds = binarize(label_grid(), {0.0});
    auto s = split(ds, SplitScheme::TrainValidTest, 3);
    const auto std1 = Standardizer::fit(s.train.features);
    std1.apply(s.train.features);
    std1.apply(s.test.features);
    for (std::size_t c = 0; c < s.train.features.cols(); ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < s.train.features.rows(); ++i)
            mean += s.train.features.at(i, c);
        mean /= static_cast<double>(s.train.features.rows());
        for (std::size_t i = 0; i < s.train.features.rows(); ++i) {
            const double d = s.train.features.at(i, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(s.train.features.rows());
        CHECK(mean == Catch::Approx(0.0).margin(1e-10));
        CHECK(var == Catch::Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("class blocks preserve positives-first order", "[data]") {
    const auto ds = binarize(label_grid(), {0.0});
    const auto [pos, neg] = ds.class_blocks();
    CHECK(pos.rows() == 10);
    CHECK(neg.rows() == 90);
    // every positive row keeps its feature payload
    for (std::size_t i = 0; i < pos.rows(); ++i) CHECK(pos.at(i, 1) == 0.0);
}
