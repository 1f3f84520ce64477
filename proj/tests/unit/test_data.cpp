#include "foma/augment.hpp"
#include "foma/data.hpp"
#include "foma/dimension.hpp"
#include "foma/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

using namespace foma;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

void expect_disjoint_cover(const SplitIndices& s, Index n, SplitSizes sizes) {
    EXPECT_EQ(static_cast<Index>(s.train.size()), sizes.train);
    EXPECT_EQ(static_cast<Index>(s.val.size()), sizes.val);
    EXPECT_EQ(static_cast<Index>(s.test.size()), sizes.test);
    std::set<Index> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
        for (Index i : *part) {
            EXPECT_GE(i, 0);
            EXPECT_LT(i, n);
            EXPECT_TRUE(all.insert(i).second) << "index " << i << " repeated";
        }
    }
}

} // namespace

TEST(LoadCsv, TwoRows) {
    const auto path = write_temp("foma_csv_two.csv", "1,2\n3,4\n");
    const RawTable t = load_csv(path, 1, 1, false);
    EXPECT_EQ(t.x, (Matrix(2, 1) << 1.0, 3.0).finished());
    EXPECT_EQ(t.y, (Matrix(2, 1) << 2.0, 4.0).finished());
}

TEST(LoadCsv, HeaderSkippedAndWhitespaceTolerated) {
    const auto path = write_temp("foma_csv_header.csv", "a,b,c\r\n 1.5, -2e-3 ,7\r\n\n4,5,6\n");
    const RawTable t = load_csv(path, 2, 1, true);
    ASSERT_EQ(t.x.rows(), 2);
    EXPECT_DOUBLE_EQ(t.x(0, 1), -2e-3);
    EXPECT_DOUBLE_EQ(t.y(1, 0), 6.0);
}

TEST(LoadCsv, ReportsMalformedRowNumbers) {
    const auto path = write_temp("foma_csv_bad.csv", "1,2\n3,x\n5,6,7\n8,9\n");
    try {
        load_csv(path, 1, 1, false);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line(s) 2 3"), std::string::npos) << msg;
    }
}

TEST(LoadCsv, MissingFileAndHeaderOnly) {
    EXPECT_THROW(load_csv("/nonexistent/foma.csv", 1, 1, false), IoError);
    const auto path = write_temp("foma_csv_empty.csv", "a,b\n");
    EXPECT_THROW(load_csv(path, 1, 1, true), IoError);
    EXPECT_THROW(load_csv(path, 0, 1, true), ConfigError);
}

TEST(LoadNumericCsv, InfersWidth) {
    const auto path = write_temp("foma_csv_numeric.csv", "1,2,3\n4,5,6\n");
    const Matrix m = load_numeric_csv(path, false);
    EXPECT_EQ(m.rows(), 2);
    EXPECT_EQ(m.cols(), 3);
}

TEST(MakeSplits, DisjointReproducibleCover) {
    const SplitIndices a = make_splits(5, {3, 1, 1}, 9);
    expect_disjoint_cover(a, 5, {3, 1, 1});
    const SplitIndices b = make_splits(5, {3, 1, 1}, 9);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    EXPECT_EQ(a.test, b.test);
}

TEST(MakeSplits, DatasetSizesAccepted) {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        expect_disjoint_cover(make_splits(1503, {1003, 300, 200}, seed), 1503, {1003, 300, 200});
        expect_disjoint_cover(make_splits(500, {200, 200, 100}, seed), 500, {200, 200, 100});
    }
    EXPECT_NE(make_splits(500, {200, 200, 100}, 0).train, make_splits(500, {200, 200, 100}, 1).train);
}

TEST(MakeSplits, RejectsOversizedSplits) {
    EXPECT_THROW(make_splits(5, {3, 2, 1}, 0), ConfigError);
    EXPECT_THROW(make_splits(5, {-1, 2, 1}, 0), ConfigError);
}

TEST(LoadSplitFile, ValidatesIndices) {
    const auto ok = write_temp("foma_split_ok.json", R"({"train":[0,2],"val":[1],"test":[3]})");
    const SplitIndices s = load_split_file(ok, 4);
    EXPECT_EQ(s.train, (std::vector<Index>{0, 2}));
    const auto overlap = write_temp("foma_split_overlap.json", R"({"train":[0,1],"val":[1],"test":[]})");
    EXPECT_THROW(load_split_file(overlap, 4), IoError);
    const auto range = write_temp("foma_split_range.json", R"({"train":[0,9],"val":[],"test":[]})");
    EXPECT_THROW(load_split_file(range, 4), IoError);
    const auto missing = write_temp("foma_split_missing.json", R"({"train":[0]})");
    EXPECT_THROW(load_split_file(missing, 4), IoError);
}

TEST(NormalizeMinmax, TrainStatisticsWithoutClamping) {
    Dataset d;
    d.x = (Matrix(4, 2) << 0.0, 3.0, 10.0, 3.0, 5.0, 3.0, 12.0, 4.0).finished();
    d.y = (Matrix(4, 1) << 100.0, 200.0, 300.0, 400.0).finished();
    d.splits.train = {0, 1};
    d.splits.val = {2};
    d.splits.test = {3};
    const Dataset n = normalize_minmax(d);
    EXPECT_DOUBLE_EQ(n.x(2, 0), 0.5);
    EXPECT_DOUBLE_EQ(n.x(3, 0), 1.2);
    EXPECT_EQ(n.x.col(1), Vector::Zero(4));
    ASSERT_TRUE(n.normalization.has_value());
    EXPECT_EQ(n.normalization->constant_features, (std::vector<Index>{1}));
    EXPECT_EQ(n.y, d.y);
}

TEST(NormalizeMinmax, IdempotentWithOwnStatistics) {
    Dataset d;
    d.x = (Matrix(3, 1) << 2.0, 6.0, 4.0).finished();
    d.y = Matrix::Zero(3, 1);
    d.splits.train = {0, 1, 2};
    const Dataset once = normalize_minmax(d);
    const Dataset twice = normalize_minmax(once);
    EXPECT_EQ(twice.x, once.x);
    EXPECT_EQ(twice.normalization->apply(once.x), once.x);
}

TEST(NormalizeMinmax, EmptyTrainSplit) {
    Dataset d;
    d.x = Matrix::Zero(2, 1);
    d.y = Matrix::Zero(2, 1);
    EXPECT_THROW(normalize_minmax(d), InputError);
}

TEST(Materialize, SelectsRowsPerSplit) {
    Dataset d;
    d.x = (Matrix(3, 1) << 1.0, 2.0, 3.0).finished();
    d.y = (Matrix(3, 1) << 10.0, 20.0, 30.0).finished();
    d.splits.train = {2, 0};
    d.splits.test = {1};
    const DatasetSplits s = materialize(d);
    EXPECT_EQ(s.x_train, (Matrix(2, 1) << 3.0, 1.0).finished());
    EXPECT_EQ(s.y_test, (Matrix(1, 1) << 20.0).finished());
    EXPECT_EQ(s.x_val.rows(), 0);
}

TEST(SyntheticArc, NoiselessPointsLieOnCurve) {
    const Dataset d = synthetic_arc_2d(200, 0.0, 3);
    for (Index i = 0; i < d.x.rows(); ++i) {
        EXPECT_NEAR(d.x(i, 0) * d.x(i, 0) + d.y(i, 0) * d.y(i, 0), 1.0, 1e-14);
    }
    EXPECT_THROW(synthetic_arc_2d(1, 0.0, 0), ConfigError);
}

TEST(SyntheticArc, IntrinsicDimensionNearOne) {
    const Dataset d = synthetic_arc_2d(2000, 1e-6, 5);
    const IdEstimate est = twonn_id(concat_columns(d.x, d.y));
    EXPECT_GE(est.d_hat, 0.7);
    EXPECT_LE(est.d_hat, 1.5);
}

TEST(SyntheticArc, FomaKeepsPrincipalAxisAndShrinksTail) {
    const Dataset d = synthetic_arc_2d(256, 0.01, 8);
    Matrix a = concat_columns(d.x, d.y);
    const SvdFactors f = thin_svd(a);
    const Batch out = foma_transform(Batch{d.x, d.y}, 0.5, 1, SvMode::small);
    const Matrix ap = concat_columns(out.x, out.y);
    const Vector v1 = f.v.col(0);
    const Vector v2 = f.v.col(1);
    const double head_before = (a * v1).squaredNorm();
    const double head_after = (ap * v1).squaredNorm();
    const double tail_before = (a * v2).squaredNorm();
    const double tail_after = (ap * v2).squaredNorm();
    EXPECT_NEAR(head_after / head_before, 1.0, 0.01);
    EXPECT_NEAR(tail_after / tail_before, 0.25, 1e-9);
}

TEST(SyntheticManifold, DimensionsAndDeterminism) {
    const Matrix a = synthetic_manifold(2, 10, 2000, 1);
    EXPECT_EQ(a.rows(), 2000);
    EXPECT_EQ(a.cols(), 10);
    EXPECT_EQ(a, synthetic_manifold(2, 10, 2000, 1));
    const IdEstimate two = twonn_id(a);
    EXPECT_GE(two.d_hat, 1.5);
    EXPECT_LE(two.d_hat, 2.5);
    const IdEstimate one = twonn_id(synthetic_manifold(1, 5, 2000, 2));
    EXPECT_GE(one.d_hat, 0.7);
    EXPECT_LE(one.d_hat, 1.3);
    const Matrix full = synthetic_manifold(4, 4, 300, 3);
    EXPECT_EQ(numerical_rank(thin_svd(full).s), 4);
    EXPECT_THROW(synthetic_manifold(3, 2, 10, 0), ConfigError);
}

TEST(Checksum, KnownDigestAndManifest) {
    const auto path = write_temp("foma_sha_abc.txt", "abc");
    EXPECT_EQ(sha256_file(path), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto dir = std::filesystem::temp_directory_path().string();
    const auto manifest = write_temp("foma_sha_manifest.txt",
                                     "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  "
                                     "foma_sha_abc.txt\n0000  foma_sha_missing.txt\n");
    const auto results = verify_manifest(manifest, dir);
    ASSERT_EQ(results.size(), 2u);
    EXPECT_TRUE(results[0].ok);
    EXPECT_FALSE(results[1].ok);
    EXPECT_TRUE(results[1].actual.empty());
    EXPECT_THROW(sha256_file("/nonexistent/foma"), IoError);
}

TEST(Presets, KnownLayouts) {
    const DatasetPreset* airfoil = find_preset("airfoil");
    ASSERT_NE(airfoil, nullptr);
    EXPECT_EQ(airfoil->n_features, 5);
    EXPECT_EQ(airfoil->sizes.train + airfoil->sizes.val + airfoil->sizes.test, 1503);
    const DatasetPreset* no2 = find_preset("no2");
    ASSERT_NE(no2, nullptr);
    EXPECT_EQ(no2->n_features, 7);
    EXPECT_EQ(no2->sizes.train + no2->sizes.val + no2->sizes.test, 500);
    EXPECT_EQ(find_preset("mnist"), nullptr);
}
