#pragma once

#include "foma/linalg.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace foma {

struct RawTable {
    Matrix x;
    Matrix y;
};

/// Comma-separated numeric table: the first n_features columns are features,
/// the next n_labels columns labels. Blank lines are ignored. Throws IoError
/// for a missing file and for malformed rows (wrong column count or
/// non-numeric cells); the message lists the offending line numbers.
RawTable load_csv(const std::string& path, int n_features, int n_labels, bool header);

/// All columns of a numeric CSV; the column count is taken from the first
/// data row.
Matrix load_numeric_csv(const std::string& path, bool header);

struct SplitSizes {
    Index train = 0;
    Index val = 0;
    Index test = 0;
};

struct SplitIndices {
    std::vector<Index> train;
    std::vector<Index> val;
    std::vector<Index> test;
};

/// Seeded shuffle of [0, n) partitioned into consecutive train/val/test
/// blocks. Throws ConfigError if the sizes exceed n.
SplitIndices make_splits(Index n, SplitSizes sizes, std::uint64_t seed);

/// Reads {"train": [...], "val": [...], "test": [...]} and checks that the
/// indices are valid for n rows and pairwise disjoint.
SplitIndices load_split_file(const std::string& path, Index n);

/// Per-feature min-max statistics fitted on the training rows.
struct NormalizationRecord {
    Vector min;
    Vector max;
    /// Features with max == min on the training rows; mapped to 0.
    std::vector<Index> constant_features;

    Matrix apply(const Matrix& x) const;
};

struct Dataset {
    Matrix x;
    Matrix y;
    SplitIndices splits;
    std::optional<NormalizationRecord> normalization;
};

/// Fits min-max statistics on the training split and rescales the features
/// of every row with them (no clamping). Labels are left untouched.
Dataset normalize_minmax(const Dataset& dataset);

struct DatasetSplits {
    Matrix x_train;
    Matrix y_train;
    Matrix x_val;
    Matrix y_val;
    Matrix x_test;
    Matrix y_test;
};

DatasetSplits materialize(const Dataset& dataset);

Matrix select_rows(const Matrix& m, const std::vector<Index>& rows);

/// Points on a circular arc (feature = first coordinate, label = second)
/// with isotropic Gaussian jitter. All rows are in the training split.
Dataset synthetic_arc_2d(Index n, double noise_sigma, std::uint64_t seed);

/// Uniform samples from [0, 1]^intrinsic_d mapped into ambient_d dimensions,
/// either by a random orthonormal embedding plus offset (rotate = true) or by
/// zero padding.
Matrix synthetic_manifold(int intrinsic_d, int ambient_d, Index n, std::uint64_t seed, bool rotate = true);

/// Layout of the two bundled tabular benchmarks (files supplied by the user).
struct DatasetPreset {
    std::string_view name;
    std::string_view file_name;
    int n_features;
    int n_labels;
    SplitSizes sizes;
};

const DatasetPreset* find_preset(std::string_view name);

/// Lowercase hex SHA-256 of a file. Throws IoError.
std::string sha256_file(const std::string& path);

struct ChecksumResult {
    std::string file_name;
    std::string expected;
    std::string actual;
    bool ok = false;
};

/// Verifies every "<sha256>  <file>" line of the manifest against files in
/// `directory`. Missing files are reported with an empty actual digest.
std::vector<ChecksumResult> verify_manifest(const std::string& manifest_path, const std::string& directory);

} // namespace foma
