#include "foma/data.hpp"

#include "foma/errors.hpp"
#include "foma/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace foma {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view cell, double& out) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') {
        cell.remove_prefix(1);
    }
    if (cell.empty()) {
        return false;
    }
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc{} && ptr == cell.data() + cell.size() && std::isfinite(out);
}

} // namespace

namespace {

std::size_t count_columns(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open data file " + path);
    }
    std::string line;
    bool skipped_header = !header;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    }
    throw IoError(path + ": no data rows");
}

Matrix read_table(const std::string& path, std::size_t width, bool header) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open data file " + path);
    }
    std::vector<double> values;
    std::vector<std::size_t> bad_lines;
    std::string line;
    std::size_t line_no = 0;
    bool skipped_header = !header;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        std::vector<double> row;
        row.reserve(width);
        bool ok = true;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            double v = 0.0;
            if (!parse_double(rest.substr(0, comma), v)) {
                ok = false;
                break;
            }
            row.push_back(v);
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (!ok || row.size() != width) {
            bad_lines.push_back(line_no);
            continue;
        }
        values.insert(values.end(), row.begin(), row.end());
    }
    if (!bad_lines.empty()) {
        std::ostringstream msg;
        msg << path << ": " << bad_lines.size() << " malformed row(s) (expected " << width
            << " numeric columns) at line(s)";
        for (std::size_t i = 0; i < std::min<std::size_t>(bad_lines.size(), 10); ++i) {
            msg << ' ' << bad_lines[i];
        }
        if (bad_lines.size() > 10) {
            msg << " ...";
        }
        throw IoError(msg.str());
    }
    const auto rows = static_cast<Index>(values.size() / width);
    if (rows == 0) {
        throw IoError(path + ": no data rows");
    }
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), rows, static_cast<Index>(width));
}

} // namespace

RawTable load_csv(const std::string& path, int n_features, int n_labels, bool header) {
    if (n_features < 1 || n_labels < 1) {
        throw ConfigError("load_csv: need at least one feature and one label column");
    }
    const Matrix table = read_table(path, static_cast<std::size_t>(n_features + n_labels), header);
    return RawTable{table.leftCols(n_features), table.rightCols(n_labels)};
}

Matrix load_numeric_csv(const std::string& path, bool header) {
    return read_table(path, count_columns(path, header), header);
}

SplitIndices make_splits(Index n, SplitSizes sizes, std::uint64_t seed) {
    if (sizes.train < 0 || sizes.val < 0 || sizes.test < 0 || sizes.train + sizes.val + sizes.test > n) {
        throw ConfigError("split sizes exceed the number of rows (" + std::to_string(n) + ")");
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = derive_stream(seed, {0x5b117ULL});
    std::shuffle(order.begin(), order.end(), rng);
    SplitIndices s;
    auto it = order.begin();
    s.train.assign(it, it + sizes.train);
    it += sizes.train;
    s.val.assign(it, it + sizes.val);
    it += sizes.val;
    s.test.assign(it, it + sizes.test);
    return s;
}

SplitIndices load_split_file(const std::string& path, Index n) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open split file " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    SplitIndices s;
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    const auto read = [&](const char* key, std::vector<Index>& dst) {
        if (!doc.contains(key) || !doc[key].is_array()) {
            throw IoError(path + ": missing array '" + key + "'");
        }
        for (const auto& v : doc[key]) {
            if (!v.is_number_integer()) {
                throw IoError(path + ": non-integer index in '" + key + "'");
            }
            const auto i = v.get<Index>();
            if (i < 0 || i >= n) {
                throw IoError(path + ": index " + std::to_string(i) + " out of range");
            }
            if (seen[static_cast<std::size_t>(i)]) {
                throw IoError(path + ": index " + std::to_string(i) + " appears in more than one split");
            }
            seen[static_cast<std::size_t>(i)] = true;
            dst.push_back(i);
        }
    };
    read("train", s.train);
    read("val", s.val);
    read("test", s.test);
    return s;
}

Matrix NormalizationRecord::apply(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        const double range = max(j) - min(j);
        if (range > 0.0) {
            out.col(j) = (x.col(j).array() - min(j)) / range;
        } else {
            out.col(j).setZero();
        }
    }
    return out;
}

Matrix select_rows(const Matrix& m, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Index>(i)) = m.row(rows[i]);
    }
    return out;
}

Dataset normalize_minmax(const Dataset& dataset) {
    if (dataset.splits.train.empty()) {
        throw InputError("normalize_minmax: empty training split");
    }
    const Matrix train = select_rows(dataset.x, dataset.splits.train);
    NormalizationRecord rec;
    rec.min = train.colwise().minCoeff().transpose();
    rec.max = train.colwise().maxCoeff().transpose();
    for (Index j = 0; j < train.cols(); ++j) {
        if (!(rec.max(j) > rec.min(j))) {
            rec.constant_features.push_back(j);
        }
    }
    Dataset out = dataset;
    out.x = rec.apply(dataset.x);
    out.normalization = std::move(rec);
    return out;
}

DatasetSplits materialize(const Dataset& dataset) {
    return DatasetSplits{select_rows(dataset.x, dataset.splits.train), select_rows(dataset.y, dataset.splits.train),
                         select_rows(dataset.x, dataset.splits.val),   select_rows(dataset.y, dataset.splits.val),
                         select_rows(dataset.x, dataset.splits.test),  select_rows(dataset.y, dataset.splits.test)};
}

Dataset synthetic_arc_2d(Index n, double noise_sigma, std::uint64_t seed) {
    if (n < 2) {
        throw ConfigError("synthetic_arc_2d: need at least two points");
    }
    if (!(noise_sigma >= 0.0)) {
        throw ConfigError("synthetic_arc_2d: noise_sigma must be non-negative");
    }
    Rng rng = derive_stream(seed, {0xa7cULL});
    std::uniform_real_distribution<double> angle(std::numbers::pi / 8.0, 3.0 * std::numbers::pi / 8.0);
    std::normal_distribution<double> jitter(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    Dataset d;
    d.x.resize(n, 1);
    d.y.resize(n, 1);
    for (Index i = 0; i < n; ++i) {
        const double t = angle(rng);
        d.x(i, 0) = std::cos(t);
        d.y(i, 0) = std::sin(t);
        if (noise_sigma > 0.0) {
            d.x(i, 0) += jitter(rng);
            d.y(i, 0) += jitter(rng);
        }
    }
    d.splits.train.resize(static_cast<std::size_t>(n));
    std::iota(d.splits.train.begin(), d.splits.train.end(), Index{0});
    return d;
}

Matrix synthetic_manifold(int intrinsic_d, int ambient_d, Index n, std::uint64_t seed, bool rotate) {
    if (intrinsic_d < 1 || intrinsic_d > ambient_d) {
        throw ConfigError("synthetic_manifold: need 1 <= intrinsic_d <= ambient_d");
    }
    if (n < 1) {
        throw ConfigError("synthetic_manifold: need at least one point");
    }
    Rng rng = derive_stream(seed, {0x3a71ULL, static_cast<std::uint64_t>(intrinsic_d),
                                   static_cast<std::uint64_t>(ambient_d)});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix local(n, intrinsic_d);
    for (Index i = 0; i < local.size(); ++i) {
        local.data()[i] = unit(rng);
    }
    if (!rotate) {
        Matrix out = Matrix::Zero(n, ambient_d);
        out.leftCols(intrinsic_d) = local;
        return out;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(ambient_d, intrinsic_d);
    for (Index i = 0; i < g.size(); ++i) {
        g.data()[i] = normal(rng);
    }
    const Matrix basis = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(ambient_d, intrinsic_d);
    Vector offset(ambient_d);
    for (Index i = 0; i < offset.size(); ++i) {
        offset(i) = normal(rng);
    }
    Matrix out = local * basis.transpose();
    out.rowwise() += offset.transpose();
    return out;
}

namespace {

constexpr std::array<DatasetPreset, 2> kPresets{{
    {"airfoil", "airfoil.csv", 5, 1, SplitSizes{1003, 300, 200}},
    {"no2", "no2.csv", 7, 1, SplitSizes{200, 200, 100}},
}};

} // namespace

const DatasetPreset* find_preset(std::string_view name) {
    for (const auto& p : kPresets) {
        if (p.name == name) {
            return &p;
        }
    }
    return nullptr;
}

std::vector<ChecksumResult> verify_manifest(const std::string& manifest_path, const std::string& directory) {
    std::ifstream in(manifest_path);
    if (!in) {
        throw IoError("cannot open checksum manifest " + manifest_path);
    }
    std::vector<ChecksumResult> results;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        ChecksumResult r;
        if (!(fields >> r.expected >> r.file_name)) {
            continue;
        }
        try {
            r.actual = sha256_file(directory + "/" + r.file_name);
        } catch (const IoError&) {
            r.actual.clear();
        }
        r.ok = !r.actual.empty() && r.actual == r.expected;
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace foma
