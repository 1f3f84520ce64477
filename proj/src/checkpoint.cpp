#include "foma/errors.hpp"
#include "foma/model.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

// Checkpoint layout (text, one token stream):
//
//   foma-mlp-checkpoint 1
//   dims <d0> <d1> ... <dL>
//   tensor W<l> <rows> <cols>
//   <rows lines of cols hex-float values>
//   tensor b<l> 1 <cols>
//   <one line>
//   ...
//   end
//
// Values are written with %a so that a save/load cycle is bit-exact.

namespace foma {

namespace {

constexpr const char* kMagic = "foma-mlp-checkpoint";
constexpr int kFormatVersion = 1;

std::string hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            out << (j == 0 ? "" : " ") << hexfloat(m(i, j));
        }
        out << '\n';
    }
}

Matrix read_tensor(std::istream& in, const std::string& expected_name, const std::string& path) {
    std::string tag;
    std::string name;
    Index rows = 0;
    Index cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "tensor" || name != expected_name || rows < 0 || cols < 0) {
        throw IoError(path + ": expected header 'tensor " + expected_name + " <rows> <cols>'");
    }
    Matrix m(rows, cols);
    std::string token;
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            if (!(in >> token)) {
                throw IoError(path + ": truncated tensor " + name);
            }
            char* end = nullptr;
            m(i, j) = std::strtod(token.c_str(), &end);
            if (end == token.c_str() || *end != '\0') {
                throw IoError(path + ": bad number '" + token + "' in tensor " + name);
            }
        }
    }
    return m;
}

} // namespace

void save_checkpoint(const MlpModel& model, const std::string& path) {
    model.validate();
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out << kMagic << ' ' << kFormatVersion << '\n' << "dims";
    for (int d : model.layer_dims) {
        out << ' ' << d;
    }
    out << '\n';
    for (int l = 0; l < model.num_layers(); ++l) {
        const auto li = static_cast<std::size_t>(l);
        write_tensor(out, "W" + std::to_string(l), model.weights[li]);
        write_tensor(out, "b" + std::to_string(l), model.biases[li].transpose());
    }
    out << "end\n";
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

MlpModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open checkpoint " + path);
    }
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic) {
        throw IoError(path + ": not a foma checkpoint");
    }
    if (version != kFormatVersion) {
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    std::string line;
    std::getline(in, line);
    if (!std::getline(in, line)) {
        throw IoError(path + ": missing dims line");
    }
    std::istringstream dims_line(line);
    std::string tag;
    dims_line >> tag;
    if (tag != "dims") {
        throw IoError(path + ": missing dims line");
    }
    MlpModel model;
    int d = 0;
    while (dims_line >> d) {
        model.layer_dims.push_back(d);
    }
    if (model.layer_dims.size() < 2) {
        throw IoError(path + ": need at least two layer widths");
    }
    for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
        model.weights.push_back(read_tensor(in, "W" + std::to_string(l), path));
        const Matrix b = read_tensor(in, "b" + std::to_string(l), path);
        if (b.rows() != 1) {
            throw IoError(path + ": bias tensor must have one row");
        }
        model.biases.push_back(b.row(0).transpose());
    }
    std::string end_tag;
    if (!(in >> end_tag) || end_tag != "end") {
        throw IoError(path + ": missing end marker");
    }
    try {
        model.validate();
    } catch (const InputError& e) {
        throw IoError(path + ": " + e.what());
    }
    return model;
}

} // namespace foma
