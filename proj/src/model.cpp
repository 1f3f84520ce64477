#include "foma/model.hpp"

#include "foma/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace foma {

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

void MlpModel::validate() const {
    if (layer_dims.size() < 2 || weights.size() + 1 != layer_dims.size() || biases.size() != weights.size()) {
        throw InputError("mlp: layer_dims and parameter lists disagree");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != layer_dims[l] || weights[l].cols() != layer_dims[l + 1] ||
            biases[l].size() != layer_dims[l + 1]) {
            throw InputError("mlp: parameter shapes of layer " + std::to_string(l) + " do not match layer_dims");
        }
    }
}

MlpModel make_mlp(const std::vector<int>& layer_dims, Rng& rng) {
    if (layer_dims.size() < 2) {
        throw ConfigError("mlp: need at least input and output widths");
    }
    for (int d : layer_dims) {
        if (d < 1) {
            throw ConfigError("mlp: layer widths must be positive");
        }
    }
    MlpModel model;
    model.layer_dims = layer_dims;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer_dims[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        Matrix w(layer_dims[l], layer_dims[l + 1]);
        for (Index i = 0; i < w.size(); ++i) {
            w.data()[i] = u(rng);
        }
        Vector b(layer_dims[l + 1]);
        for (Index i = 0; i < b.size(); ++i) {
            b(i) = u(rng);
        }
        model.weights.push_back(std::move(w));
        model.biases.push_back(std::move(b));
    }
    return model;
}

ForwardPass forward_range(const MlpModel& model, const Matrix& z, int first_layer, int last_layer) {
    const int n_layers = model.num_layers();
    if (last_layer < 0) {
        last_layer = n_layers;
    }
    if (first_layer < 0 || first_layer > last_layer || last_layer > n_layers) {
        throw InputError("forward: invalid layer range");
    }
    if (z.cols() != model.layer_dims[static_cast<std::size_t>(first_layer)]) {
        throw InputError("forward: input has " + std::to_string(z.cols()) + " columns, layer " +
                         std::to_string(first_layer) + " expects " +
                         std::to_string(model.layer_dims[static_cast<std::size_t>(first_layer)]));
    }
    ForwardPass pass;
    pass.first_layer = first_layer;
    pass.activations.reserve(static_cast<std::size_t>(last_layer - first_layer + 1));
    pass.activations.push_back(z);
    for (int l = first_layer; l < last_layer; ++l) {
        const auto li = static_cast<std::size_t>(l);
        Matrix next = pass.activations.back() * model.weights[li];
        next.rowwise() += model.biases[li].transpose();
        if (l + 1 < n_layers) {
            next = next.cwiseMax(0.0);
        }
        pass.activations.push_back(std::move(next));
    }
    return pass;
}

ForwardPass forward(const MlpModel& model, const Matrix& x) {
    return forward_range(model, x, 0, -1);
}

Matrix predict(const MlpModel& model, const Matrix& x) {
    return forward(model, x).output();
}

GradientSet GradientSet::zeros_like(const MlpModel& model) {
    GradientSet g;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        g.weights.push_back(Matrix::Zero(model.weights[l].rows(), model.weights[l].cols()));
        g.biases.push_back(Vector::Zero(model.biases[l].size()));
    }
    return g;
}

double GradientSet::squared_norm() const {
    double s = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        s += weights[l].squaredNorm() + biases[l].squaredNorm();
    }
    return s;
}

void GradientSet::scale(double factor) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] *= factor;
        biases[l] *= factor;
    }
}

bool GradientSet::all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].allFinite() || !biases[l].allFinite()) {
            return false;
        }
    }
    return true;
}

double mse_loss(const Matrix& y_hat, const Matrix& y) {
    if (y_hat.rows() != y.rows() || y_hat.cols() != y.cols()) {
        throw InputError("mse: prediction and label shapes differ");
    }
    return (y_hat - y).squaredNorm() / static_cast<double>(y.size());
}

Metrics regression_metrics(const Matrix& y_hat, const Matrix& y) {
    Metrics m;
    m.mse = mse_loss(y_hat, y);
    m.rmse = std::sqrt(m.mse);
    double ape = 0.0;
    Index counted = 0;
    for (Index i = 0; i < y.size(); ++i) {
        const double truth = y.data()[i];
        if (std::abs(truth) > 1e-12) {
            ape += std::abs(truth - y_hat.data()[i]) / std::abs(truth);
            ++counted;
        } else {
            ++m.mape_excluded;
        }
    }
    m.mape = counted == 0 ? 0.0 : 100.0 * ape / static_cast<double>(counted);
    return m;
}

Matrix mse_gradient(const Matrix& y_hat, const Matrix& y, double mu) {
    if (y_hat.rows() != y.rows() || y_hat.cols() != y.cols()) {
        throw InputError("mse: prediction and label shapes differ");
    }
    return (2.0 * mu / static_cast<double>(y.size())) * (y_hat - y);
}

Matrix backward_into(const MlpModel& model, const ForwardPass& pass, const Matrix& d_output, GradientSet& grads) {
    const int n_layers = model.num_layers();
    const int last = pass.first_layer + static_cast<int>(pass.activations.size()) - 1;
    Matrix delta = d_output;
    for (int l = last - 1; l >= pass.first_layer; --l) {
        const auto li = static_cast<std::size_t>(l);
        const auto ai = static_cast<std::size_t>(l - pass.first_layer);
        if (l + 1 < n_layers) {
            delta = delta.cwiseProduct((pass.activations[ai + 1].array() > 0.0).cast<double>().matrix());
        }
        grads.weights[li].noalias() += pass.activations[ai].transpose() * delta;
        grads.biases[li].noalias() += delta.colwise().sum().transpose();
        delta = delta * model.weights[li].transpose();
    }
    return delta;
}

GradientSet backward(const MlpModel& model, const ForwardPass& pass, const Matrix& y, double mu) {
    GradientSet grads = GradientSet::zeros_like(model);
    backward_into(model, pass, mse_gradient(pass.output(), y, mu), grads);
    return grads;
}

Matrix foma_vjp(const Matrix& a, double lambda, int k, SvMode mode, const Matrix& upstream) {
    if (upstream.rows() != a.rows() || upstream.cols() != a.cols()) {
        throw InputError("foma_vjp: upstream gradient shape differs from the input");
    }
    if (a.rows() < a.cols()) {
        return foma_vjp(a.transpose(), lambda, k, mode, upstream.transpose()).transpose();
    }

    const Index p = a.cols();
    const Vector c = spectrum_scale(p, lambda, k, mode);
    if ((c.array() == 1.0).all()) {
        return upstream;
    }

    const SvdFactors f = thin_svd(a);
    const Vector& s = f.s;
    const Matrix gv = upstream * f.v;
    const Matrix m = f.u.transpose() * gv;
    const double floor = std::max(kSvdGapEpsilon * s(0) * s(0), std::numeric_limits<double>::min());

    Matrix inner(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) {
            if (i == j) {
                inner(i, i) = c(i) * m(i, i);
                continue;
            }
            double value = c(j) * m(i, j);
            if (c(i) != c(j)) {
                double gap = s(j) * s(j) - s(i) * s(i);
                gap = std::copysign(std::max(std::abs(gap), floor), gap);
                value += (c(j) - c(i)) * (m(i, j) * s(i) * s(i) + m(j, i) * s(i) * s(j)) / gap;
            }
            inner(i, j) = value;
        }
    }

    // (I - U U^T) G V diag(c) V^T carries the part of the upstream gradient
    // outside the column space of U.
    const Matrix outside = gv - f.u * m;
    return f.u * inner * f.v.transpose() + outside * c.asDiagonal() * f.v.transpose();
}

} // namespace foma
