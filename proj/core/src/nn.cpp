#include "koopman/nn.hpp"

#include <charconv>

#include "koopman/errors.hpp"
#include "koopman/rng.hpp"

namespace koopman {

FeedForwardNet::FeedForwardNet(std::vector<std::size_t> layer_widths) : widths(std::move(layer_widths)) {
    if (widths.size() < 2) throw DimensionError("network needs at least an input and an output width");
    for (std::size_t l = 1; l < widths.size(); ++l) {
        weights.emplace_back(widths[l - 1], widths[l]);
        biases.emplace_back(1, widths[l]);
    }
    validate();
}

std::size_t FeedForwardNet::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

void FeedForwardNet::validate() const {
    if (widths.size() < 2) throw DimensionError("network needs at least an input and an output width");
    if (weights.size() + 1 != widths.size() || biases.size() != weights.size())
        throw DimensionError("network layer count inconsistent with widths");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (widths[l] == 0 || widths[l + 1] == 0) throw DimensionError("network width must be positive");
        if (weights[l].rows() != widths[l] || weights[l].cols() != widths[l + 1])
            throw DimensionError("weight " + std::to_string(l + 1) + " has shape " + shape_string(weights[l]));
        if (biases[l].rows() != 1 || biases[l].cols() != widths[l + 1])
            throw DimensionError("bias " + std::to_string(l + 1) + " has shape " + shape_string(biases[l]));
    }
}

std::vector<double> flatten(const FeedForwardNet& net) {
    std::vector<double> out;
    out.reserve(net.parameter_count());
    for (std::size_t l = 0; l < net.layers(); ++l) {
        out.insert(out.end(), net.weights[l].values().begin(), net.weights[l].values().end());
        out.insert(out.end(), net.biases[l].values().begin(), net.biases[l].values().end());
    }
    return out;
}

void unflatten(FeedForwardNet& net, std::span<const double> flat) {
    if (flat.size() != net.parameter_count()) throw DimensionError("unflatten: parameter count mismatch");
    std::size_t k = 0;
    for (std::size_t l = 0; l < net.layers(); ++l) {
        for (double& w : net.weights[l].values()) w = flat[k++];
        for (double& b : net.biases[l].values()) b = flat[k++];
    }
}

ParameterSlot parameter_slot(const FeedForwardNet& net, std::size_t index) {
    for (std::size_t l = 0; l < net.layers(); ++l) {
        const Matrix& w = net.weights[l];
        if (index < w.size()) return {l, false, index / w.cols(), index % w.cols()};
        index -= w.size();
        const Matrix& b = net.biases[l];
        if (index < b.size()) return {l, true, 0, index};
        index -= b.size();
    }
    throw DimensionError("parameter index out of range");
}

Matrix forward(const FeedForwardNet& net, const Matrix& x) {
    if (x.cols() != net.input_width())
        throw DimensionError("forward: input width " + std::to_string(x.cols()) + ", expected " +
                             std::to_string(net.input_width()));
    Matrix h = x;
    for (std::size_t l = 0; l < net.layers(); ++l) {
        Matrix a = matmul(h, net.weights[l]);
        const Matrix& b = net.biases[l];
        for (std::size_t r = 0; r < a.rows(); ++r) {
            auto row = a.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
        }
        if (l + 1 < net.layers())
            for (double& v : a.values()) v = swish(v);
        h = std::move(a);
    }
    return h;
}

NetVars bind(Tape& tape, const FeedForwardNet& net, bool trainable) {
    NetVars v;
    for (std::size_t l = 0; l < net.layers(); ++l) {
        v.weights.push_back(trainable ? tape.variable(net.weights[l]) : tape.constant(net.weights[l]));
        v.biases.push_back(trainable ? tape.variable(net.biases[l]) : tape.constant(net.biases[l]));
    }
    return v;
}

Var forward(const FeedForwardNet& shape, const NetVars& vars, const Var& x) {
    if (x.cols() != shape.input_width())
        throw DimensionError("forward: input width " + std::to_string(x.cols()) + ", expected " +
                             std::to_string(shape.input_width()));
    Var h = x;
    for (std::size_t l = 0; l < shape.layers(); ++l) {
        Var a = add_row_bias(matmul(h, vars.weights[l]), vars.biases[l]);
        h = l + 1 < shape.layers() ? swish(a) : a;
    }
    return h;
}

DualVar forward_tangent(const FeedForwardNet& shape, const NetVars& vars, const Var& x, const Var& dx) {
    if (x.cols() != shape.input_width() || dx.cols() != shape.input_width() || dx.rows() != x.rows())
        throw DimensionError("forward_tangent: input shape mismatch");
    Var h = x;
    Var th = dx;
    for (std::size_t l = 0; l < shape.layers(); ++l) {
        Var a = add_row_bias(matmul(h, vars.weights[l]), vars.biases[l]);
        Var ta = matmul(th, vars.weights[l]);
        if (l + 1 < shape.layers()) {
            h = swish(a);
            th = hadamard(swish_prime(a), ta);
        } else {
            h = a;
            th = ta;
        }
    }
    return {h, th};
}

Matrix input_jacobian(const FeedForwardNet& net, const Matrix& x) {
    if (x.rows() != 1 || x.cols() != net.input_width())
        throw DimensionError("input_jacobian: expected a 1 x " + std::to_string(net.input_width()) + " row");
    const std::size_t n_out = net.output_width();
    Matrix jac(net.input_width(), n_out);
    for (std::size_t k = 0; k < n_out; ++k) {
        Tape tape;
        const Var xv = tape.variable(x);
        const NetVars vars = bind(tape, net, false);
        Matrix pick(1, n_out);
        pick[k] = 1.0;
        const Var out = sum(hadamard(forward(net, vars, xv), tape.constant(std::move(pick))));
        tape.backward(out);
        const Matrix g = tape.grad(xv);
        for (std::size_t i = 0; i < g.cols(); ++i) jac(i, k) = g[i];
    }
    return jac;
}

double truncated_normal(Rng& rng, double stddev, double bound_in_stddevs) {
    for (;;) {
        const double z = rng.normal();
        if (std::abs(z) <= bound_in_stddevs) return stddev * z;
    }
}

FeedForwardNet init_truncated_normal(const std::vector<std::size_t>& widths, std::uint64_t seed, double stddev) {
    FeedForwardNet net(widths);
    Rng rng(seed);
    for (auto& w : net.weights)
        for (double& v : w.values()) v = truncated_normal(rng, stddev);
    return net;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
    std::vector<std::size_t> out;
    const char* p = text.data();
    const char* end = p + text.size();
    while (p < end) {
        std::size_t v = 0;
        const auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc() || v == 0) throw UsageError("invalid layer specification '" + text + "'");
        out.push_back(v);
        p = next;
        if (p < end) {
            if (*p != '-') throw UsageError("invalid layer specification '" + text + "'");
            ++p;
            if (p == end) throw UsageError("invalid layer specification '" + text + "'");
        }
    }
    if (out.size() < 3) throw UsageError("layer specification '" + text + "' needs input, latent and output widths");
    return out;
}

std::string format_widths(const std::vector<std::size_t>& widths) {
    std::string s;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(widths[i]);
    }
    return s;
}

}  // namespace koopman
