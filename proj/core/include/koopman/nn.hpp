#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "koopman/autodiff.hpp"
#include "koopman/matrix.hpp"

namespace koopman {

// Fully connected network: Swish on hidden layers, identity on the last.
// Inputs are rows; a batch is a B x n0 matrix.
struct FeedForwardNet {
    std::vector<std::size_t> widths;  // n0 .. nL
    std::vector<Matrix> weights;      // W_l : n_{l-1} x n_l
    std::vector<Matrix> biases;       // b_l : 1 x n_l

    FeedForwardNet() = default;
    explicit FeedForwardNet(std::vector<std::size_t> layer_widths);  // zero parameters

    std::size_t layers() const noexcept { return weights.size(); }
    std::size_t input_width() const { return widths.front(); }
    std::size_t output_width() const { return widths.back(); }
    std::size_t parameter_count() const;

    void validate() const;
};

// Location of a flat parameter inside a network.
struct ParameterSlot {
    std::size_t layer;
    bool is_bias;
    std::size_t row;
    std::size_t col;
};

// Flat order: W_1 (row-major), b_1, W_2, b_2, ...
std::vector<double> flatten(const FeedForwardNet& net);
void unflatten(FeedForwardNet& net, std::span<const double> flat);
ParameterSlot parameter_slot(const FeedForwardNet& net, std::size_t index);

Matrix forward(const FeedForwardNet& net, const Matrix& x);

// Network parameters bound to a tape.
struct NetVars {
    std::vector<Var> weights;
    std::vector<Var> biases;
};

NetVars bind(Tape& tape, const FeedForwardNet& net, bool trainable = true);
Var forward(const FeedForwardNet& shape, const NetVars& vars, const Var& x);

// Forward pass that also carries a tangent: returns (f(x), J_f(x) applied to
// dx) row by row, i.e. dx . grad f.
struct DualVar {
    Var value;
    Var tangent;
};
DualVar forward_tangent(const FeedForwardNet& shape, const NetVars& vars, const Var& x, const Var& dx);

// d output / d input at a single row x, n0 x nL, from reverse sweeps.
Matrix input_jacobian(const FeedForwardNet& net, const Matrix& x);

// Weights i.i.d. normal(0, stddev) truncated to +-2 stddev, biases zero.
FeedForwardNet init_truncated_normal(const std::vector<std::size_t>& widths, std::uint64_t seed,
                                     double stddev = 0.1);

class Rng;
double truncated_normal(Rng& rng, double stddev, double bound_in_stddevs = 2.0);

// Parses "2-8-16-8-2".
std::vector<std::size_t> parse_widths(const std::string& text);
std::string format_widths(const std::vector<std::size_t>& widths);

}  // namespace koopman
