#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "koopman/matrix.hpp"

namespace koopman {

class Tape;

// Handle to a matrix-valued node on a Tape. Cheap to copy.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// order is a valid topological order for the backward sweep. A tape is
// single-use: after backward() it refuses new nodes and a second sweep.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var variable(Matrix value);
    Var constant(Matrix value);

    void backward(const Var& loss);

    // Gradient of the loss w.r.t. a node; zeros when the node did not
    // influence the loss.
    Matrix grad(const Var& v) const;

    bool consumed() const noexcept { return consumed_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Building blocks for operations.
    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const Matrix& upstream(std::size_t id) const { return nodes_[id].grad; }
    void accumulate(std::size_t id, const Matrix& g);
    Var push(Matrix value, std::initializer_list<Var> parents, Backward backward);
    Var push(Matrix value, std::span<const Var> parents, Backward backward);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        Backward backward;
    };
    void check_live() const;

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// Differentiable counterparts of the Matrix kernels. Names mirror matrix.hpp
// so templates (e.g. expm_pade13) work on either type.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
Var identity_like(const Var& a);
Var solve(const Var& a, const Var& b);  // a^{-1} b
Var transpose(const Var& a);

Var add_scalar(const Var& a, double c);
Var add_row_bias(const Var& x, const Var& bias);  // x (B x n) + 1 bias (1 x n)
Var mul_row(const Var& x, const Var& row);        // x_ij * row_j
Var scale_rows(const Var& x, std::span<const double> weights);
Var swish(const Var& x);
Var swish_prime(const Var& x);
Var square(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var lgamma(const Var& x);
Var sum(const Var& x);     // 1 x 1
Var sum_sq(const Var& x);  // 1 x 1
Var vstack(std::span<const Var> parts);
Var slice_rows(const Var& x, std::size_t r0, std::size_t n);

// Tridiagonal matrix with the given diagonal (1 x D), super-diagonal zeta
// (1 x D-1) and sub-diagonal -zeta.
Var tridiagonal_skew(const Var& zeta, const Var& diag);

// e^{tA} via the same scaling-and-squaring as the Matrix version; the
// gradient is exact for the unrolled algorithm.
Var matexp(const Var& a, double t);

double sigmoid(double x);
double swish(double x);
double swish_prime(double x);
double swish_second(double x);

}  // namespace koopman
