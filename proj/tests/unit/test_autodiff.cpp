#include <gtest/gtest.h>

#include <cmath>

#include "fd.hpp"
#include "generators.hpp"
#include "koopman/autodiff.hpp"
#include "koopman/errors.hpp"
#include "koopman/linalg.hpp"

using namespace koopman;
using testgen::central_difference;
using testgen::relative_error;

namespace {

using Unary = std::function<Var(Tape&, const Var&)>;

// Scalar probe sum(W .* op(X)) with a fixed random W; returns the relative
// error of the reverse-mode gradient against central differences.
double unary_gradient_error(const Unary& op, const Matrix& x0, std::uint64_t seed = 1) {
    Matrix weights;
    auto eval = [&](const Matrix& x, Matrix* grad) {
        Tape tape;
        Var x_var = tape.variable(x);
        Var y = op(tape, x_var);
        if (weights.rows() == 0) {
            Rng rng(seed);
            weights = testgen::random_matrix(rng, y.rows(), y.cols());
        }
        Var s = sum(hadamard(y, tape.constant(weights)));
        const double v = s.value()(0, 0);
        if (grad) {
            tape.backward(s);
            *grad = tape.grad(x_var);
        }
        return v;
    };
    Matrix g;
    eval(x0, &g);
    auto f = [&](std::span<const double> flat) {
        Matrix x = testgen::from_values(x0.rows(), x0.cols(), std::vector<double>(flat.begin(), flat.end()));
        return eval(x, nullptr);
    };
    const auto fd = central_difference(f, x0.values());
    return relative_error(g.values(), fd);
}

Matrix sample(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    return testgen::random_matrix(rng, r, c, lo, hi);
}

}  // namespace

TEST(Autodiff, ElementwiseOpsMatchFiniteDifferences) {
    const Matrix x = sample(3, 4, 11);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return swish(v); }, x), 1e-7);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return swish_prime(v); }, x), 1e-7);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return square(v); }, x), 1e-7);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return exp(v); }, x), 1e-7);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return scale(add_scalar(v, 2.0), -1.5); }, x), 1e-7);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return sum_sq(v); }, x), 1e-7);
    const Matrix pos = sample(3, 4, 12, 0.5, 3.0);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return log(v); }, pos), 1e-7);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return lgamma(v); }, pos), 1e-7);
}

TEST(Autodiff, MatrixOpsMatchFiniteDifferences) {
    const Matrix a = sample(3, 4, 21), b = sample(4, 2, 22), sq = sample(4, 4, 23);
    EXPECT_LT(unary_gradient_error([&](Tape& t, const Var& v) { return matmul(v, t.constant(b)); }, a), 1e-7);
    EXPECT_LT(unary_gradient_error([&](Tape& t, const Var& v) { return matmul(t.constant(a), v); }, b), 1e-7);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return transpose(v); }, a), 1e-7);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return matmul(v, transpose(v)); }, a), 1e-7);
    Matrix well = sq;
    for (std::size_t i = 0; i < 4; ++i) well(i, i) += 4.0;
    EXPECT_LT(unary_gradient_error([&](Tape& t, const Var& v) { return solve(v, t.constant(b)); }, well), 1e-7);
    EXPECT_LT(unary_gradient_error([&](Tape& t, const Var& v) { return solve(t.constant(well), v); }, b), 1e-7);
    const Matrix bias = sample(1, 4, 24);
    EXPECT_LT(unary_gradient_error([&](Tape& t, const Var& v) { return add_row_bias(t.constant(a), v); }, bias), 1e-7);
    EXPECT_LT(unary_gradient_error([&](Tape& t, const Var& v) { return mul_row(v, t.constant(bias)); }, a), 1e-7);
    EXPECT_LT(unary_gradient_error([&](Tape& t, const Var& v) { return mul_row(t.constant(a), v); }, bias), 1e-7);
    const std::vector<double> w{0.5, -2.0, 3.0};
    EXPECT_LT(unary_gradient_error([&](Tape&, const Var& v) { return scale_rows(v, w); }, a), 1e-7);
    EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return slice_rows(v, 1, 2); }, a), 1e-7);
    EXPECT_LT(unary_gradient_error(
                  [](Tape&, const Var& v) {
                      std::vector<Var> parts{v, square(v)};
                      return vstack(parts);
                  },
                  a),
              1e-7);
}

TEST(Autodiff, TridiagonalSkewMatchesAssembly) {
    Tape tape;
    Var zeta = tape.variable(testgen::from_values(1, 2, {0.3, -0.7}));
    Var diag = tape.variable(testgen::from_values(1, 3, {-1.0, -2.0, -0.5}));
    const Matrix k = tridiagonal_skew(zeta, diag).value();
    const Matrix expect = testgen::from_values(3, 3, {-1.0, 0.3, 0.0, -0.3, -2.0, -0.7, 0.0, 0.7, -0.5});
    EXPECT_EQ(testgen::to_vec(k.values()), testgen::to_vec(expect.values()));
    const Matrix z = sample(1, 4, 31);
    EXPECT_LT(unary_gradient_error(
                  [](Tape& t, const Var& v) { return tridiagonal_skew(v, t.constant(testgen::from_values(1, 5, {-1, -2, -3, -4, -5}))); },
                  z),
              1e-7);
}

TEST(Autodiff, MatexpGradientMatchesFiniteDifferences) {
    for (double norm : {0.1, 1.0, 8.0}) {
        Rng rng(41);
        const Matrix a = testgen::random_with_norm(rng, 4, norm);
        EXPECT_LT(unary_gradient_error([](Tape&, const Var& v) { return matexp(v, 0.7); }, a), 1e-6) << norm;
        Tape tape;
        EXPECT_LT((matexp(tape.constant(a), 0.7).value() - matexp(a, 0.7)).max_abs(), 1e-13);
    }
}

TEST(Autodiff, UnusedNodesHaveZeroGradient) {
    Tape tape;
    Var x = tape.variable(testgen::from_values(2, 2, {1, 2, 3, 4}));
    Var y = tape.variable(testgen::from_values(1, 1, {5}));
    Var s = sum(x);
    tape.backward(s);
    EXPECT_EQ(tape.grad(y).max_abs(), 0.0);
    EXPECT_EQ(testgen::to_vec(tape.grad(x).values()), std::vector<double>(4, 1.0));
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
    Tape tape;
    Var c = tape.constant(testgen::from_values(1, 2, {1.0, 2.0}));
    Var x = tape.variable(testgen::from_values(1, 2, {3.0, 4.0}));
    tape.backward(sum(hadamard(c, x)));
    EXPECT_EQ(tape.grad(c).max_abs(), 0.0);
    EXPECT_EQ(testgen::to_vec(tape.grad(x).values()), (std::vector<double>{1.0, 2.0}));
}

TEST(Autodiff, FanOutAccumulates) {
    Tape tape;
    Var x = tape.variable(testgen::from_values(1, 1, {3.0}));
    Var y = add(hadamard(x, x), scale(x, 2.0));  // x^2 + 2x
    tape.backward(y);
    EXPECT_DOUBLE_EQ(tape.grad(x)(0, 0), 8.0);
}

TEST(Autodiff, TapeIsSingleUse) {
    Tape tape;
    Var x = tape.variable(testgen::from_values(1, 1, {1.0}));
    Var s = sum(x);
    tape.backward(s);
    EXPECT_TRUE(tape.consumed());
    EXPECT_THROW(tape.backward(s), StateError);
    EXPECT_THROW(tape.variable(Matrix(1, 1)), StateError);
}

TEST(Autodiff, ShapeMismatchesThrow) {
    Tape tape;
    Var a = tape.variable(Matrix(2, 3));
    Var b = tape.variable(Matrix(2, 3));
    EXPECT_THROW(matmul(a, b), DimensionError);
    EXPECT_THROW(add(a, tape.variable(Matrix(3, 2))), DimensionError);
    EXPECT_THROW(tape.backward(a), DimensionError);  // loss must be 1 x 1
}
