#include <gtest/gtest.h>

#include "generators.hpp"
#include "koopman/errors.hpp"
#include "koopman/matrix.hpp"

using namespace koopman;

TEST(Matrix, InitializerListAndAccess) {
    const Matrix m{{1, 2, 3}, {4, 5, 6}};
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_EQ(m(1, 2), 6.0);
    EXPECT_THROW((Matrix{{1, 2}, {3}}), DimensionError);
}

TEST(Matrix, MatmulVariantsAgree) {
    Rng rng(3);
    const Matrix a = testgen::random_matrix(rng, 4, 3);
    const Matrix b = testgen::random_matrix(rng, 3, 5);
    const Matrix c = matmul(a, b);
    Matrix ref(4, 5);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            for (std::size_t k = 0; k < 3; ++k) ref(i, j) += a(i, k) * b(k, j);
    EXPECT_LT(testgen::max_abs_diff(c, ref), 1e-15);
    EXPECT_LT(testgen::max_abs_diff(matmul_tn(a.transpose(), b), ref), 1e-15);
    EXPECT_LT(testgen::max_abs_diff(matmul_nt(a, b.transpose()), ref), 1e-15);
    EXPECT_THROW(matmul(a, a), DimensionError);
}

TEST(Matrix, VecUnvecColumnStacking) {
    const Matrix m{{1, 2}, {3, 4}, {5, 6}};
    const Matrix v = vec(m);
    EXPECT_EQ(v.rows(), 6u);
    EXPECT_EQ(v[0], 1.0);
    EXPECT_EQ(v[1], 3.0);
    EXPECT_EQ(v[3], 2.0);
    EXPECT_EQ(unvec(v, 3, 2), m);
}

TEST(Matrix, KronVecIdentity) {
    // vec(A X B) = (B^T kron A) vec(X)
    Rng rng(5);
    const Matrix a = testgen::random_matrix(rng, 2, 3);
    const Matrix x = testgen::random_matrix(rng, 3, 4);
    const Matrix b = testgen::random_matrix(rng, 4, 2);
    const Matrix lhs = vec(matmul(matmul(a, x), b));
    const Matrix rhs = matmul(kron(b.transpose(), a), vec(x));
    EXPECT_LT(testgen::max_abs_diff(lhs, rhs), 1e-14);
}

TEST(Matrix, BlocksAndStacking) {
    const Matrix m{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    EXPECT_EQ(m.block(1, 1, 2, 2), (Matrix{{5, 6}, {8, 9}}));
    const std::vector<Matrix> parts{Matrix{{1, 2}}, Matrix{{3, 4}}};
    EXPECT_EQ(vstack(parts), (Matrix{{1, 2}, {3, 4}}));
    EXPECT_EQ(hstack(parts), (Matrix{{1, 2, 3, 4}}));
    const std::vector<std::size_t> idx{2, 0};
    EXPECT_EQ(m.rows_subset(idx), (Matrix{{7, 8, 9}, {1, 2, 3}}));
    EXPECT_THROW(m.block(2, 2, 2, 2), DimensionError);
}

TEST(Matrix, Norms) {
    const Matrix m{{1, -2}, {-3, 4}};
    EXPECT_EQ(m.norm1(), 6.0);
    EXPECT_EQ(m.max_abs(), 4.0);
    EXPECT_DOUBLE_EQ(m.frobenius_norm(), std::sqrt(30.0));
    EXPECT_EQ(m.trace(), 5.0);
}
