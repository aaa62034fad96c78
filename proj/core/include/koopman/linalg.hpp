#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "koopman/matrix.hpp"

namespace koopman {

using Complex = std::complex<double>;

// Eigenvalues sorted by real part descending, then imaginary part descending.
using ComplexSpectrum = std::vector<Complex>;

struct SvdResult {
    Matrix u;                    // M x k, k = min(M, N)
    std::vector<double> s;       // descending, nonnegative
    Matrix v;                    // N x k
};

struct LuDecomposition {
    Matrix lu;
    std::vector<std::size_t> perm;
    int sign = 1;
    double min_pivot = 0.0;
    double max_pivot = 0.0;
};

LuDecomposition lu_decompose(const Matrix& a);
Matrix lu_solve(const LuDecomposition& lu, const Matrix& b);

// Solves a x = b. Throws NumericError when a is exactly singular.
Matrix solve(const Matrix& a, const Matrix& b);
Matrix inverse(const Matrix& a);
double determinant(const Matrix& a);

// Lower-triangular L with L L^T = a. Throws NumericError if a is not
// numerically positive definite.
Matrix cholesky(const Matrix& a);

SvdResult thin_svd(const Matrix& x);

// Moore-Penrose pseudo-inverse; singular values below rcond * s_max are dropped.
Matrix pinv(const Matrix& a, double rcond = 1e-12);

ComplexSpectrum eigenvalues(const Matrix& a);

// Right eigenvector (unit 2-norm, largest component real positive) for each
// supplied eigenvalue, by inverse iteration.
std::vector<std::vector<Complex>> eigenvectors(const Matrix& a, const ComplexSpectrum& lambda);

// Scaling exponent used by matexp: smallest s >= 0 with ||A||_1 / 2^s <= theta_13.
int expm_scaling_exponent(double norm1);

// Pade(13) approximant of e^{a / 2^s} followed by s squarings. Written against
// the named kernels so it serves both plain matrices and autodiff variables.
template <typename M>
M expm_pade13(const M& a, int s) {
    constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                            1187353796428800.0,  129060195264000.0,   10559470521600.0,
                            670442572800.0,      33522128640.0,       1323241920.0,
                            40840800.0,          960960.0,            16380.0,
                            182.0,               1.0};
    const M as = scale(a, std::ldexp(1.0, -s));
    const M eye = identity_like(as);
    const M a2 = matmul(as, as);
    const M a4 = matmul(a2, a2);
    const M a6 = matmul(a4, a2);
    const M u_inner =
        add(matmul(a6, add(add(scale(a6, b[13]), scale(a4, b[11])), scale(a2, b[9]))),
            add(add(scale(a6, b[7]), scale(a4, b[5])), add(scale(a2, b[3]), scale(eye, b[1]))));
    const M u = matmul(as, u_inner);
    const M v =
        add(matmul(a6, add(add(scale(a6, b[12]), scale(a4, b[10])), scale(a2, b[8]))),
            add(add(scale(a6, b[6]), scale(a4, b[4])), add(scale(a2, b[2]), scale(eye, b[0]))));
    M r = solve(sub(v, u), add(v, u));
    for (int i = 0; i < s; ++i) r = matmul(r, r);
    return r;
}

// e^{tA}.
Matrix matexp(const Matrix& a, double t = 1.0);

// A (x) I + I (x) B, consistent with column-stacking vec: for square X,
// vec(B X + X A^T) = kron_sum(A, B) vec(X).
Matrix kron_sum(const Matrix& a, const Matrix& b);

// Integral over [0, t] of e^{sA} lam e^{sA^T} ds. Closed form through the
// Kronecker sum, with adaptive Simpson quadrature when A (+) A is singular.
Matrix ou_covariance(const Matrix& a, const Matrix& lam, double t);

// The quadrature path of ou_covariance, exposed for cross-checking.
Matrix ou_covariance_quadrature(const Matrix& a, const Matrix& lam, double t, double abs_tol = 1e-9);

Matrix symmetrize(const Matrix& a);

}  // namespace koopman
