#pragma once

#include <complex>
#include <vector>

#include "koopman/linalg.hpp"
#include "koopman/matrix.hpp"
#include "koopman/model.hpp"
#include "koopman/rng.hpp"

namespace testgen {

using koopman::Matrix;
using koopman::Rng;

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

inline Matrix random_normal(Rng& rng, std::size_t rows, std::size_t cols, double sd = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.normal(0.0, sd);
    return m;
}

// Random matrix scaled to a target 1-norm.
inline Matrix random_with_norm(Rng& rng, std::size_t n, double norm) {
    Matrix m = random_matrix(rng, n, n);
    const double cur = m.norm1();
    return cur > 0.0 ? koopman::scale(m, norm / cur) : m;
}

// Random stable, diagonalizable spectrum of size d (conjugate-closed).
inline koopman::ComplexSpectrum random_stable_spectrum(Rng& rng, std::size_t d) {
    koopman::ComplexSpectrum s;
    while (s.size() < d) {
        const double re = -rng.uniform(0.01, 3.0);
        if (d - s.size() >= 2 && rng.uniform() < 0.5) {
            const double im = rng.uniform(0.1, 3.0);
            s.emplace_back(re, im);
            s.emplace_back(re, -im);
        } else {
            s.emplace_back(re, 0.0);
        }
    }
    return s;
}

inline koopman::StableKoopman random_stable_koopman(Rng& rng, std::size_t d, double lo = -3.0, double hi = 3.0) {
    koopman::StableKoopman k;
    for (std::size_t i = 0; i < d; ++i) k.sigma.push_back(rng.uniform(lo, hi));
    for (std::size_t i = 0; i + 1 < d; ++i) k.zeta.push_back(rng.uniform(lo, hi));
    return k;
}

// Real matrix with a prescribed spectrum: P blockdiag(...) P^{-1}.
inline Matrix matrix_with_spectrum(Rng& rng, const koopman::ComplexSpectrum& spec) {
    const std::size_t d = spec.size();
    Matrix b(d, d);
    std::size_t i = 0;
    while (i < d) {
        const auto l = spec[i];
        if (l.imag() != 0.0) {
            b(i, i) = b(i + 1, i + 1) = l.real();
            b(i, i + 1) = l.imag();
            b(i + 1, i) = -l.imag();
            i += 2;
        } else {
            b(i, i) = l.real();
            i += 1;
        }
    }
    Matrix p = random_matrix(rng, d, d);
    for (std::size_t k = 0; k < d; ++k) p(k, k) += 2.0;  // keep P comfortably invertible
    return koopman::matmul(koopman::matmul(p, b), koopman::inverse(p));
}

// Greedy matching distance between two spectra of equal size.
inline double spectral_distance(koopman::ComplexSpectrum a, koopman::ComplexSpectrum b) {
    double worst = 0.0;
    for (const auto& x : a) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < b.size(); ++j)
            if (std::abs(b[j] - x) < std::abs(b[best] - x)) best = j;
        worst = std::max(worst, std::abs(b[best] - x));
        b.erase(b.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return worst;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).max_abs(); }

}  // namespace testgen

namespace testgen {

inline koopman::Matrix from_values(std::size_t rows, std::size_t cols, const std::vector<double>& v) {
    koopman::Matrix m(rows, cols);
    std::copy(v.begin(), v.end(), m.values().begin());
    return m;
}

inline std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace testgen
