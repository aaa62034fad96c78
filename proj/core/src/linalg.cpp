#include "koopman/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "koopman/errors.hpp"

namespace koopman {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTheta13 = 5.371920351148152;

}  // namespace

LuDecomposition lu_decompose(const Matrix& a) {
    require_square(a, "lu_decompose");
    const std::size_t n = a.rows();
    LuDecomposition out{a, std::vector<std::size_t>(n), 1, 0.0, 0.0};
    Matrix& m = out.lu;
    std::iota(out.perm.begin(), out.perm.end(), std::size_t{0});
    out.min_pivot = n ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(m(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(m(i, k)) > best) {
                best = std::abs(m(i, k));
                piv = i;
            }
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
            std::swap(out.perm[k], out.perm[piv]);
            out.sign = -out.sign;
        }
        out.min_pivot = std::min(out.min_pivot, best);
        out.max_pivot = std::max(out.max_pivot, best);
        if (best == 0.0) continue;
        const double inv = 1.0 / m(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = m(i, k) * inv;
            m(i, k) = f;
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= f * m(k, j);
        }
    }
    return out;
}

Matrix lu_solve(const LuDecomposition& lu, const Matrix& b) {
    const Matrix& m = lu.lu;
    const std::size_t n = m.rows();
    if (b.rows() != n) throw DimensionError("lu_solve: rhs " + shape_string(b) + " for " + shape_string(m));
    if (lu.min_pivot == 0.0) throw NumericError("lu_solve: singular matrix");
    const std::size_t nc = b.cols();
    Matrix x(n, nc);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < nc; ++c) x(i, c) = b(lu.perm[i], c);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < i; ++k) {
            const double f = m(i, k);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < nc; ++c) x(i, c) -= f * x(k, c);
        }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) {
            const double f = m(ii, k);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < nc; ++c) x(ii, c) -= f * x(k, c);
        }
        const double inv = 1.0 / m(ii, ii);
        for (std::size_t c = 0; c < nc; ++c) x(ii, c) *= inv;
    }
    return x;
}

Matrix solve(const Matrix& a, const Matrix& b) { return lu_solve(lu_decompose(a), b); }

Matrix inverse(const Matrix& a) { return solve(a, identity_like(a)); }

double determinant(const Matrix& a) {
    const auto lu = lu_decompose(a);
    double d = lu.sign;
    for (std::size_t i = 0; i < a.rows(); ++i) d *= lu.lu(i, i);
    return d;
}

Matrix cholesky(const Matrix& a) {
    require_square(a, "cholesky");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) throw NumericError("cholesky: matrix not positive definite");
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

namespace {

// One-sided Jacobi on the columns of a (M >= N).
SvdResult jacobi_svd_tall(Matrix a) {
    const std::size_t m = a.rows(), n = a.cols();
    Matrix v = Matrix::identity(n);
    for (int sweep = 0; sweep < 80; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double ap = a(i, p), aq = a(i, q);
                    alpha += ap * ap;
                    beta += aq * aq;
                    gamma += ap * aq;
                }
                if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double ap = a(i, p), aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += a(i, j) * a(i, j);
        norms[j] = std::sqrt(s);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SvdResult out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
    std::size_t next_basis = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.s[k] = norms[j];
        for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);

        std::vector<double> col(m);
        bool ok = false;
        if (norms[j] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) col[i] = a(i, j) / norms[j];
            ok = true;
        }
        // Re-orthogonalize against earlier columns; fall back to completing
        // the basis from unit vectors when the column carries no direction.
        for (int attempt = 0; attempt <= static_cast<int>(m) + 1; ++attempt) {
            if (!ok) {
                std::fill(col.begin(), col.end(), 0.0);
                col[next_basis++ % m] = 1.0;
            }
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < k; ++c) {
                    double d = 0.0;
                    for (std::size_t i = 0; i < m; ++i) d += out.u(i, c) * col[i];
                    for (std::size_t i = 0; i < m; ++i) col[i] -= d * out.u(i, c);
                }
            }
            double nn = 0.0;
            for (double x : col) nn += x * x;
            nn = std::sqrt(nn);
            if (nn > 0.5) {
                for (std::size_t i = 0; i < m; ++i) out.u(i, k) = col[i] / nn;
                break;
            }
            ok = false;
        }
    }
    return out;
}

}  // namespace

SvdResult thin_svd(const Matrix& x) {
    if (x.rows() == 0 || x.cols() == 0) throw DimensionError("thin_svd: empty matrix");
    require_finite(x, "thin_svd");
    if (x.rows() >= x.cols()) return jacobi_svd_tall(x);
    SvdResult t = jacobi_svd_tall(x.transpose());
    return SvdResult{std::move(t.v), std::move(t.s), std::move(t.u)};
}

Matrix pinv(const Matrix& a, double rcond) {
    const SvdResult svd = thin_svd(a);
    const double cutoff = rcond * (svd.s.empty() ? 0.0 : svd.s.front());
    Matrix vs = svd.v;
    for (std::size_t k = 0; k < svd.s.size(); ++k) {
        const double inv = svd.s[k] > cutoff && svd.s[k] > 0.0 ? 1.0 / svd.s[k] : 0.0;
        for (std::size_t i = 0; i < vs.rows(); ++i) vs(i, k) *= inv;
    }
    return matmul_nt(vs, svd.u);
}

namespace {

void balance(Matrix& a) {
    constexpr double radix = 2.0;
    constexpr double sqrdx = radix * radix;
    const std::size_t n = a.rows();
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
}

// Reduction to upper Hessenberg form by stabilized elementary similarity
// transformations.
void hessenberg(Matrix& a) {
    const std::size_t n = a.rows();
    for (std::size_t m = 1; m + 1 < n; ++m) {
        double x = 0.0;
        std::size_t piv = m;
        for (std::size_t j = m; j < n; ++j) {
            if (std::abs(a(j, m - 1)) > std::abs(x)) {
                x = a(j, m - 1);
                piv = j;
            }
        }
        if (piv != m) {
            for (std::size_t j = m - 1; j < n; ++j) std::swap(a(piv, j), a(m, j));
            for (std::size_t j = 0; j < n; ++j) std::swap(a(j, piv), a(j, m));
        }
        if (x == 0.0) continue;
        for (std::size_t i = m + 1; i < n; ++i) {
            double y = a(i, m - 1);
            if (y == 0.0) continue;
            y /= x;
            a(i, m - 1) = 0.0;
            for (std::size_t j = m; j < n; ++j) a(i, j) -= y * a(m, j);
            for (std::size_t j = 0; j < n; ++j) a(j, m) += y * a(j, i);
        }
    }
}

// Francis double-shift QR on an upper Hessenberg matrix. Indices inside are
// 1-based to keep the shift and bulge-chasing bookkeeping readable.
ComplexSpectrum hessenberg_qr(Matrix& h) {
    const int n = static_cast<int>(h.rows());
    auto a = [&](int i, int j) -> double& { return h(i - 1, j - 1); };
    std::vector<double> wr(n + 1), wi(n + 1);

    double anorm = 0.0;
    for (int i = 1; i <= n; ++i)
        for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a(i, j));

    const std::size_t budget = 30 * static_cast<std::size_t>(std::max(n, 1));
    std::size_t total = 0;
    int nn = n;
    double t = 0.0;
    while (nn >= 1) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 2; --l) {
                double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(a(l, l - 1)) <= kEps * s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            if (l < 1) l = 1;
            double x = a(nn, nn);
            if (l == nn) {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                --nn;
            } else {
                double y = a(nn - 1, nn - 1);
                double w = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    const double p = 0.5 * (y - x);
                    const double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + std::copysign(z, p);
                        wr[nn - 1] = wr[nn] = x + z;
                        if (z != 0.0) wr[nn] = x - w / z;
                        wi[nn - 1] = wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if (total >= budget) throw ConvergenceError("eigenvalues: QR iteration did not converge", total);
                    if (its > 0 && its % 10 == 0) {
                        // Exceptional shift to break cycles.
                        t += x;
                        for (int i = 1; i <= nn; ++i) a(i, i) -= x;
                        const double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    ++total;
                    int m = nn - 2;
                    double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
                    for (; m >= l; --m) {
                        z = a(m, m);
                        r = x - z;
                        double s = y - z;
                        p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - r - s;
                        r = a(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
                        if (u <= kEps * v) break;
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        a(i, i - 2) = 0.0;
                        if (i != m + 2) a(i, i - 3) = 0.0;
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = 0.0;
                            if (k != nn - 1) r = a(k + 2, k - 1);
                            if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        const double s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) a(k, k - 1) = -a(k, k - 1);
                        } else {
                            a(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for (int j = k; j <= nn; ++j) {
                            p = a(k, j) + q * a(k + 1, j);
                            if (k != nn - 1) {
                                p += r * a(k + 2, j);
                                a(k + 2, j) -= p * z;
                            }
                            a(k + 1, j) -= p * y;
                            a(k, j) -= p * x;
                        }
                        const int mmin = nn < k + 3 ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) {
                            p = x * a(i, k) + y * a(i, k + 1);
                            if (k != nn - 1) {
                                p += z * a(i, k + 2);
                                a(i, k + 2) -= p * r;
                            }
                            a(i, k + 1) -= p * q;
                            a(i, k) -= p;
                        }
                    }
                }
            }
        } while (nn >= 1 && l < nn - 1);
    }

    ComplexSpectrum out;
    out.reserve(n);
    for (int i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
    return out;
}

void sort_spectrum(ComplexSpectrum& s) {
    std::sort(s.begin(), s.end(), [](const Complex& x, const Complex& y) {
        if (x.real() != y.real()) return x.real() > y.real();
        return x.imag() > y.imag();
    });
}

}  // namespace

ComplexSpectrum eigenvalues(const Matrix& a) {
    require_square(a, "eigenvalues");
    require_finite(a, "eigenvalues");
    if (a.rows() == 0) return {};
    Matrix h = a;
    balance(h);
    hessenberg(h);
    // Work at unit scale and flush entries far below roundoff: they do not
    // move the eigenvalues beyond the backward error, while tiny or subnormal
    // values otherwise underflow inside the double-shift sweep.
    const double norm = h.max_abs();
    if (norm == 0.0) return ComplexSpectrum(a.rows(), Complex(0.0, 0.0));
    for (double& v : h.values()) {
        v /= norm;
        if (std::abs(v) < 1e-30) v = 0.0;
    }
    ComplexSpectrum out = hessenberg_qr(h);
    for (auto& l : out) l *= norm;
    sort_spectrum(out);
    return out;
}

namespace {

using CVec = std::vector<Complex>;

// Solves (a - shift I) x = b in complex arithmetic with partial pivoting.
// Zero pivots are replaced by a tiny value, which is what inverse iteration wants.
struct ComplexLu {
    std::vector<Complex> m;
    std::vector<std::size_t> perm;
    std::size_t n = 0;

    ComplexLu(const Matrix& a, Complex shift, double tiny) : m(a.size()), perm(a.rows()), n(a.rows()) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m[i * n + j] = a(i, j) - (i == j ? shift : Complex{});
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t piv = k;
            for (std::size_t i = k + 1; i < n; ++i)
                if (std::abs(m[i * n + k]) > std::abs(m[piv * n + k])) piv = i;
            if (piv != k) {
                for (std::size_t j = 0; j < n; ++j) std::swap(m[k * n + j], m[piv * n + j]);
                std::swap(perm[k], perm[piv]);
            }
            if (std::abs(m[k * n + k]) < tiny) m[k * n + k] = tiny;
            for (std::size_t i = k + 1; i < n; ++i) {
                const Complex f = m[i * n + k] / m[k * n + k];
                m[i * n + k] = f;
                for (std::size_t j = k + 1; j < n; ++j) m[i * n + j] -= f * m[k * n + j];
            }
        }
    }

    CVec solve(const CVec& b) const {
        CVec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = b[perm[i]];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < i; ++k) x[i] -= m[i * n + k] * x[k];
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t k = i + 1; k < n; ++k) x[i] -= m[i * n + k] * x[k];
            x[i] /= m[i * n + i];
        }
        return x;
    }
};

double cnorm(const CVec& v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

}  // namespace

std::vector<CVec> eigenvectors(const Matrix& a, const ComplexSpectrum& lambda) {
    require_square(a, "eigenvectors");
    const std::size_t n = a.rows();
    const double scale_a = std::max(a.norm1(), 1.0);
    std::vector<CVec> out;
    out.reserve(lambda.size());
    for (std::size_t e = 0; e < lambda.size(); ++e) {
        const Complex lam = lambda[e];
        const ComplexLu lu(a, lam, kEps * scale_a);
        CVec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = Complex(1.0 + 0.1 * static_cast<double>(i), 0.05 * static_cast<double>(i % 3));
        for (int it = 0; it < 4; ++it) {
            // Deflate directions already assigned to (numerically) the same eigenvalue.
            for (std::size_t p = 0; p < e; ++p) {
                if (std::abs(lambda[p] - lam) > 1e-8 * scale_a) continue;
                Complex d{};
                for (std::size_t i = 0; i < n; ++i) d += std::conj(out[p][i]) * x[i];
                for (std::size_t i = 0; i < n; ++i) x[i] -= d * out[p][i];
            }
            x = lu.solve(x);
            const double nn = cnorm(x);
            if (!(nn > 0.0) || !std::isfinite(nn)) throw NumericError("eigenvectors: inverse iteration failed");
            for (auto& z : x) z /= nn;
        }
        std::size_t big = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(x[i]) > std::abs(x[big]) * (1.0 + 1e-12)) big = i;
        const Complex phase = std::abs(x[big]) > 0.0 ? std::conj(x[big]) / std::abs(x[big]) : Complex(1.0);
        for (auto& z : x) z *= phase;
        out.push_back(std::move(x));
    }
    return out;
}

int expm_scaling_exponent(double norm1) {
    if (!std::isfinite(norm1)) throw DomainError("matexp: non-finite norm");
    if (norm1 <= kTheta13) return 0;
    return std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta13))));
}

Matrix matexp(const Matrix& a, double t) {
    require_square(a, "matexp");
    require_finite(a, "matexp");
    if (!std::isfinite(t)) throw DomainError("matexp: non-finite time");
    if (t == 0.0 || a.rows() == 0) return Matrix::identity(a.rows());
    const Matrix ta = scale(a, t);
    return expm_pade13(ta, expm_scaling_exponent(ta.norm1()));
}

Matrix kron_sum(const Matrix& a, const Matrix& b) {
    require_square(a, "kron_sum");
    require_square(b, "kron_sum");
    if (a.rows() != b.rows()) throw DimensionError("kron_sum: " + shape_string(a) + " vs " + shape_string(b));
    const Matrix eye = identity_like(a);
    return kron(a, eye) + kron(eye, b);
}

Matrix symmetrize(const Matrix& a) {
    require_square(a, "symmetrize");
    Matrix s = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) s(i, j) = s(j, i) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

namespace {

void check_ou_inputs(const Matrix& a, const Matrix& lam, double t) {
    require_square(a, "ou_covariance");
    require_same_shape(a, lam, "ou_covariance");
    require_finite(a, "ou_covariance");
    require_finite(lam, "ou_covariance");
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("ou_covariance: time must be finite and nonnegative");
}

Matrix ou_integrand(const Matrix& a, const Matrix& lam, double s) {
    const Matrix e = matexp(a, s);
    return matmul_nt(matmul(e, lam), e);
}

Matrix simpson(double lo, double hi, const Matrix& flo, const Matrix& fmid, const Matrix& fhi) {
    return scale(flo + 4.0 * fmid + fhi, (hi - lo) / 6.0);
}

Matrix adaptive_simpson(const Matrix& a, const Matrix& lam, double lo, double hi, const Matrix& flo,
                        const Matrix& fmid, const Matrix& fhi, const Matrix& whole, double tol, int depth) {
    const double mid = 0.5 * (lo + hi);
    const Matrix fl = ou_integrand(a, lam, 0.5 * (lo + mid));
    const Matrix fr = ou_integrand(a, lam, 0.5 * (mid + hi));
    const Matrix left = simpson(lo, mid, flo, fl, fmid);
    const Matrix right = simpson(mid, hi, fmid, fr, fhi);
    const Matrix delta = left + right - whole;
    if (depth <= 0 || delta.max_abs() <= 15.0 * tol) return left + right + scale(delta, 1.0 / 15.0);
    return adaptive_simpson(a, lam, lo, mid, flo, fl, fmid, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(a, lam, mid, hi, fmid, fr, fhi, right, 0.5 * tol, depth - 1);
}

}  // namespace

Matrix ou_covariance_quadrature(const Matrix& a, const Matrix& lam, double t, double abs_tol) {
    check_ou_inputs(a, lam, t);
    if (t == 0.0) return Matrix(a.rows(), a.cols());
    const Matrix f0 = ou_integrand(a, lam, 0.0);
    const Matrix fm = ou_integrand(a, lam, 0.5 * t);
    const Matrix f1 = ou_integrand(a, lam, t);
    const Matrix whole = simpson(0.0, t, f0, fm, f1);
    return symmetrize(adaptive_simpson(a, lam, 0.0, t, f0, fm, f1, whole, abs_tol, 40));
}

Matrix ou_covariance(const Matrix& a, const Matrix& lam, double t) {
    check_ou_inputs(a, lam, t);
    const std::size_t d = a.rows();
    if (t == 0.0) return Matrix(d, d);
    const Matrix ks = kron_sum(a, a);
    const LuDecomposition lu = lu_decompose(ks);
    if (lu.max_pivot == 0.0 || lu.min_pivot <= 1e-10 * lu.max_pivot) return ou_covariance_quadrature(a, lam, t);
    // vec of the integrand is e^{s (A (+) A)} vec(lam); integrate in closed form.
    const Matrix growth = matexp(ks, t) - Matrix::identity(d * d);
    const Matrix x = lu_solve(lu, matmul(growth, vec(lam)));
    return symmetrize(unvec(x, d, d));
}

}  // namespace koopman
