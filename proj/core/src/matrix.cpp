#include "koopman/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "koopman/errors.hpp"

namespace koopman {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::row_vector(std::span<const double> v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.data());
    return m;
}

Matrix Matrix::column_vector(std::span<const double> v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data());
    return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw DimensionError("block out of range");
    Matrix b(nr, nc);
    for (std::size_t r = 0; r < nr; ++r)
        std::copy_n(data_.data() + (r0 + r) * cols_ + c0, nc, b.data() + r * nc);
    return b;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
    if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) throw DimensionError("set_block out of range");
    for (std::size_t r = 0; r < b.rows(); ++r)
        std::copy_n(b.data() + r * b.cols(), b.cols(), data_.data() + (r0 + r) * cols_ + c0);
}

Matrix Matrix::rows_subset(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= rows_) throw DimensionError("row index out of range");
        std::copy_n(data_.data() + idx[i] * cols_, cols_, out.data() + i * cols_);
    }
    return out;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    require_same_shape(*this, o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    require_same_shape(*this, o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double Matrix::trace() const {
    require_square(*this, "trace");
    double t = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
    return t;
}

double Matrix::frobenius_norm() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
}

double Matrix::norm1() const {
    double best = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) s += std::abs((*this)(r, c));
        best = std::max(best, s);
    }
    return best;
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

double Matrix::sum() const {
    double s = 0.0;
    for (double x : data_) s += x;
    return s;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }
Matrix operator-(Matrix a) { return a *= -1.0; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul " + shape_string(a) + " * " + shape_string(b));
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Matrix c(n, m);
    const double* __restrict pa = a.data();
    const double* __restrict pb = b.data();
    double* __restrict pc = c.data();
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = pc + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = pa[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = pb + p * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn " + shape_string(a) + "^T * " + shape_string(b));
    const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
    Matrix c(n, m);
    const double* __restrict pa = a.data();
    const double* __restrict pb = b.data();
    double* __restrict pc = c.data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = pa + p * n;
        const double* brow = pb + p * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double api = arow[i];
            if (api == 0.0) continue;
            double* crow = pc + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += api * brow[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt " + shape_string(a) + " * " + shape_string(b) + "^T");
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    Matrix c(n, m);
    const double* __restrict pa = a.data();
    const double* __restrict pb = b.data();
    double* __restrict pc = c.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = pa + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const double* brow = pb + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            pc[i * m + j] = s;
        }
    }
    return c;
}

Matrix add(const Matrix& a, const Matrix& b) { return a + b; }
Matrix sub(const Matrix& a, const Matrix& b) { return a - b; }
Matrix scale(const Matrix& a, double s) { return s * a; }

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
    return c;
}

Matrix identity_like(const Matrix& a) {
    require_square(a, "identity_like");
    return Matrix::identity(a.rows());
}

Matrix vstack(std::span<const Matrix> parts) {
    if (parts.empty()) return {};
    std::size_t rows = 0;
    const std::size_t cols = parts.front().cols();
    for (const auto& p : parts) {
        if (p.cols() != cols) throw DimensionError("vstack column mismatch");
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::size_t r = 0;
    for (const auto& p : parts) {
        out.set_block(r, 0, p);
        r += p.rows();
    }
    return out;
}

Matrix hstack(std::span<const Matrix> parts) {
    if (parts.empty()) return {};
    std::size_t cols = 0;
    const std::size_t rows = parts.front().rows();
    for (const auto& p : parts) {
        if (p.rows() != rows) throw DimensionError("hstack row mismatch");
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::size_t c = 0;
    for (const auto& p : parts) {
        out.set_block(0, c, p);
        c += p.cols();
    }
    return out;
}

Matrix vec(const Matrix& a) {
    Matrix v(a.size(), 1);
    std::size_t k = 0;
    for (std::size_t c = 0; c < a.cols(); ++c)
        for (std::size_t r = 0; r < a.rows(); ++r) v[k++] = a(r, c);
    return v;
}

Matrix unvec(const Matrix& v, std::size_t rows, std::size_t cols) {
    if (v.size() != rows * cols) throw DimensionError("unvec size mismatch");
    Matrix a(rows, cols);
    std::size_t k = 0;
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows; ++r) a(r, c) = v[k++];
    return a;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            for (std::size_t p = 0; p < b.rows(); ++p)
                for (std::size_t q = 0; q < b.cols(); ++q)
                    k(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
        }
    return k;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(what) + ": shape " + shape_string(a) + " vs " + shape_string(b));
}

void require_square(const Matrix& a, const char* what) {
    if (!a.is_square()) throw DimensionError(std::string(what) + ": matrix " + shape_string(a) + " not square");
}

void require_finite(const Matrix& a, const char* what) {
    if (!a.all_finite()) throw DomainError(std::string(what) + ": non-finite entries");
}

std::string shape_string(const Matrix& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

}  // namespace koopman
