#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace koopman {

// Dense row-major real matrix. Row vectors (1 x n) are the state convention
// throughout: observables evolve by right multiplication, phi(t) = phi(0) e^{tK}.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);
    static Matrix row_vector(std::span<const double> v);
    static Matrix column_vector(std::span<const double> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::vector<double> column(std::size_t c) const;

    Matrix transpose() const;
    Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
    void set_block(std::size_t r0, std::size_t c0, const Matrix& b);
    Matrix rows_subset(std::span<const std::size_t> idx) const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    bool all_finite() const noexcept;
    double trace() const;
    double frobenius_norm() const;
    double norm1() const;  // max absolute column sum
    double max_abs() const;
    double sum() const;

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);
Matrix operator-(Matrix a);

// Named kernels. The same names exist for autodiff variables so that
// algorithms like the Pade exponential can be written once for both.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a b^T
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix identity_like(const Matrix& a);

Matrix vstack(std::span<const Matrix> parts);
Matrix hstack(std::span<const Matrix> parts);

// Column-stacking vectorization; vec(A X B) = (B^T kron A) vec(X).
Matrix vec(const Matrix& a);
Matrix unvec(const Matrix& v, std::size_t rows, std::size_t cols);
Matrix kron(const Matrix& a, const Matrix& b);

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);
void require_square(const Matrix& a, const char* what);
void require_finite(const Matrix& a, const char* what);
std::string shape_string(const Matrix& a);

}  // namespace koopman
