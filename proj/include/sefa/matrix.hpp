#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sefa/error.hpp"
#include "sefa/random.hpp"

namespace sefa {

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFinite,
                  std::string(what) + " entry " + std::to_string(i) + " is not finite");
    }
  }
}

}  // namespace detail

/// Dense real vector of 64-bit values. All entries are finite.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  explicit Vector(std::vector<double> data) : data_(std::move(data)) {
    detail::require_finite(data_, "vector");
  }
  Vector(std::initializer_list<double> values) : Vector(std::vector<double>(values)) {}

  static Vector unit(std::size_t dim, std::size_t index) {
    Vector v(dim);
    v[index] = 1.0;
    return v;
  }

  std::size_t dim() const noexcept { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& raw() const noexcept { return data_; }

  double dot(const Vector& other) const {
    if (other.dim() != dim()) {
      throw Error(ErrorCode::DimMismatch, "dot of dims " + std::to_string(dim()) + " and " +
                                              std::to_string(other.dim()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) sum += data_[i] * other.data_[i];
    return sum;
  }

  double norm() const { return std::sqrt(dot(*this)); }

  Vector normalized() const {
    const double n = norm();
    if (n == 0.0) throw Error(ErrorCode::InvalidArgument, "cannot normalize a zero vector");
    Vector out(*this);
    for (double& x : out.data_) x /= n;
    return out;
  }

  Vector& operator+=(const Vector& other) {
    check_same(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }
  Vector& operator-=(const Vector& other) {
    check_same(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
  }
  Vector& operator*=(double c) {
    for (double& x : data_) x *= c;
    return *this;
  }

  friend Vector operator+(Vector a, const Vector& b) { return a += b; }
  friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
  friend Vector operator*(double c, Vector a) { return a *= c; }
  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  void check_same(const Vector& other) const {
    if (other.dim() != dim()) {
      throw Error(ErrorCode::DimMismatch, "vector dims " + std::to_string(dim()) + " and " +
                                              std::to_string(other.dim()));
    }
  }

  std::vector<double> data_;
};

/// Dense row-major matrix of 64-bit values. All entries are finite and both
/// dimensions are positive.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    check_shape();
  }
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_shape();
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::BadShape, "data length " + std::to_string(data_.size()) +
                                           " does not equal " + std::to_string(rows_) + "x" +
                                           std::to_string(cols_));
    }
    detail::require_finite(data_, "matrix");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    check_shape();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw Error(ErrorCode::BadShape, "ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
    detail::require_finite(data_, "matrix");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  static Matrix uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& x : m.data_) x = rng.uniform(lo, hi);
    return m;
  }

  static Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& x : m.data_) x = rng.normal();
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vector column(std::size_t c) const {
    Vector v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
    return v;
  }
  void set_column(std::size_t c, const Vector& v) {
    if (v.dim() != rows_) throw Error(ErrorCode::DimMismatch, "column length mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  double frobenius_norm() const {
    double sum = 0.0;
    for (double x : data_) sum += x * x;
    return std::sqrt(sum);
  }

  Vector operator*(const Vector& x) const {
    if (x.dim() != cols_) {
      throw Error(ErrorCode::DimMismatch, "matrix with " + std::to_string(cols_) +
                                              " columns applied to vector of dim " +
                                              std::to_string(x.dim()));
    }
    Vector y(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* a = data_.data() + r * cols_;
      double sum = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) sum += a[c] * x[c];
      y[r] = sum;
    }
    return y;
  }

  /// Aᵀx without forming the transpose.
  Vector transpose_times(const Vector& x) const {
    if (x.dim() != rows_) {
      throw Error(ErrorCode::DimMismatch, "transpose of matrix with " + std::to_string(rows_) +
                                              " rows applied to vector of dim " +
                                              std::to_string(x.dim()));
    }
    Vector y(cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* a = data_.data() + r * cols_;
      const double xr = x[r];
      for (std::size_t c = 0; c < cols_; ++c) y[c] += a[c] * xr;
    }
    return y;
  }

  Matrix& operator*=(double c) {
    for (double& x : data_) x *= c;
    return *this;
  }
  Matrix& operator+=(const Matrix& other) {
    if (other.rows_ != rows_ || other.cols_ != cols_) {
      throw Error(ErrorCode::DimMismatch, "matrix sum of mismatched shapes");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }
  friend Matrix operator*(double c, Matrix m) { return m *= c; }
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void check_shape() const {
    if (rows_ == 0 || cols_ == 0) {
      throw Error(ErrorCode::BadShape, "matrix dimensions must be positive, got " +
                                           std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Product of two matrices; plain i-k-j loop.
inline Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::DimMismatch, "inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

}  // namespace sefa
