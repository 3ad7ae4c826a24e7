#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace armcast {

/// 64-byte aligned allocator. Keeping every buffer at one alignment keeps
/// Eigen's kernel dispatch, and therefore results, bit-identical across
/// allocations.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

/// Dense row-major matrix of doubles. The workhorse container for features,
/// targets, weights and activations throughout the library.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values)
      : rows_(rows), cols_(cols), data_(values.begin(), values.end()) {
    if (data_.size() != rows * cols)
      throw std::invalid_argument("Matrix: initializer size mismatch");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  using EigenMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstEigenMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  EigenMap map() {
    return EigenMap(data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  }
  ConstEigenMap map() const {
    return ConstEigenMap(data_.data(), static_cast<Eigen::Index>(rows_),
                         static_cast<Eigen::Index>(cols_));
  }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    t.map() = map().transpose();
    return t;
  }

  Matrix row(std::size_t r) const {
    Matrix out(1, cols_);
    for (std::size_t c = 0; c < cols_; ++c) out(0, c) = (*this)(r, c);
    return out;
  }

  /// Columns [c0, c1) as a new matrix.
  Matrix col_block(std::size_t c0, std::size_t c1) const {
    if (c1 > cols_ || c0 > c1) throw std::invalid_argument("Matrix::col_block: bad range");
    Matrix out(rows_, c1 - c0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = c0; c < c1; ++c) out(r, c - c0) = (*this)(r, c);
    return out;
  }

  void set_col_block(std::size_t c0, const Matrix& block) {
    if (block.rows_ != rows_ || c0 + block.cols_ > cols_)
      throw std::invalid_argument("Matrix::set_col_block: bad shape");
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < block.cols_; ++c) (*this)(r, c0 + c) = block(r, c);
  }

  Matrix& operator+=(const Matrix& o) {
    check_shape(o, "operator+=");
    map() += o.map();
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    check_shape(o, "operator-=");
    map() -= o.map();
    return *this;
  }
  Matrix& operator*=(double s) {
    map() *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  double frobenius_norm() const { return map().norm(); }

  double sum() const { return map().sum(); }

  Matrix hadamard(const Matrix& o) const {
    check_shape(o, "hadamard");
    Matrix out(rows_, cols_);
    out.map() = map().cwiseProduct(o.map());
    return out;
  }

 private:
  void check_shape(const Matrix& o, const char* op) const {
    if (!same_shape(o))
      throw std::invalid_argument(std::string("Matrix::") + op + ": shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double, AlignedAllocator<double>> data_;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  c.map().noalias() = a.map() * b.map();
  return c;
}

inline Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

}  // namespace armcast
