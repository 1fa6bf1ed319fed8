#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace emo {

// Dense row-major matrix of doubles. The only tensor type in the engine:
// sequences are T x D, vectors are 1 x D.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix row_vector(std::span<const double> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void set_zero();
  void resize(std::size_t rows, std::size_t cols);
  bool all_finite() const;
  std::string shape_string() const;

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Horizontal concatenation of matrices with equal row counts.
Matrix hconcat(std::span<const Matrix* const> parts);
// Copies columns [begin, begin + width) into a new matrix.
Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t width);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace emo
