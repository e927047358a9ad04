#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mtalk::numerics {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);
  // Entries drawn uniformly from [-scale, scale].
  static Matrix uniform(std::size_t rows, std::size_t cols, double scale,
                        std::mt19937_64& rng);

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

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  // Bit-exact comparison (shape and every element).
  bool operator==(const Matrix& other) const = default;

  std::string shape_string() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Untracked kernels. The tracked ops in ops.hpp are built on these.
Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
Matrix row_softmax(const Matrix& x);
Matrix sigmoid(const Matrix& x);
Matrix gelu(const Matrix& x);
Matrix mean_rows(const Matrix& x, std::size_t begin, std::size_t end);
Matrix concat_rows(std::span<const Matrix> parts);
Matrix concat_cols(std::span<const Matrix> parts);
Matrix slice_rows(const Matrix& x, std::size_t begin, std::size_t end);
Matrix gather_rows(const Matrix& x, std::span<const std::size_t> indices);

double sigmoid(double x);
double gelu(double x);
double gelu_derivative(double x);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace mtalk::numerics
