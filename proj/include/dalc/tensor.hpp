#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dalc/error.hpp"

namespace dalc {

// Dense row-major matrix with value semantics.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::kDimensionMismatch, "matrix payload does not match shape");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

// "DLC1" record: magic, u32 rows, u32 cols, rows*cols f32, all little-endian.
inline constexpr std::size_t kTensorHeaderBytes = 12;

std::vector<std::uint8_t> write_tensor_record(const MatrixF& m);
void append_tensor_record(const MatrixF& m, std::vector<std::uint8_t>& out);

// Parses one record from the front of `bytes`. When `consumed` is non-null the
// record's byte length is stored there and trailing bytes are allowed;
// otherwise the record must span `bytes` exactly.
MatrixF read_tensor_record(std::span<const std::uint8_t> bytes,
                           std::size_t* consumed = nullptr);

}  // namespace dalc
