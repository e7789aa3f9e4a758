#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace semcom {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Most of the code treats tensors as
// [rows, cols] matrices; images are flattened to 256 columns.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // For rank-2 tensors; rank-1 tensors are treated as a single row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return data().subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const noexcept {
    return data().subspan(r * cols(), cols());
  }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  double item() const;
  void fill(double v) noexcept;
  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Selects rows [begin, begin + count) or an explicit index list.
Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t count);
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> indices);
Tensor hstack(const Tensor& a, const Tensor& b);
std::size_t argmax(std::span<const double> v) noexcept;

// C = A * B, C += A^T * B, C += A * B^T (all row-major, caller-sized).
void gemm(const Tensor& a, const Tensor& b, Tensor& c);
void gemm_at_b_acc(const Tensor& a, const Tensor& b, Tensor& c);
void gemm_a_bt_acc(const Tensor& a, const Tensor& b, Tensor& c);

}  // namespace semcom
