#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tnt/common/error.hpp"

namespace tnt {

/// Dense row-major n-d array with value semantics. The NN layers use rank-2
/// (N, F) and rank-4 (N, C, H, W) tensors; patch algebra uses rank-3 HWC.
template <typename T>
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  Tensor(std::initializer_list<std::size_t> shape, T fill = T(0))
      : Tensor(std::vector<std::size_t>(shape), fill) {}

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<std::size_t> shape, T v) { return Tensor(std::move(shape), v); }

  static Tensor from(std::vector<std::size_t> shape, std::vector<T> data) {
    Tensor t;
    if (count(shape) != data.size()) throw ShapeError("Tensor::from: data size does not match shape");
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  T& at3(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at3(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Reinterprets the same buffer with a new shape of equal element count.
  Tensor reshaped(std::vector<std::size_t> shape) const {
    if (count(shape) != numel()) throw ShapeError("reshape: element count mismatch");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  void reshape_inplace(std::vector<std::size_t> shape) {
    if (count(shape) != numel()) throw ShapeError("reshape: element count mismatch");
    shape_ = std::move(shape);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void set_zero() { fill(T(0)); }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  Tensor& axpy(T alpha, const Tensor& o) {
    require_same_shape(o, "axpy");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * o.data_[i];
    return *this;
  }

  T sum() const { return std::accumulate(data_.begin(), data_.end(), T(0)); }
  T mean() const { return data_.empty() ? T(0) : sum() / static_cast<T>(data_.size()); }
  T min() const { return *std::min_element(data_.begin(), data_.end()); }
  T max() const { return *std::max_element(data_.begin(), data_.end()); }

  T inf_norm() const {
    T m = T(0);
    for (auto v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    for (auto v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ')';
    return os.str();
  }

private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  void require_same_shape(const Tensor& o, const char* op) const {
    if (!same_shape(o))
      throw ShapeError(std::string("tensor ") + op + ": shape mismatch " + shape_str() + " vs " +
                       o.shape_str());
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

using TensorD = Tensor<double>;

}  // namespace tnt
