#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace trajevent {

// Dense row-major tensor of 64-bit reals. Rank is 1 or 2 for everything the
// models need; conv kernels use rank 3.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape)
      : shape_(std::move(shape)), data_(numel_of(shape_), 0.0) {}
  Tensor(std::vector<size_t> shape, std::vector<double> data);
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t dim(size_t i) const { return shape_[i]; }
  size_t numel() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  // 2-D access
  double& at(size_t r, size_t c) { return data_[r * shape_[1] + c]; }
  double at(size_t r, size_t c) const { return data_[r * shape_[1] + c]; }

  // 3-D access (conv kernels: [out][in][tap])
  double& at(size_t i, size_t j, size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(size_t i, size_t j, size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  void fill(double v);

  static size_t numel_of(const std::vector<size_t>& shape);
  static std::string shape_str(const std::vector<size_t>& shape);
  std::string shape_str() const { return shape_str(shape_); }

 private:
  std::vector<size_t> shape_;
  std::vector<double> data_;
};

}  // namespace trajevent
