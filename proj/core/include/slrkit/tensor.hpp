#pragma once

#include <cstddef>
#include <vector>

namespace slrkit {

// Dense row-major tensor of doubles, rank 1..4. Image batches are laid out
// (n, h, w, c); feature batches (n, c).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data);

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // (n, h, w, c) indexing.
  double& at(int n, int h, int w, int c) {
    return data_[idx4(n, h, w, c)];
  }
  double at(int n, int h, int w, int c) const {
    return data_[idx4(n, h, w, c)];
  }
  // (n, c) indexing.
  double& at(int n, int c) { return data_[static_cast<std::size_t>(n) * shape_[1] + c]; }
  double at(int n, int c) const { return data_[static_cast<std::size_t>(n) * shape_[1] + c]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Shape with the leading (batch) dimension replaced.
  Tensor slice_batch(int first, int count) const;

 private:
  std::size_t idx4(int n, int h, int w, int c) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + h) * shape_[2] + w) * shape_[3] + c;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const std::vector<int>& shape);

}  // namespace slrkit
