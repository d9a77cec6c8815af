#include "slrkit/tensor.hpp"

#include <stdexcept>

namespace slrkit {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data) {
  if (shape_size(shape) != data.size()) {
    throw std::invalid_argument("tensor data size does not match shape");
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::slice_batch(int first, int count) const {
  std::vector<int> out_shape = shape_;
  out_shape[0] = count;
  const std::size_t per = size() / static_cast<std::size_t>(shape_[0]);
  Tensor out(out_shape);
  const std::size_t base = static_cast<std::size_t>(first) * per;
  for (std::size_t i = 0; i < per * static_cast<std::size_t>(count); ++i) {
    out.data_[i] = data_[base + i];
  }
  return out;
}

}  // namespace slrkit
