#include "slrkit/graph.hpp"

#include <algorithm>
#include <stdexcept>

#include "slrkit/errors.hpp"
#include "slrkit/tensor.hpp"

namespace slrkit {

int conv_out_extent(int in, int kernel, int stride, Padding pad) {
  if (pad == Padding::Same) {
    return (in + stride - 1) / stride;
  }
  if (in < kernel) {
    throw ConfigError("valid convolution/pool: input extent " + std::to_string(in) +
                      " smaller than kernel " + std::to_string(kernel));
  }
  return (in - kernel) / stride + 1;
}

int same_pad_total(int in, int kernel, int stride) {
  const int out = (in + stride - 1) / stride;
  return std::max((out - 1) * stride + kernel - in, 0);
}

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const std::vector<int>& Graph::shape_of(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("graph node id");
  return nodes_[static_cast<std::size_t>(id)].out_shape;
}

int Graph::add_input(std::vector<int> shape) {
  Node n;
  n.kind = OpKind::Input;
  n.name = "input";
  n.out_shape = std::move(shape);
  return push(std::move(n));
}

int Graph::add_conv(int in, int filters, int kernel, int stride, Padding pad,
                    bool bias, const std::string& name, bool trainable) {
  return add_conv(in, filters, kernel, kernel, stride, stride, pad, bias, name, trainable);
}

int Graph::add_conv(int in, int filters, int kh, int kw, int sh, int sw,
                    Padding pad, bool bias, const std::string& name, bool trainable) {
  const auto& s = shape_of(in);
  if (s.size() != 3) throw ConfigError("conv input must be (h, w, c): " + name);
  Node n;
  n.kind = OpKind::Conv2D;
  n.name = name;
  n.inputs = {in};
  n.kernel_h = kh;
  n.kernel_w = kw;
  n.stride_h = sh;
  n.stride_w = sw;
  n.padding = pad;
  n.use_bias = bias;
  n.units = filters;
  n.out_shape = {conv_out_extent(s[0], kh, sh, pad), conv_out_extent(s[1], kw, sw, pad), filters};
  n.params.push_back({name + "/kernel", {kh, kw, s[2], filters}, trainable});
  if (bias) n.params.push_back({name + "/bias", {filters}, trainable});
  return push(std::move(n));
}

int Graph::add_depthwise_conv(int in, int kernel, int stride, Padding pad,
                              bool bias, const std::string& name) {
  const auto& s = shape_of(in);
  if (s.size() != 3) throw ConfigError("depthwise conv input must be (h, w, c): " + name);
  Node n;
  n.kind = OpKind::DepthwiseConv2D;
  n.name = name;
  n.inputs = {in};
  n.kernel_h = n.kernel_w = kernel;
  n.stride_h = n.stride_w = stride;
  n.padding = pad;
  n.use_bias = bias;
  n.out_shape = {conv_out_extent(s[0], kernel, stride, pad),
                 conv_out_extent(s[1], kernel, stride, pad), s[2]};
  n.params.push_back({name + "/depthwise_kernel", {kernel, kernel, s[2]}, false});
  if (bias) n.params.push_back({name + "/bias", {s[2]}, false});
  return push(std::move(n));
}

int Graph::add_separable_conv(int in, int filters, int kernel, int stride,
                              Padding pad, bool bias, const std::string& name) {
  const auto& s = shape_of(in);
  if (s.size() != 3) throw ConfigError("separable conv input must be (h, w, c): " + name);
  Node n;
  n.kind = OpKind::SeparableConv2D;
  n.name = name;
  n.inputs = {in};
  n.kernel_h = n.kernel_w = kernel;
  n.stride_h = n.stride_w = stride;
  n.padding = pad;
  n.use_bias = bias;
  n.units = filters;
  n.out_shape = {conv_out_extent(s[0], kernel, stride, pad),
                 conv_out_extent(s[1], kernel, stride, pad), filters};
  n.params.push_back({name + "/depthwise_kernel", {kernel, kernel, s[2]}, false});
  n.params.push_back({name + "/pointwise_kernel", {s[2], filters}, false});
  if (bias) n.params.push_back({name + "/bias", {filters}, false});
  return push(std::move(n));
}

int Graph::add_batchnorm(int in, const std::string& name, bool scale) {
  const auto& s = shape_of(in);
  const int c = s.back();
  Node n;
  n.kind = OpKind::BatchNorm;
  n.name = name;
  n.inputs = {in};
  n.out_shape = s;
  if (scale) n.params.push_back({name + "/gamma", {c}, false});
  n.params.push_back({name + "/beta", {c}, false});
  n.params.push_back({name + "/moving_mean", {c}, false});
  n.params.push_back({name + "/moving_variance", {c}, false});
  return push(std::move(n));
}

int Graph::add_relu(int in, const std::string& name) {
  Node n;
  n.kind = OpKind::ReLU;
  n.name = name;
  n.inputs = {in};
  n.out_shape = shape_of(in);
  return push(std::move(n));
}

int Graph::add_maxpool(int in, int kernel, int stride, Padding pad, const std::string& name) {
  const auto& s = shape_of(in);
  if (s.size() != 3) throw ConfigError("pool input must be (h, w, c): " + name);
  Node n;
  n.kind = OpKind::MaxPool2D;
  n.name = name;
  n.inputs = {in};
  n.kernel_h = n.kernel_w = kernel;
  n.stride_h = n.stride_w = stride;
  n.padding = pad;
  n.out_shape = {conv_out_extent(s[0], kernel, stride, pad),
                 conv_out_extent(s[1], kernel, stride, pad), s[2]};
  return push(std::move(n));
}

int Graph::add_avgpool(int in, int kernel, int stride, Padding pad, const std::string& name) {
  int id = add_maxpool(in, kernel, stride, pad, name);
  nodes_.back().kind = OpKind::AvgPool2D;
  return id;
}

int Graph::add_zeropad(int in, int top, int bottom, int left, int right,
                       const std::string& name) {
  const auto& s = shape_of(in);
  if (s.size() != 3) throw ConfigError("zeropad input must be (h, w, c): " + name);
  Node n;
  n.kind = OpKind::ZeroPad2D;
  n.name = name;
  n.inputs = {in};
  n.pad_top = top;
  n.pad_bottom = bottom;
  n.pad_left = left;
  n.pad_right = right;
  n.out_shape = {s[0] + top + bottom, s[1] + left + right, s[2]};
  return push(std::move(n));
}

int Graph::add_add(std::vector<int> ins, const std::string& name) {
  const auto& s0 = shape_of(ins.at(0));
  for (int i : ins) {
    if (shape_of(i) != s0) throw ConfigError("add: mismatched input shapes at " + name);
  }
  Node n;
  n.kind = OpKind::Add;
  n.name = name;
  n.inputs = std::move(ins);
  n.out_shape = s0;
  return push(std::move(n));
}

int Graph::add_concat(std::vector<int> ins, const std::string& name) {
  const auto& s0 = shape_of(ins.at(0));
  int channels = 0;
  for (int i : ins) {
    const auto& s = shape_of(i);
    if (s.size() != s0.size()) throw ConfigError("concat: rank mismatch at " + name);
    for (std::size_t d = 0; d + 1 < s.size(); ++d) {
      if (s[d] != s0[d]) throw ConfigError("concat: spatial mismatch at " + name);
    }
    channels += s.back();
  }
  Node n;
  n.kind = OpKind::Concat;
  n.name = name;
  n.inputs = std::move(ins);
  n.out_shape = s0;
  n.out_shape.back() = channels;
  return push(std::move(n));
}

int Graph::add_dense(int in, int units, bool trainable, const std::string& name) {
  const auto& s = shape_of(in);
  Node n;
  n.kind = OpKind::Dense;
  n.name = name;
  n.inputs = {in};
  n.units = units;
  n.out_shape = s;
  n.out_shape.back() = units;
  n.params.push_back({name + "/kernel", {s.back(), units}, trainable});
  n.params.push_back({name + "/bias", {units}, trainable});
  return push(std::move(n));
}

int Graph::add_dropout(int in, double rate, const std::string& name) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1): " + name);
  Node n;
  n.kind = OpKind::Dropout;
  n.name = name;
  n.inputs = {in};
  n.rate = rate;
  n.out_shape = shape_of(in);
  return push(std::move(n));
}

int Graph::add_flatten(int in, const std::string& name) {
  const auto& s = shape_of(in);
  Node n;
  n.kind = OpKind::Flatten;
  n.name = name;
  n.inputs = {in};
  n.out_shape = {static_cast<int>(shape_size(s))};
  return push(std::move(n));
}

int Graph::add_softmax(int in, const std::string& name) {
  Node n;
  n.kind = OpKind::Softmax;
  n.name = name;
  n.inputs = {in};
  n.out_shape = shape_of(in);
  return push(std::move(n));
}

std::int64_t Graph::trainable_param_count() const {
  std::int64_t total = 0;
  for (const Node& n : nodes_) {
    for (const ParamDesc& p : n.params) {
      if (p.trainable) total += static_cast<std::int64_t>(shape_size(p.shape));
    }
  }
  return total;
}

std::int64_t Graph::nontrainable_param_count() const {
  std::int64_t total = 0;
  for (const Node& n : nodes_) {
    for (const ParamDesc& p : n.params) {
      if (!p.trainable) total += static_cast<std::int64_t>(shape_size(p.shape));
    }
  }
  return total;
}

}  // namespace slrkit
