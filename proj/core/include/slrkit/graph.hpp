#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slrkit {

// Static layer graph with shape inference and parameter accounting.
// Node ids are topologically ordered by construction: a node may only
// reference earlier ids as inputs.

enum class OpKind {
  Input,
  Conv2D,
  DepthwiseConv2D,
  SeparableConv2D,
  BatchNorm,
  ReLU,
  MaxPool2D,
  AvgPool2D,
  ZeroPad2D,
  Add,
  Concat,
  Dense,
  Dropout,
  Flatten,
  Softmax,
};

enum class Padding { Valid, Same };

struct ParamDesc {
  std::string name;
  std::vector<int> shape;
  bool trainable = false;
};

struct Node {
  OpKind kind = OpKind::Input;
  std::string name;
  std::vector<int> inputs;

  int kernel_h = 0, kernel_w = 0;
  int stride_h = 1, stride_w = 1;
  Padding padding = Padding::Valid;
  int pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
  int units = 0;
  bool use_bias = true;
  double rate = 0.0;      // Dropout
  double epsilon = 1e-3;  // BatchNorm

  std::vector<ParamDesc> params;
  std::vector<int> out_shape;  // per-sample shape: (h, w, c) or (c)
};

class Graph {
 public:
  int add_input(std::vector<int> shape);
  int add_conv(int in, int filters, int kernel, int stride, Padding pad,
               bool bias, const std::string& name, bool trainable = false);
  int add_conv(int in, int filters, int kh, int kw, int sh, int sw, Padding pad,
               bool bias, const std::string& name, bool trainable = false);
  int add_depthwise_conv(int in, int kernel, int stride, Padding pad, bool bias,
                         const std::string& name);
  int add_separable_conv(int in, int filters, int kernel, int stride, Padding pad,
                         bool bias, const std::string& name);
  int add_batchnorm(int in, const std::string& name, bool scale = true);
  int add_relu(int in, const std::string& name);
  int add_maxpool(int in, int kernel, int stride, Padding pad, const std::string& name);
  int add_avgpool(int in, int kernel, int stride, Padding pad, const std::string& name);
  int add_zeropad(int in, int top, int bottom, int left, int right, const std::string& name);
  int add_add(std::vector<int> ins, const std::string& name);
  int add_concat(std::vector<int> ins, const std::string& name);
  int add_dense(int in, int units, bool trainable, const std::string& name);
  int add_dropout(int in, double rate, const std::string& name);
  int add_flatten(int in, const std::string& name);
  int add_softmax(int in, const std::string& name);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int output() const { return size() - 1; }

  std::int64_t trainable_param_count() const;
  std::int64_t nontrainable_param_count() const;

 private:
  int push(Node n);
  const std::vector<int>& shape_of(int id) const;

  std::vector<Node> nodes_;
};

// Output extent of a pooled/convolved axis.
int conv_out_extent(int in, int kernel, int stride, Padding pad);
// Total padding applied on an axis under Same semantics (split floor/ceil
// between the leading and trailing edge, extra at the trailing edge).
int same_pad_total(int in, int kernel, int stride);

}  // namespace slrkit
