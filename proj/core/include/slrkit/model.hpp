#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "slrkit/backbones.hpp"
#include "slrkit/graph.hpp"
#include "slrkit/graph_exec.hpp"
#include "slrkit/tensor.hpp"

namespace slrkit {

// The fixed 8-layer classification head:
//   Dense(512, relu) applied position-wise over the backbone feature map,
//   Dropout, Flatten, Dense(256, relu), Dropout, Dense(128, relu), Dropout,
//   Dense(K, softmax).
struct HeadSpec {
  int dense1 = 512;
  int dense2 = 256;
  int dense3 = 128;
  int classes = 10;
  double dropout_rate = 0.5;
};

struct ModelHandle {
  Graph graph;
  ParamStore params;
  BackboneSpec backbone;
  HeadSpec head;
  std::vector<std::string> class_names;
  std::uint64_t head_seed = 0;

  int input_node = 0;
  int feature_node = 0;  // backbone feature map
  int logits_node = 0;   // last dense, pre-softmax
  int softmax_node = 0;  // model output
  bool backbone_weights_loaded = false;

  std::vector<int> feature_shape() const { return graph.node(feature_node).out_shape; }
};

// Assembles backbone + head. A Tiny backbone materializes frozen random
// weights from spec.seed. An ImageNet backbone loads spec.weights_path when
// set; when the path is set but unreadable this throws IoError (weights are
// never silently randomized). With no path the handle is
// accounting-only: parameter counts and shapes work, forward passes do not.
ModelHandle assemble_model(const BackboneSpec& backbone, const HeadSpec& head,
                           std::uint64_t head_seed,
                           std::vector<std::string> class_names = {});

// Throws IoError unless the handle can run forward passes.
void require_backbone_weights(const ModelHandle& model);

// (trainable, nontrainable) exact counts.
std::pair<std::int64_t, std::int64_t> count_parameters(const ModelHandle& model);

// Inference-mode forward: (n, side, side, 3) -> class probabilities (n, K).
Tensor predict(const ModelHandle& model, const Tensor& batch);

// Backbone forward only: (n, side, side, 3) -> (n, h, w, c).
Tensor extract_features(const ModelHandle& model, const Tensor& batch);

// Checkpoint directory: model.json (specs + class names) and
// head_weights.bin. Tiny backbone weights are reconstructed from the seed;
// ImageNet backbones reload from the recorded weights path.
void save_checkpoint(const ModelHandle& model, const std::filesystem::path& dir);
ModelHandle load_checkpoint(const std::filesystem::path& dir);

}  // namespace slrkit
