#pragma once

#include <cstdint>
#include <string>

#include "slrkit/graph.hpp"

namespace slrkit {

// `Tiny` is the desk-scale stand-in: a small convolutional feature extractor
// with seeded random frozen weights, so the full pipeline runs without
// pretrained ImageNet weights. The paper-scale backbones require a weights
// file (see ModelHandle / checkpoint docs).
enum class Architecture { Tiny, ResNet50, InceptionV3, Xception, VGG16 };

Architecture parse_architecture(const std::string& name);
std::string to_string(Architecture arch);

struct BackboneSpec {
  Architecture architecture = Architecture::Tiny;
  int input_side = 75;
  std::string weights_path;   // pretrained weights for the ImageNet backbones
  std::uint64_t seed = 0;     // frozen random weights for Tiny
};

// Feature-extractor graph from an (side, side, 3) input to the backbone's
// final feature map. Every parameter is non-trainable.
Graph build_backbone_graph(Architecture arch, int side);

}  // namespace slrkit
