#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "slrkit/tensor.hpp"

namespace slrkit {

// Flat binary container of named tensors (checkpoint head weights, converted
// pretrained backbone weights). Little-endian, doubles.
void write_tensor_map(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::map<std::string, Tensor> read_tensor_map(const std::filesystem::path& path);

// Single zlib-compressed array (attribution maps).
void write_compressed_array(const std::filesystem::path& path, const Tensor& t);
Tensor read_compressed_array(const std::filesystem::path& path);

}  // namespace slrkit
