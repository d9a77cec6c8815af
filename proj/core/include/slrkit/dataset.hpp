#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slrkit/tensor.hpp"

namespace slrkit {

struct DatasetSample {
  std::filesystem::path path;
  int label = 0;
};

// Catalog of a class-per-subdirectory image corpus. Labels follow the
// lexicographic order of the class directory names; that order is the
// one-hot column order everywhere downstream.
struct DatasetIndex {
  std::filesystem::path root;
  std::vector<DatasetSample> samples;
  std::vector<std::string> class_names;
  int class_count() const { return static_cast<int>(class_names.size()); }
};

struct SplitRatios {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

// Disjoint stratified partition of a DatasetIndex.
struct SplitAssignment {
  std::vector<int> train, val, test;
  SplitRatios ratios;
  std::uint64_t seed = 0;
};

// Model-ready batch: images normalized to [0, 1], one-hot labels.
struct ImageBatch {
  Tensor data;           // (n, side, side, 3)
  Tensor labels_onehot;  // (n, K)
  int size() const { return data.empty() ? 0 : data.dim(0); }
};

DatasetIndex scan_dataset(const std::filesystem::path& root);

// Stratified largest-remainder split, shuffled per class by `seed`.
// Classes with fewer than 3 samples are rejected.
SplitAssignment split_dataset(const DatasetIndex& index, SplitRatios ratios,
                              std::uint64_t seed);

// One-hot encode integer labels into an (n, K) matrix.
Tensor encode_labels(const std::vector<int>& labels, int k);

// Elementwise /255; input values must already be in [0, 255].
Tensor normalize(const Tensor& batch);

// Loads, resizes and normalizes the samples selected by `which`.
ImageBatch load_image_batch(const DatasetIndex& index, const std::vector<int>& which,
                            int side);

// Deterministic synthetic corpus: every class is a bright horizontal band at
// a class-specific position in a class-specific channel over low noise, so
// classes are linearly separable by construction. Pixel values are integers
// in [0, 255] (lossless through PNG export).
struct SyntheticDataset {
  Tensor images;  // (n, side, side, 3), integer values in [0, 255]
  std::vector<int> labels;
  std::vector<std::string> class_names;
  int class_count() const { return static_cast<int>(class_names.size()); }
};

SyntheticDataset generate_synthetic(int k, int per_class, int side, std::uint64_t seed);

// Writes the class-per-subdirectory layout (PNG files) under root.
void export_dataset(const SyntheticDataset& ds, const std::filesystem::path& root);

// Split persistence: {seed, ratios, class_names, per-split relative paths}.
void write_split_json(const std::filesystem::path& path, const DatasetIndex& index,
                      const SplitAssignment& split);
// Rebuilds the index (from the recorded relative paths) and the assignment.
std::pair<DatasetIndex, SplitAssignment> read_split_json(
    const std::filesystem::path& path, const std::filesystem::path& dataset_root);

}  // namespace slrkit
