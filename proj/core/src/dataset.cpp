#include "slrkit/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "nlohmann/json.hpp"
#include "slrkit/errors.hpp"
#include "slrkit/image.hpp"
#include "slrkit/rng.hpp"

namespace fs = std::filesystem;

namespace slrkit {

namespace {

using nlohmann::json;

bool looks_like_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" ||
         ext == ".tif" || ext == ".tiff" || ext == ".webp";
}

// Largest-remainder apportionment of n into three buckets; guarantees the
// counts sum to n and each is within 1 of n * ratio.
std::array<int, 3> apportion(int n, const SplitRatios& r) {
  const double exact[3] = {n * r.train, n * r.val, n * r.test};
  std::array<int, 3> out{};
  double rem[3];
  int used = 0;
  for (int i = 0; i < 3; ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(exact[i]));
    rem[i] = exact[i] - out[static_cast<std::size_t>(i)];
    used += out[static_cast<std::size_t>(i)];
  }
  int left = n - used;
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; i < left; ++i) ++out[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  return out;
}

void check_ratios(const SplitRatios& r) {
  if (r.train <= 0 || r.val <= 0 || r.test <= 0) {
    throw ConfigError("split ratios must all be positive");
  }
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
}

}  // namespace

DatasetIndex scan_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw DataError("dataset root is not a directory: " + root.string());
  }
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  }
  if (class_dirs.empty()) {
    throw DataError("dataset root has no class subdirectories: " + root.string());
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  DatasetIndex index;
  index.root = root;
  index.class_names = class_dirs;
  for (int label = 0; label < static_cast<int>(class_dirs.size()); ++label) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(root / class_dirs[static_cast<std::size_t>(label)])) {
      if (e.is_regular_file() && looks_like_image(e.path())) files.push_back(e.path());
    }
    if (files.empty()) {
      throw DataError("class directory '" + class_dirs[static_cast<std::size_t>(label)] +
                      "' contains no images");
    }
    std::sort(files.begin(), files.end());
    for (auto& f : files) index.samples.push_back({std::move(f), label});
  }
  return index;
}

SplitAssignment split_dataset(const DatasetIndex& index, SplitRatios ratios,
                              std::uint64_t seed) {
  check_ratios(ratios);
  SplitAssignment split;
  split.ratios = ratios;
  split.seed = seed;

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(index.class_count()));
  for (int i = 0; i < static_cast<int>(index.samples.size()); ++i) {
    by_class[static_cast<std::size_t>(index.samples[static_cast<std::size_t>(i)].label)].push_back(i);
  }
  for (int k = 0; k < index.class_count(); ++k) {
    auto& members = by_class[static_cast<std::size_t>(k)];
    if (static_cast<int>(members.size()) < 3) {
      throw DataError("class '" + index.class_names[static_cast<std::size_t>(k)] +
                      "' has fewer than 3 samples and cannot populate all splits");
    }
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(k));
    rng.shuffle(members);
    auto counts = apportion(static_cast<int>(members.size()), ratios);
    // Rounding may leave a split empty for very small classes; steal one
    // sample from the largest bucket so the partition stays total.
    for (int s = 0; s < 3; ++s) {
      if (counts[static_cast<std::size_t>(s)] == 0) {
        int big = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        --counts[static_cast<std::size_t>(big)];
        ++counts[static_cast<std::size_t>(s)];
      }
    }
    int pos = 0;
    for (int i = 0; i < counts[0]; ++i) split.train.push_back(members[static_cast<std::size_t>(pos++)]);
    for (int i = 0; i < counts[1]; ++i) split.val.push_back(members[static_cast<std::size_t>(pos++)]);
    for (int i = 0; i < counts[2]; ++i) split.test.push_back(members[static_cast<std::size_t>(pos++)]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Tensor encode_labels(const std::vector<int>& labels, int k) {
  if (k < 1) throw ConfigError("class count must be >= 1");
  Tensor out({static_cast<int>(labels.size()), k});
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) {
      throw DataError("label " + std::to_string(y) + " is outside [0, " + std::to_string(k) + ")");
    }
    out.at(i, y) = 1.0;
  }
  return out;
}

Tensor normalize(const Tensor& batch) {
  Tensor out = batch;
  for (double& v : out.values()) {
    if (v < 0.0 || v > 255.0) {
      throw DataError("pixel value " + std::to_string(v) + " is outside [0, 255]");
    }
    v /= 255.0;
  }
  return out;
}

ImageBatch load_image_batch(const DatasetIndex& index, const std::vector<int>& which,
                            int side) {
  ImageBatch batch;
  batch.data = Tensor({static_cast<int>(which.size()), side, side, 3});
  std::vector<int> labels(which.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(which.size()); ++i) {
    const auto& sample = index.samples[static_cast<std::size_t>(which[static_cast<std::size_t>(i)])];
    Tensor img = load_and_resize(sample.path, side);
    std::copy(img.values().begin(), img.values().end(),
              batch.data.values().begin() + static_cast<std::ptrdiff_t>(i) * img.size());
    labels[static_cast<std::size_t>(i)] = sample.label;
  }
  batch.data = normalize(batch.data);
  batch.labels_onehot = encode_labels(labels, index.class_count());
  return batch;
}

SyntheticDataset generate_synthetic(int k, int per_class, int side, std::uint64_t seed) {
  if (k < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
  if (per_class < 3) throw ConfigError("synthetic dataset needs at least 3 samples per class");
  SyntheticDataset ds;
  const int n = k * per_class;
  ds.images = Tensor({n, side, side, 3});
  ds.labels.resize(static_cast<std::size_t>(n));
  for (int c = 0; c < k; ++c) ds.class_names.push_back("class_" + std::to_string(c));

  for (int c = 0; c < k; ++c) {
    const int band_lo = c * side / k;
    const int band_hi = (c + 1) * side / k;
    const int chan = c % 3;
    for (int i = 0; i < per_class; ++i) {
      const int idx = c * per_class + i;
      ds.labels[static_cast<std::size_t>(idx)] = c;
      Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i));
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          for (int ch = 0; ch < 3; ++ch) {
            ds.images.at(idx, y, x, ch) = static_cast<double>(rng.next_below(40));
          }
        }
      }
      for (int y = band_lo; y < band_hi; ++y) {
        for (int x = 0; x < side; ++x) {
          ds.images.at(idx, y, x, chan) = static_cast<double>(200 + rng.next_below(56));
        }
      }
    }
  }
  return ds;
}

void export_dataset(const SyntheticDataset& ds, const fs::path& root) {
  const int side = ds.images.dim(1);
  const std::size_t per_image = static_cast<std::size_t>(side) * side * 3;
  std::vector<int> counter(ds.class_names.size(), 0);
  for (const auto& name : ds.class_names) {
    std::error_code ec;
    fs::create_directories(root / name, ec);
    if (ec) throw IoError("cannot create directory " + (root / name).string());
  }
  for (int i = 0; i < ds.images.dim(0); ++i) {
    const int label = ds.labels[static_cast<std::size_t>(i)];
    Tensor img = Tensor::from_data(
        {side, side, 3},
        std::vector<double>(ds.images.values().begin() + static_cast<std::ptrdiff_t>(i) * static_cast<std::ptrdiff_t>(per_image),
                            ds.images.values().begin() + static_cast<std::ptrdiff_t>(i + 1) * static_cast<std::ptrdiff_t>(per_image)));
    char name[32];
    std::snprintf(name, sizeof name, "img_%05d.png",
                  counter[static_cast<std::size_t>(label)]++);
    write_png(root / ds.class_names[static_cast<std::size_t>(label)] / name, img);
  }
}

void write_split_json(const fs::path& path, const DatasetIndex& index,
                      const SplitAssignment& split) {
  auto rel_paths = [&](const std::vector<int>& which) {
    std::vector<std::string> out;
    out.reserve(which.size());
    for (int i : which) {
      out.push_back(
          fs::relative(index.samples[static_cast<std::size_t>(i)].path, index.root)
              .generic_string());
    }
    return out;
  };
  json j{{"seed", split.seed},
         {"ratios", {split.ratios.train, split.ratios.val, split.ratios.test}},
         {"class_names", index.class_names},
         {"train", rel_paths(split.train)},
         {"val", rel_paths(split.val)},
         {"test", rel_paths(split.test)}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write split file " + path.string());
  os << j.dump(2) << '\n';
}

std::pair<DatasetIndex, SplitAssignment> read_split_json(const fs::path& path,
                                                         const fs::path& dataset_root) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read split file " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError("malformed split file " + path.string() + ": " + e.what());
  }

  DatasetIndex index;
  index.root = dataset_root;
  index.class_names = j.at("class_names").get<std::vector<std::string>>();
  std::map<std::string, int> label_of;
  for (int k = 0; k < index.class_count(); ++k) {
    label_of[index.class_names[static_cast<std::size_t>(k)]] = k;
  }

  SplitAssignment split;
  split.seed = j.at("seed").get<std::uint64_t>();
  const auto r = j.at("ratios").get<std::vector<double>>();
  if (r.size() != 3) throw DataError("split file must record exactly 3 ratios");
  split.ratios = {r[0], r[1], r[2]};

  auto take = [&](const char* key, std::vector<int>& out) {
    for (const auto& rel : j.at(key).get<std::vector<std::string>>()) {
      const fs::path p = dataset_root / fs::path(rel);
      const std::string cls = fs::path(rel).begin()->string();
      auto it = label_of.find(cls);
      if (it == label_of.end()) {
        throw DataError("split file references unknown class '" + cls + "'");
      }
      out.push_back(static_cast<int>(index.samples.size()));
      index.samples.push_back({p, it->second});
    }
  };
  take("train", split.train);
  take("val", split.val);
  take("test", split.test);
  return {index, split};
}

}  // namespace slrkit
