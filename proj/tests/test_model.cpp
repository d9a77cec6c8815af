#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "slrkit/errors.hpp"
#include "slrkit/model.hpp"
#include "slrkit/rng.hpp"

namespace fs = std::filesystem;
using namespace slrkit;

namespace {

ModelHandle tiny_model(int classes = 3, int side = 30, std::uint64_t backbone_seed = 7,
                       std::uint64_t head_seed = 1) {
  BackboneSpec b;
  b.architecture = Architecture::Tiny;
  b.input_side = side;
  b.seed = backbone_seed;
  HeadSpec h;
  h.classes = classes;
  return assemble_model(b, h, head_seed);
}

// Closed-form head parameter count over an (fh, fw, fc) feature map.
std::int64_t head_formula(int fh, int fw, int fc, int classes) {
  const std::int64_t d1 = static_cast<std::int64_t>(fc) * 512 + 512;
  const std::int64_t d2 = static_cast<std::int64_t>(fh) * fw * 512 * 256 + 256;
  const std::int64_t d3 = 256 * 128 + 128;
  const std::int64_t d4 = static_cast<std::int64_t>(128) * classes + classes;
  return d1 + d2 + d3 + d4;
}

ModelHandle counting_model(Architecture arch, int classes = 10) {
  BackboneSpec b;
  b.architecture = arch;
  b.input_side = 75;
  HeadSpec h;
  h.classes = classes;
  return assemble_model(b, h, 0);
}

Tensor random_batch(int n, int side, std::uint64_t seed) {
  Tensor x({n, side, side, 3});
  Rng rng(seed);
  for (double& v : x.values()) v = rng.next_double();
  return x;
}

}  // namespace

TEST_CASE("reference parameter counts at (75, 75, 3)") {
  struct Row {
    Architecture arch;
    std::int64_t trainable, nontrainable;
    int fh, fw, fc;
  };
  const Row rows[] = {
      {Architecture::ResNet50, 2263178, 23564800, 3, 3, 2048},
      {Architecture::InceptionV3, 1214602, 21802784, 1, 1, 2048},
      {Architecture::VGG16, 821386, 14714688, 2, 2, 512},
      // The reference table repeats the VGG-16 counts for Xception, which is
      // arithmetically impossible for a 3x3x2048 feature map; the derived
      // count is asserted instead.
      {Architecture::Xception, 2263178, 20861480, 3, 3, 2048},
  };
  for (const Row& r : rows) {
    const ModelHandle m = counting_model(r.arch);
    const auto [trainable, nontrainable] = count_parameters(m);
    CHECK(trainable == r.trainable);
    CHECK(nontrainable == r.nontrainable);
    const auto fs_ = m.feature_shape();
    CHECK(fs_ == std::vector<int>{r.fh, r.fw, r.fc});
    // Independent oracle: the head closed form over the measured feature map.
    CHECK(trainable == head_formula(fs_[0], fs_[1], fs_[2], 10));
  }
}

TEST_CASE("head arithmetic tracks the class count") {
  const ModelHandle ten = counting_model(Architecture::InceptionV3, 10);
  const ModelHandle two = counting_model(Architecture::InceptionV3, 2);
  const auto t10 = count_parameters(ten).first;
  const auto t2 = count_parameters(two).first;
  CHECK(t10 == 1214602);
  CHECK(t10 - t2 == (128 * 10 + 10) - (128 * 2 + 2));
}

TEST_CASE("unknown architecture is rejected") {
  CHECK_THROWS_AS(parse_architecture("mobilenetv2"), ConfigError);
  CHECK(parse_architecture("resnet50") == Architecture::ResNet50);
  CHECK(to_string(Architecture::Xception) == "xception");
}

TEST_CASE("imagenet backbones without weights refuse to run forward") {
  const ModelHandle m = counting_model(Architecture::VGG16);
  CHECK_FALSE(m.backbone_weights_loaded);
  CHECK_THROWS_AS(predict(m, random_batch(1, 75, 0)), IoError);
  BackboneSpec b;
  b.architecture = Architecture::VGG16;
  b.weights_path = "/nonexistent/weights.bin";
  CHECK_THROWS_AS(assemble_model(b, HeadSpec{}, 0), IoError);
}

TEST_CASE("softmax rows sum to 1 and inference is deterministic") {
  const ModelHandle m = tiny_model();
  const Tensor x = random_batch(4, 30, 5);
  const Tensor p1 = predict(m, x);
  const Tensor p2 = predict(m, x);
  CHECK(p1.values() == p2.values());  // exact agreement, dropout off
  for (int i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) {
      sum += p1.at(i, j);
      CHECK(p1.at(i, j) >= 0.0);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("head initialization is reproducible from the seed") {
  const ModelHandle a = tiny_model(3, 30, 7, 42);
  const ModelHandle b = tiny_model(3, 30, 7, 42);
  const ModelHandle c = tiny_model(3, 30, 7, 43);
  bool identical = true, differs = false;
  for (int i = 0; i < a.graph.size(); ++i) {
    for (std::size_t p = 0; p < a.graph.node(i).params.size(); ++p) {
      if (!a.graph.node(i).params[p].trainable) continue;
      const auto& va = a.params.values[static_cast<std::size_t>(i)][p].values();
      identical = identical && va == b.params.values[static_cast<std::size_t>(i)][p].values();
      differs = differs || va != c.params.values[static_cast<std::size_t>(i)][p].values();
    }
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("checkpoint round-trip reproduces predictions exactly") {
  const fs::path dir = fs::temp_directory_path() / "slrkit_test_ckpt";
  fs::remove_all(dir);
  const ModelHandle m = tiny_model(4, 25, 3, 9);
  save_checkpoint(m, dir);
  const ModelHandle loaded = load_checkpoint(dir);
  CHECK(loaded.class_names == m.class_names);
  CHECK(loaded.head.classes == 4);
  const Tensor x = random_batch(2, 25, 1);
  CHECK(predict(loaded, x).values() == predict(m, x).values());
}

TEST_CASE("mismatched class names are rejected") {
  BackboneSpec b;
  b.architecture = Architecture::Tiny;
  b.input_side = 30;
  HeadSpec h;
  h.classes = 3;
  CHECK_THROWS_AS(assemble_model(b, h, 0, {"only", "two"}), ConfigError);
}
