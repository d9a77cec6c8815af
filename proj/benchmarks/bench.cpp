#include <benchmark/benchmark.h>

#include <vector>

#include "slrkit/dataset.hpp"
#include "slrkit/explain.hpp"
#include "slrkit/graph_exec.hpp"
#include "slrkit/math.hpp"
#include "slrkit/model.hpp"
#include "slrkit/rng.hpp"

using namespace slrkit;

namespace {

ModelHandle tiny_model(int side) {
  BackboneSpec b;
  b.architecture = Architecture::Tiny;
  b.input_side = side;
  b.seed = 7;
  HeadSpec h;
  h.classes = 10;
  return assemble_model(b, h, 1);
}

Tensor random_batch(int n, int side, std::uint64_t seed) {
  Tensor x({n, side, side, 3});
  Rng rng(seed);
  for (double& v : x.values()) v = rng.next_double();
  return x;
}

void bm_softmax(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> logits(static_cast<std::size_t>(state.range(0)));
  for (double& v : logits) v = rng.uniform(-10.0, 10.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax(logits));
  }
}
BENCHMARK(bm_softmax)->Arg(10)->Arg(1000);

void bm_cross_entropy(benchmark::State& state) {
  Rng rng(2);
  std::vector<double> r(10);
  double sum = 0.0;
  for (double& v : r) {
    v = rng.next_double() + 1e-3;
    sum += v;
  }
  for (double& v : r) v /= sum;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cross_entropy_lsr(r, 3, 0.1, 10));
  }
}
BENCHMARK(bm_cross_entropy);

void bm_backbone_forward(benchmark::State& state) {
  const ModelHandle m = tiny_model(75);
  const Tensor x = random_batch(static_cast<int>(state.range(0)), 75, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_features(m, x));
  }
}
BENCHMARK(bm_backbone_forward)->Arg(1)->Arg(16);

void bm_head_forward(benchmark::State& state) {
  const ModelHandle m = tiny_model(75);
  const Tensor feats = extract_features(m, random_batch(16, 75, 4));
  for (auto _ : state) {
    auto tr = forward(m.graph, m.params, {{m.feature_node, feats}}, m.softmax_node);
    benchmark::DoNotOptimize(tr.act.back());
  }
}
BENCHMARK(bm_head_forward);

void bm_attribution(benchmark::State& state) {
  const ModelHandle m = tiny_model(25);
  const ClassifierGradient f(m);
  Tensor x({25, 25, 3});
  Rng rng(5);
  for (double& v : x.values()) v = rng.next_double();
  BackgroundSet bg;
  bg.images = random_batch(4, 25, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(attribute(f, x, bg, 0, static_cast<int>(state.range(0)), 9));
  }
}
BENCHMARK(bm_attribution)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
