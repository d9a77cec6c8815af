#include "slrkit/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "nlohmann/json.hpp"
#include "slrkit/errors.hpp"
#include "slrkit/graph_exec.hpp"
#include "slrkit/image.hpp"
#include "slrkit/rng.hpp"
#include "slrkit/serialize.hpp"

namespace slrkit {

namespace {

using nlohmann::json;

Tensor with_batch_dim(const Tensor& x) {
  std::vector<int> shape{1};
  shape.insert(shape.end(), x.shape().begin(), x.shape().end());
  return Tensor::from_data(shape, x.values());
}

Tensor row_of(const Tensor& batch, int row) {
  std::vector<int> shape(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t stride = shape_size(shape);
  return Tensor::from_data(
      shape, std::vector<double>(batch.values().begin() + static_cast<std::ptrdiff_t>(row) * static_cast<std::ptrdiff_t>(stride),
                                 batch.values().begin() + static_cast<std::ptrdiff_t>(row + 1) * static_cast<std::ptrdiff_t>(stride)));
}

double attribution_sum(const AttributionMap& attr) {
  return std::accumulate(attr.values.values().begin(), attr.values.values().end(), 0.0);
}

}  // namespace

ClassifierGradient::ClassifierGradient(const ModelHandle& model) : model_(model) {
  require_backbone_weights(model);
}

double ClassifierGradient::value(const Tensor& x, int class_index) const {
  auto tr = forward(model_.graph, model_.params,
                    {{model_.input_node, with_batch_dim(x)}}, model_.softmax_node);
  return tr.act[static_cast<std::size_t>(model_.softmax_node)].at(0, class_index);
}

Tensor ClassifierGradient::input_gradient(const Tensor& x, int class_index) const {
  auto tr = forward(model_.graph, model_.params,
                    {{model_.input_node, with_batch_dim(x)}}, model_.softmax_node);
  Tensor seed({1, model_.head.classes});
  seed.at(0, class_index) = 1.0;
  auto grads = backward(model_.graph, model_.params, tr, model_.softmax_node, seed,
                        /*want_param_grads=*/false);
  const Tensor& gx = grads.act[static_cast<std::size_t>(model_.input_node)];
  if (gx.empty()) {
    throw CapabilityError("model input gradient is unavailable");
  }
  return Tensor::from_data(x.shape(), gx.values());
}

BackgroundSet select_background(const Tensor& pool, int m, std::uint64_t seed) {
  if (pool.empty()) throw DataError("background pool is empty");
  const int n = pool.dim(0);
  if (m < 1 || m > n) {
    throw DataError("background size " + std::to_string(m) +
                    " is outside [1, " + std::to_string(n) + "]");
  }
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::derive(seed, 0x6267ULL);  // dedicated background stream
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(m));

  BackgroundSet bg;
  bg.seed = seed;
  std::vector<int> shape = pool.shape();
  shape[0] = m;
  bg.images = Tensor(shape);
  const std::size_t stride = pool.size() / static_cast<std::size_t>(n);
  for (int i = 0; i < m; ++i) {
    std::copy_n(pool.data() + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * stride,
                stride, bg.images.data() + static_cast<std::size_t>(i) * stride);
  }
  return bg;
}

AttributionMap attribute(const DifferentiableModel& f, const Tensor& x,
                         const BackgroundSet& background, int class_index,
                         int n_samples, std::uint64_t seed) {
  const int m = background.m();
  if (m < 1) throw DataError("background set is empty");
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (class_index < 0 || class_index >= f.num_classes()) {
    throw ConfigError("class index " + std::to_string(class_index) +
                      " is outside [0, " + std::to_string(f.num_classes()) + ")");
  }
  const std::size_t stride = background.images.size() / static_cast<std::size_t>(m);
  if (stride != x.size()) {
    throw DataError("background rows do not match the input shape");
  }

  const int per_bg = (n_samples + m - 1) / m;
  // All jitters are drawn up front so the parallel loop stays deterministic.
  Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(class_index), 0x6567ULL);
  std::vector<double> jitter(static_cast<std::size_t>(m) * per_bg);
  for (double& u : jitter) u = rng.next_double();

  std::vector<Tensor> partial(static_cast<std::size_t>(m));
  std::vector<double> bg_value(static_cast<std::size_t>(m));
#pragma omp parallel for schedule(dynamic)
  for (int bi = 0; bi < m; ++bi) {
    const Tensor b = row_of(background.images, bi);
    bg_value[static_cast<std::size_t>(bi)] = f.value(b, class_index);
    Tensor acc(x.shape());
    Tensor point(x.shape());
    for (int j = 0; j < per_bg; ++j) {
      const double alpha =
          (j + jitter[static_cast<std::size_t>(bi) * per_bg + j]) / per_bg;
      for (std::size_t e = 0; e < x.size(); ++e) {
        point[e] = b[e] + alpha * (x[e] - b[e]);
      }
      const Tensor g = f.input_gradient(point, class_index);
      for (std::size_t e = 0; e < x.size(); ++e) {
        acc[e] += (x[e] - b[e]) * g[e];
      }
    }
    partial[static_cast<std::size_t>(bi)] = std::move(acc);
  }

  AttributionMap attr;
  attr.values = Tensor(x.shape());
  for (int bi = 0; bi < m; ++bi) {
    for (std::size_t e = 0; e < x.size(); ++e) {
      attr.values[e] += partial[static_cast<std::size_t>(bi)][e];
    }
  }
  const double total = static_cast<double>(m) * per_bg;
  for (double& v : attr.values.values()) v /= total;
  attr.base_value = std::accumulate(bg_value.begin(), bg_value.end(), 0.0) / m;
  attr.explained_output = f.value(x, class_index);
  attr.class_index = class_index;
  attr.seed = seed;
  attr.n_samples = m * per_bg;
  return attr;
}

ResidualReport verify_additivity(const AttributionMap& attr, double tol_rel,
                                 double floor) {
  ResidualReport rep;
  rep.residual = std::abs(attribution_sum(attr) + attr.base_value - attr.explained_output);
  rep.bound = tol_rel * std::max(std::abs(attr.explained_output - attr.base_value), floor);
  rep.pass = rep.residual <= rep.bound;
  return rep;
}

namespace {

// Positive attribution tints pink, negative blue; blend strength scales with
// |a| / max|a| so zero attribution leaves the grayscale pixel untouched.
void paint_panel(Tensor& canvas, int x_offset, const Tensor& x,
                 const AttributionMap& attr) {
  const int h = x.dim(0), w = x.dim(1);
  const int cw = canvas.dim(1);
  std::vector<double> a(static_cast<std::size_t>(h) * w, 0.0);
  double amax = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        s += attr.values[(static_cast<std::size_t>(y) * w + xx) * 3 + c];
      }
      a[static_cast<std::size_t>(y) * w + xx] = s;
      amax = std::max(amax, std::abs(s));
    }
  }
  const double pink[3] = {255.0, 64.0, 160.0};
  const double blue[3] = {64.0, 112.0, 255.0};
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      double gray = 0.0;
      for (int c = 0; c < 3; ++c) {
        gray += x[(static_cast<std::size_t>(y) * w + xx) * 3 + c];
      }
      gray = gray / 3.0 * 255.0;
      const double s = a[static_cast<std::size_t>(y) * w + xx];
      const double alpha = amax > 0.0 ? std::abs(s) / amax : 0.0;
      const double* tint = s >= 0.0 ? pink : blue;
      for (int c = 0; c < 3; ++c) {
        canvas[(static_cast<std::size_t>(y) * cw + x_offset + xx) * 3 + c] =
            gray + alpha * (tint[c] - gray);
      }
    }
  }
}

}  // namespace

void render_overlay(const Tensor& x, const AttributionMap& attr,
                    const std::filesystem::path& path) {
  if (x.rank() != 3 || x.dim(2) != 3 || !x.same_shape(attr.values)) {
    throw DataError("overlay expects an (h, w, 3) input matching the attribution");
  }
  Tensor canvas({x.dim(0), x.dim(1), 3});
  paint_panel(canvas, 0, x, attr);
  write_png(path, canvas);
}

void render_overlay_panels(const Tensor& x, const std::vector<AttributionMap>& attrs,
                           const std::filesystem::path& path) {
  if (attrs.empty()) throw ConfigError("no attributions to render");
  const int h = x.dim(0), w = x.dim(1);
  const int gap = 2;
  const int cw = static_cast<int>(attrs.size()) * (w + gap) - gap;
  Tensor canvas({h, cw, 3}, 255.0);
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    paint_panel(canvas, static_cast<int>(i) * (w + gap), x, attrs[i]);
  }
  write_png(path, canvas);
}

void write_attribution(const std::filesystem::path& stem, const AttributionMap& attr) {
  write_compressed_array(stem.string() + ".attr", attr.values);
  json j{{"base_value", attr.base_value},
         {"explained_output", attr.explained_output},
         {"class_index", attr.class_index},
         {"seed", attr.seed},
         {"n_samples", attr.n_samples},
         {"residual",
          std::abs(attribution_sum(attr) + attr.base_value - attr.explained_output)}};
  std::ofstream os(stem.string() + ".json");
  if (!os) throw IoError("cannot write attribution sidecar " + stem.string() + ".json");
  os << j.dump(2) << '\n';
}

AttributionMap read_attribution(const std::filesystem::path& stem) {
  AttributionMap attr;
  attr.values = read_compressed_array(stem.string() + ".attr");
  std::ifstream is(stem.string() + ".json");
  if (!is) throw IoError("cannot read attribution sidecar " + stem.string() + ".json");
  json j = json::parse(is);
  attr.base_value = j.at("base_value").get<double>();
  attr.explained_output = j.at("explained_output").get<double>();
  attr.class_index = j.at("class_index").get<int>();
  attr.seed = j.at("seed").get<std::uint64_t>();
  attr.n_samples = j.at("n_samples").get<int>();
  return attr;
}

}  // namespace slrkit
