#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "slrkit/model.hpp"
#include "slrkit/tensor.hpp"

namespace slrkit {

// Anything attributions can be computed for: a scalar-per-class function of
// the input with gradients. Inputs are single (unbatched) tensors.
class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;
  virtual int num_classes() const = 0;
  virtual double value(const Tensor& x, int class_index) const = 0;
  // d value / d x, same shape as x.
  virtual Tensor input_gradient(const Tensor& x, int class_index) const = 0;
};

// Full-graph forward/backward through an assembled classifier, dropout off.
class ClassifierGradient : public DifferentiableModel {
 public:
  explicit ClassifierGradient(const ModelHandle& model);
  int num_classes() const override { return model_.head.classes; }
  double value(const Tensor& x, int class_index) const override;
  Tensor input_gradient(const Tensor& x, int class_index) const override;

 private:
  const ModelHandle& model_;
};

// Reference inputs defining the attribution baseline. Rows share the shape
// of the explained input.
struct BackgroundSet {
  Tensor images;  // (m, ...)
  std::uint64_t seed = 0;
  int m() const { return images.empty() ? 0 : images.dim(0); }
};

// Seeded uniform sample of m rows of `pool` without replacement.
BackgroundSet select_background(const Tensor& pool, int m, std::uint64_t seed);

struct AttributionMap {
  Tensor values;  // shape of x, signed
  double base_value = 0.0;        // mean_b f_c(b)
  double explained_output = 0.0;  // f_c(x)
  int class_index = 0;
  std::uint64_t seed = 0;
  int n_samples = 0;
};

// Expected-gradients attribution: the average over references b and
// interpolation coefficients alpha of (x - b) * grad f_c at b + alpha(x - b).
// Every reference receives ceil(n_samples / m) stratified-jittered alpha
// draws, so all references carry equal weight at any budget (which makes the
// affine-model case exact). Deterministic given (seed, n_samples, background).
AttributionMap attribute(const DifferentiableModel& f, const Tensor& x,
                         const BackgroundSet& background, int class_index,
                         int n_samples, std::uint64_t seed);

struct ResidualReport {
  double residual = 0.0;  // |sum(values) + base_value - explained_output|
  double bound = 0.0;
  bool pass = false;
};

// Checks the additivity (local accuracy) axiom against
// tol_rel * max(|explained_output - base_value|, floor).
ResidualReport verify_additivity(const AttributionMap& attr, double tol_rel,
                                 double floor = 1e-6);

// Channel-summed attribution on a symmetric blue-white-pink diverging scale
// centered at 0, alpha-blended over the grayscale input. Zero attribution
// reproduces the grayscale input exactly.
void render_overlay(const Tensor& x, const AttributionMap& attr,
                    const std::filesystem::path& path);

// One panel per class on a single horizontal strip.
void render_overlay_panels(const Tensor& x, const std::vector<AttributionMap>& attrs,
                           const std::filesystem::path& path);

// values as a compressed array next to a JSON sidecar
// (<stem>.attr + <stem>.json under the same parent).
void write_attribution(const std::filesystem::path& stem, const AttributionMap& attr);
AttributionMap read_attribution(const std::filesystem::path& stem);

}  // namespace slrkit
