#include "slrkit/math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slrkit/errors.hpp"

namespace slrkit {

namespace {
constexpr double kLogClamp = 1e-12;
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

std::vector<double> relu(std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = relu(x[i]);
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw NumericError("softmax: empty input");
  double m = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
    m = std::max(m, v);
  }
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> smoothed_target(int y, double eps, int k) {
  std::vector<double> s(static_cast<std::size_t>(k), eps / k);
  s[static_cast<std::size_t>(y)] += 1.0 - eps;
  return s;
}

double cross_entropy_lsr(std::span<const double> r, int y, double eps, int k) {
  if (static_cast<int>(r.size()) != k) {
    throw NumericError("cross_entropy_lsr: distribution length != K");
  }
  if (y < 0 || y >= k) throw NumericError("cross_entropy_lsr: label out of range");
  double sum = 0.0;
  for (double v : r) {
    if (v < 0.0) throw NumericError("cross_entropy_lsr: negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw NumericError("cross_entropy_lsr: distribution does not sum to 1 (sum=" +
                       std::to_string(sum) + ")");
  }
  const std::vector<double> s = smoothed_target(y, eps, k);
  double h = 0.0;
  for (int i = 0; i < k; ++i) {
    h -= s[static_cast<std::size_t>(i)] *
         std::log(std::max(r[static_cast<std::size_t>(i)], kLogClamp));
  }
  return h;
}

std::vector<double> softmax_ce_logit_grad(std::span<const double> logits, int y,
                                          double eps, int k) {
  std::vector<double> g = softmax(logits);
  const std::vector<double> s = smoothed_target(y, eps, k);
  for (int i = 0; i < k; ++i) g[static_cast<std::size_t>(i)] -= s[static_cast<std::size_t>(i)];
  return g;
}

}  // namespace slrkit
