#pragma once

#include <span>
#include <vector>

namespace slrkit {

// Elementwise max(0, x).
double relu(double x);
std::vector<double> relu(std::span<const double> x);

// Numerically stable softmax (max-subtraction before exponentiation).
std::vector<double> softmax(std::span<const double> logits);

// Smoothed target distribution: (1 - eps) * onehot(y) + eps / K.
std::vector<double> smoothed_target(int y, double eps, int k);

// Cross entropy of a predicted distribution r against the label-smoothed
// target for true label y. Entries of r are clamped to >= 1e-12 before the
// log. eps = 0 is plain categorical cross entropy.
double cross_entropy_lsr(std::span<const double> r, int y, double eps, int k);

// Gradient of cross_entropy_lsr(softmax(m), y, eps, k) with respect to the
// logits m: softmax(m) - smoothed_target(y, eps, k).
std::vector<double> softmax_ce_logit_grad(std::span<const double> logits, int y,
                                          double eps, int k);

}  // namespace slrkit
