#include "slrkit/graph_exec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "slrkit/errors.hpp"

namespace slrkit {

namespace {

std::vector<int> batch_shape(const Node& nd, int n) {
  std::vector<int> s;
  s.reserve(nd.out_shape.size() + 1);
  s.push_back(n);
  for (int d : nd.out_shape) s.push_back(d);
  return s;
}

struct Pad2D {
  int top = 0, left = 0;
};

Pad2D pad_offsets(const Node& nd, int in_h, int in_w) {
  Pad2D p;
  if (nd.padding == Padding::Same) {
    p.top = same_pad_total(in_h, nd.kernel_h, nd.stride_h) / 2;
    p.left = same_pad_total(in_w, nd.kernel_w, nd.stride_w) / 2;
  }
  return p;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& kern, const Tensor* bias,
                      const Node& nd, int n) {
  const int h = x.dim(1), w = x.dim(2), cin = x.dim(3);
  const int oh = nd.out_shape[0], ow = nd.out_shape[1], cout = nd.out_shape[2];
  const Pad2D pad = pad_offsets(nd, h, w);
  Tensor out(batch_shape(nd, n));
  const double* k = kern.data();
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n; ++b) {
    std::vector<double> acc(static_cast<std::size_t>(cout));
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int ky = 0; ky < nd.kernel_h; ++ky) {
          const int iy = oy * nd.stride_h - pad.top + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < nd.kernel_w; ++kx) {
            const int ix = ox * nd.stride_w - pad.left + kx;
            if (ix < 0 || ix >= w) continue;
            for (int ci = 0; ci < cin; ++ci) {
              const double xv = x.at(b, iy, ix, ci);
              if (xv == 0.0) continue;
              const double* krow =
                  k + (static_cast<std::size_t>((ky * nd.kernel_w + kx) * cin + ci)) * cout;
              for (int co = 0; co < cout; ++co) acc[static_cast<std::size_t>(co)] += xv * krow[co];
            }
          }
        }
        for (int co = 0; co < cout; ++co) {
          out.at(b, oy, ox, co) =
              acc[static_cast<std::size_t>(co)] + (bias ? (*bias)[static_cast<std::size_t>(co)] : 0.0);
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& x, const Tensor& kern, const Node& nd,
                     const Tensor& g, Tensor* gx, Tensor* gk, Tensor* gb) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), cin = x.dim(3);
  const int oh = nd.out_shape[0], ow = nd.out_shape[1], cout = nd.out_shape[2];
  const Pad2D pad = pad_offsets(nd, h, w);
  const double* k = kern.data();
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double* grow = &g.values()[((static_cast<std::size_t>(b) * oh + oy) * ow + ox) * cout];
        if (gb) {
          for (int co = 0; co < cout; ++co) (*gb)[static_cast<std::size_t>(co)] += grow[co];
        }
        for (int ky = 0; ky < nd.kernel_h; ++ky) {
          const int iy = oy * nd.stride_h - pad.top + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < nd.kernel_w; ++kx) {
            const int ix = ox * nd.stride_w - pad.left + kx;
            if (ix < 0 || ix >= w) continue;
            for (int ci = 0; ci < cin; ++ci) {
              const std::size_t koff =
                  (static_cast<std::size_t>((ky * nd.kernel_w + kx) * cin + ci)) * cout;
              double acc = 0.0;
              for (int co = 0; co < cout; ++co) acc += grow[co] * k[koff + co];
              if (gx) gx->at(b, iy, ix, ci) += acc;
              if (gk) {
                const double xv = x.at(b, iy, ix, ci);
                if (xv != 0.0) {
                  for (int co = 0; co < cout; ++co) (*gk)[koff + co] += xv * grow[co];
                }
              }
            }
          }
        }
      }
    }
  }
}

Tensor depthwise_forward(const Tensor& x, const Tensor& kern, const Tensor* bias,
                         const Node& nd, int n, int out_h, int out_w) {
  const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const Pad2D pad = pad_offsets(nd, h, w);
  Tensor out({n, out_h, out_w, c});
  const double* k = kern.data();
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        for (int ci = 0; ci < c; ++ci) {
          double acc = bias ? (*bias)[static_cast<std::size_t>(ci)] : 0.0;
          for (int ky = 0; ky < nd.kernel_h; ++ky) {
            const int iy = oy * nd.stride_h - pad.top + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < nd.kernel_w; ++kx) {
              const int ix = ox * nd.stride_w - pad.left + kx;
              if (ix < 0 || ix >= w) continue;
              acc += x.at(b, iy, ix, ci) *
                     k[static_cast<std::size_t>((ky * nd.kernel_w + kx)) * c + ci];
            }
          }
          out.at(b, oy, ox, ci) = acc;
        }
      }
    }
  }
  return out;
}

void depthwise_backward(const Tensor& x, const Tensor& kern, const Node& nd,
                        const Tensor& g, Tensor* gx, Tensor* gk, Tensor* gb) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int oh = g.dim(1), ow = g.dim(2);
  const Pad2D pad = pad_offsets(nd, h, w);
  const double* k = kern.data();
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ci = 0; ci < c; ++ci) {
          const double gv = g.at(b, oy, ox, ci);
          if (gv == 0.0) continue;
          if (gb) (*gb)[static_cast<std::size_t>(ci)] += gv;
          for (int ky = 0; ky < nd.kernel_h; ++ky) {
            const int iy = oy * nd.stride_h - pad.top + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < nd.kernel_w; ++kx) {
              const int ix = ox * nd.stride_w - pad.left + kx;
              if (ix < 0 || ix >= w) continue;
              const std::size_t koff = static_cast<std::size_t>((ky * nd.kernel_w + kx)) * c + ci;
              if (gx) gx->at(b, iy, ix, ci) += gv * k[koff];
              if (gk) (*gk)[koff] += gv * x.at(b, iy, ix, ci);
            }
          }
        }
      }
    }
  }
}

// Dense over the trailing axis: x viewed as (rows, cin).
Tensor dense_forward(const Tensor& x, const Tensor& kern, const Tensor& bias,
                     const Node& nd, int n) {
  const int cin = x.shape().back();
  const int units = nd.units;
  const std::size_t rows = x.size() / static_cast<std::size_t>(cin);
  Tensor out(batch_shape(nd, n));
  const double* w = kern.data();
  const double* xd = x.data();
  double* od = out.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
    const double* xr = xd + static_cast<std::size_t>(r) * cin;
    double* orow = od + static_cast<std::size_t>(r) * units;
    for (int u = 0; u < units; ++u) orow[u] = bias[static_cast<std::size_t>(u)];
    for (int kk = 0; kk < cin; ++kk) {
      const double xv = xr[kk];
      if (xv == 0.0) continue;
      const double* wrow = w + static_cast<std::size_t>(kk) * units;
      for (int u = 0; u < units; ++u) orow[u] += xv * wrow[u];
    }
  }
  return out;
}

void dense_backward(const Tensor& x, const Tensor& kern, const Node& nd,
                    const Tensor& g, Tensor* gx, Tensor* gk, Tensor* gb) {
  const int cin = x.shape().back();
  const int units = nd.units;
  const std::size_t rows = x.size() / static_cast<std::size_t>(cin);
  const double* w = kern.data();
  const double* xd = x.data();
  const double* gd = g.data();
  if (gx) {
    double* gxd = gx->data();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
      const double* grow = gd + static_cast<std::size_t>(r) * units;
      double* gxr = gxd + static_cast<std::size_t>(r) * cin;
      for (int kk = 0; kk < cin; ++kk) {
        const double* wrow = w + static_cast<std::size_t>(kk) * units;
        double acc = 0.0;
        for (int u = 0; u < units; ++u) acc += grow[u] * wrow[u];
        gxr[kk] += acc;
      }
    }
  }
  if (gk) {
    double* gkd = gk->data();
#pragma omp parallel for schedule(static)
    for (int kk = 0; kk < cin; ++kk) {
      double* gkrow = gkd + static_cast<std::size_t>(kk) * units;
      for (std::size_t r = 0; r < rows; ++r) {
        const double xv = xd[r * static_cast<std::size_t>(cin) + kk];
        if (xv == 0.0) continue;
        const double* grow = gd + r * units;
        for (int u = 0; u < units; ++u) gkrow[u] += xv * grow[u];
      }
    }
  }
  if (gb) {
    double* gbd = gb->data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* grow = gd + r * units;
      for (int u = 0; u < units; ++u) gbd[u] += grow[u];
    }
  }
}

Tensor pool_forward(const Tensor& x, const Node& nd, int n, bool is_max) {
  const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int oh = nd.out_shape[0], ow = nd.out_shape[1];
  const Pad2D pad = pad_offsets(nd, h, w);
  Tensor out({n, oh, ow, c});
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ci = 0; ci < c; ++ci) {
          double best = -std::numeric_limits<double>::infinity();
          double sum = 0.0;
          int count = 0;
          for (int ky = 0; ky < nd.kernel_h; ++ky) {
            const int iy = oy * nd.stride_h - pad.top + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < nd.kernel_w; ++kx) {
              const int ix = ox * nd.stride_w - pad.left + kx;
              if (ix < 0 || ix >= w) continue;
              const double v = x.at(b, iy, ix, ci);
              best = std::max(best, v);
              sum += v;
              ++count;
            }
          }
          out.at(b, oy, ox, ci) = is_max ? best : (count > 0 ? sum / count : 0.0);
        }
      }
    }
  }
  return out;
}

void pool_backward(const Tensor& x, const Node& nd, const Tensor& g, Tensor& gx,
                   bool is_max) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int oh = g.dim(1), ow = g.dim(2);
  const Pad2D pad = pad_offsets(nd, h, w);
  for (int b = 0; b < n; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ci = 0; ci < c; ++ci) {
          const double gv = g.at(b, oy, ox, ci);
          if (gv == 0.0) continue;
          int best_iy = -1, best_ix = -1;
          double best = -std::numeric_limits<double>::infinity();
          int count = 0;
          for (int ky = 0; ky < nd.kernel_h; ++ky) {
            const int iy = oy * nd.stride_h - pad.top + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < nd.kernel_w; ++kx) {
              const int ix = ox * nd.stride_w - pad.left + kx;
              if (ix < 0 || ix >= w) continue;
              ++count;
              if (is_max) {
                const double v = x.at(b, iy, ix, ci);
                if (v > best) {
                  best = v;
                  best_iy = iy;
                  best_ix = ix;
                }
              }
            }
          }
          if (is_max) {
            gx.at(b, best_iy, best_ix, ci) += gv;
          } else {
            const double share = gv / count;
            for (int ky = 0; ky < nd.kernel_h; ++ky) {
              const int iy = oy * nd.stride_h - pad.top + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < nd.kernel_w; ++kx) {
                const int ix = ox * nd.stride_w - pad.left + kx;
                if (ix < 0 || ix >= w) continue;
                gx.at(b, iy, ix, ci) += share;
              }
            }
          }
        }
      }
    }
  }
}

void softmax_rows(const Tensor& x, Tensor& out) {
  const int k = x.shape().back();
  const std::size_t rows = x.size() / static_cast<std::size_t>(k);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * k;
    double* orow = out.data() + r * k;
    double m = xr[0];
    for (int i = 1; i < k; ++i) m = std::max(m, xr[i]);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      orow[i] = std::exp(xr[i] - m);
      sum += orow[i];
    }
    for (int i = 0; i < k; ++i) orow[i] /= sum;
  }
}

}  // namespace

ParamStore make_param_store(const Graph& g) {
  ParamStore ps;
  ps.values.resize(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) {
    ps.values[static_cast<std::size_t>(i)].resize(g.node(i).params.size());
  }
  return ps;
}

void init_params(const Graph& g, ParamStore& ps, std::uint64_t seed,
                 bool include_nontrainable) {
  for (int i = 0; i < g.size(); ++i) {
    const Node& nd = g.node(i);
    for (std::size_t p = 0; p < nd.params.size(); ++p) {
      const ParamDesc& pd = nd.params[p];
      if (!pd.trainable && !include_nontrainable) continue;
      Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i), p);
      Tensor t(pd.shape);
      const bool is_kernel = pd.shape.size() >= 2 ||
                             nd.kind == OpKind::DepthwiseConv2D;
      if (nd.kind == OpKind::BatchNorm) {
        const bool ones = pd.name.ends_with("gamma") || pd.name.ends_with("variance");
        for (auto& v : t.values()) v = ones ? 1.0 : 0.0;
      } else if (is_kernel && pd.name.find("kernel") != std::string::npos) {
        double fan_in = 1.0, fan_out = 1.0;
        const auto& s = pd.shape;
        if (s.size() == 4) {  // conv (kh, kw, cin, cout)
          fan_in = static_cast<double>(s[0]) * s[1] * s[2];
          fan_out = static_cast<double>(s[0]) * s[1] * s[3];
        } else if (s.size() == 3) {  // depthwise (kh, kw, c)
          fan_in = static_cast<double>(s[0]) * s[1];
          fan_out = fan_in;
        } else {  // dense (cin, units)
          fan_in = s[0];
          fan_out = s[1];
        }
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : t.values()) v = rng.uniform(-limit, limit);
      }  // biases stay zero
      ps.values[static_cast<std::size_t>(i)][p] = std::move(t);
    }
  }
}

bool params_ready(const Graph& g, const ParamStore& ps, int upto) {
  for (int i = 0; i <= upto; ++i) {
    const Node& nd = g.node(i);
    for (std::size_t p = 0; p < nd.params.size(); ++p) {
      if (ps.values[static_cast<std::size_t>(i)][p].empty() &&
          shape_size(nd.params[p].shape) > 0) {
        return false;
      }
    }
  }
  return true;
}

ForwardTrace forward(const Graph& g, const ParamStore& ps,
                     const std::vector<std::pair<int, Tensor>>& bindings,
                     int output_node, bool training, Rng* rng) {
  ForwardTrace tr;
  tr.act.resize(static_cast<std::size_t>(g.size()));
  tr.dropout_mask.resize(static_cast<std::size_t>(g.size()));
  std::vector<bool> have(static_cast<std::size_t>(g.size()), false);
  int n = 0;
  for (const auto& [id, t] : bindings) {
    tr.act[static_cast<std::size_t>(id)] = t;
    have[static_cast<std::size_t>(id)] = true;
    n = t.dim(0);
  }
  if (n == 0) throw ConfigError("forward: no bindings supplied");

  for (int i = 0; i <= output_node; ++i) {
    if (have[static_cast<std::size_t>(i)]) continue;
    const Node& nd = g.node(i);
    if (nd.kind == OpKind::Input) continue;  // unbound inputs stay unavailable
    bool ready = true;
    for (int in : nd.inputs) ready = ready && have[static_cast<std::size_t>(in)];
    if (!ready) continue;
    const auto& pv = ps.values[static_cast<std::size_t>(i)];
    for (std::size_t p = 0; p < nd.params.size(); ++p) {
      if (pv[p].empty()) {
        throw CapabilityError("forward: parameters of '" + nd.name +
                              "' are not materialized (missing weights)");
      }
    }
    const Tensor& x = tr.act[static_cast<std::size_t>(nd.inputs.empty() ? 0 : nd.inputs[0])];
    Tensor out;
    switch (nd.kind) {
      case OpKind::Conv2D:
        out = conv2d_forward(x, pv[0], nd.use_bias ? &pv[1] : nullptr, nd, n);
        break;
      case OpKind::DepthwiseConv2D:
        out = depthwise_forward(x, pv[0], nd.use_bias ? &pv[1] : nullptr, nd, n,
                                nd.out_shape[0], nd.out_shape[1]);
        break;
      case OpKind::SeparableConv2D: {
        Node dwn = nd;  // depthwise stage keeps stride/padding
        Tensor mid = depthwise_forward(x, pv[0], nullptr, dwn, n, nd.out_shape[0],
                                       nd.out_shape[1]);
        Node pwn = nd;
        pwn.kind = OpKind::Dense;
        pwn.units = nd.out_shape[2];
        Tensor zero_bias({nd.out_shape[2]});
        out = dense_forward(mid, pv[1], nd.use_bias ? pv[2] : zero_bias, pwn, n);
        break;
      }
      case OpKind::BatchNorm: {
        out = Tensor(x.shape());
        const int c = nd.out_shape.back();
        const std::size_t rows = x.size() / static_cast<std::size_t>(c);
        const bool scaled = nd.params.size() == 4;  // gamma present
        const Tensor& beta = pv[scaled ? 1 : 0];
        const Tensor& mean = pv[scaled ? 2 : 1];
        const Tensor& var = pv[scaled ? 3 : 2];
        std::vector<double> scale(static_cast<std::size_t>(c)), shift(static_cast<std::size_t>(c));
        for (int ci = 0; ci < c; ++ci) {
          const double g0 = scaled ? pv[0][static_cast<std::size_t>(ci)] : 1.0;
          const double s = g0 / std::sqrt(var[static_cast<std::size_t>(ci)] + nd.epsilon);
          scale[static_cast<std::size_t>(ci)] = s;
          shift[static_cast<std::size_t>(ci)] =
              beta[static_cast<std::size_t>(ci)] - mean[static_cast<std::size_t>(ci)] * s;
        }
        for (std::size_t r = 0; r < rows; ++r) {
          for (int ci = 0; ci < c; ++ci) {
            out[r * c + ci] = x[r * c + ci] * scale[static_cast<std::size_t>(ci)] +
                              shift[static_cast<std::size_t>(ci)];
          }
        }
        break;
      }
      case OpKind::ReLU:
        out = Tensor(x.shape());
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] > 0.0 ? x[j] : 0.0;
        break;
      case OpKind::MaxPool2D:
        out = pool_forward(x, nd, n, true);
        break;
      case OpKind::AvgPool2D:
        out = pool_forward(x, nd, n, false);
        break;
      case OpKind::ZeroPad2D: {
        out = Tensor(batch_shape(nd, n));
        const int h = x.dim(1), w = x.dim(2), c = x.dim(3);
        for (int b = 0; b < n; ++b)
          for (int y = 0; y < h; ++y)
            for (int xw = 0; xw < w; ++xw)
              for (int ci = 0; ci < c; ++ci)
                out.at(b, y + nd.pad_top, xw + nd.pad_left, ci) = x.at(b, y, xw, ci);
        break;
      }
      case OpKind::Add: {
        out = tr.act[static_cast<std::size_t>(nd.inputs[0])];
        for (std::size_t j = 1; j < nd.inputs.size(); ++j) {
          const Tensor& other = tr.act[static_cast<std::size_t>(nd.inputs[j])];
          for (std::size_t v = 0; v < out.size(); ++v) out[v] += other[v];
        }
        break;
      }
      case OpKind::Concat: {
        out = Tensor(batch_shape(nd, n));
        const int ctot = nd.out_shape.back();
        const std::size_t rows = out.size() / static_cast<std::size_t>(ctot);
        int coff = 0;
        for (int in : nd.inputs) {
          const Tensor& part = tr.act[static_cast<std::size_t>(in)];
          const int cpart = part.shape().back();
          for (std::size_t r = 0; r < rows; ++r) {
            for (int ci = 0; ci < cpart; ++ci) {
              out[r * ctot + coff + ci] = part[r * cpart + ci];
            }
          }
          coff += cpart;
        }
        break;
      }
      case OpKind::Dense:
        out = dense_forward(x, pv[0], pv[1], nd, n);
        break;
      case OpKind::Dropout: {
        if (training && nd.rate > 0.0) {
          if (rng == nullptr) throw ConfigError("forward: dropout in training mode needs an rng");
          Tensor mask(x.shape());
          const double keep = 1.0 - nd.rate;
          for (auto& v : mask.values()) v = rng->next_double() < keep ? 1.0 / keep : 0.0;
          out = Tensor(x.shape());
          for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] * mask[j];
          tr.dropout_mask[static_cast<std::size_t>(i)] = std::move(mask);
        } else {
          out = x;
        }
        break;
      }
      case OpKind::Flatten:
        out = Tensor::from_data(batch_shape(nd, n), x.values());
        break;
      case OpKind::Softmax:
        out = Tensor(x.shape());
        softmax_rows(x, out);
        break;
      case OpKind::Input:
        break;
    }
    tr.act[static_cast<std::size_t>(i)] = std::move(out);
    have[static_cast<std::size_t>(i)] = true;
  }
  if (!have[static_cast<std::size_t>(output_node)]) {
    throw ConfigError("forward: output node '" + g.node(output_node).name +
                      "' is unreachable from the supplied bindings");
  }
  return tr;
}

Gradients backward(const Graph& g, const ParamStore& ps, const ForwardTrace& tr,
                   int from_node, const Tensor& seed, bool want_param_grads) {
  Gradients out;
  out.act.resize(static_cast<std::size_t>(g.size()));
  out.param.resize(static_cast<std::size_t>(g.size()));
  if (want_param_grads) {
    for (int i = 0; i < g.size(); ++i) {
      out.param[static_cast<std::size_t>(i)].resize(g.node(i).params.size());
    }
  }
  out.act[static_cast<std::size_t>(from_node)] = seed;

  auto grad_slot = [&](int id) -> Tensor& {
    Tensor& t = out.act[static_cast<std::size_t>(id)];
    if (t.empty()) t = Tensor(tr.act[static_cast<std::size_t>(id)].shape());
    return t;
  };

  for (int i = from_node; i >= 0; --i) {
    const Tensor& gy = out.act[static_cast<std::size_t>(i)];
    if (gy.empty()) continue;
    const Node& nd = g.node(i);
    if (nd.kind == OpKind::Input) continue;
    // Upstream activation may be absent when this node was bound directly.
    if (!nd.inputs.empty() &&
        tr.act[static_cast<std::size_t>(nd.inputs[0])].empty()) {
      continue;
    }
    const auto& pv = ps.values[static_cast<std::size_t>(i)];
    const Tensor& x = tr.act[static_cast<std::size_t>(nd.inputs.empty() ? 0 : nd.inputs[0])];
    switch (nd.kind) {
      case OpKind::Conv2D: {
        Tensor* gk = nullptr;
        Tensor* gb = nullptr;
        if (want_param_grads) {
          out.param[static_cast<std::size_t>(i)][0] = Tensor(nd.params[0].shape);
          gk = &out.param[static_cast<std::size_t>(i)][0];
          if (nd.use_bias) {
            out.param[static_cast<std::size_t>(i)][1] = Tensor(nd.params[1].shape);
            gb = &out.param[static_cast<std::size_t>(i)][1];
          }
        }
        conv2d_backward(x, pv[0], nd, gy, &grad_slot(nd.inputs[0]), gk, gb);
        break;
      }
      case OpKind::DepthwiseConv2D: {
        Tensor* gk = nullptr;
        Tensor* gb = nullptr;
        if (want_param_grads) {
          out.param[static_cast<std::size_t>(i)][0] = Tensor(nd.params[0].shape);
          gk = &out.param[static_cast<std::size_t>(i)][0];
          if (nd.use_bias) {
            out.param[static_cast<std::size_t>(i)][1] = Tensor(nd.params[1].shape);
            gb = &out.param[static_cast<std::size_t>(i)][1];
          }
        }
        depthwise_backward(x, pv[0], nd, gy, &grad_slot(nd.inputs[0]), gk, gb);
        break;
      }
      case OpKind::SeparableConv2D: {
        const int n = x.dim(0);
        Tensor mid = depthwise_forward(x, pv[0], nullptr, nd, n, nd.out_shape[0],
                                       nd.out_shape[1]);
        Node pwn = nd;
        pwn.kind = OpKind::Dense;
        pwn.units = nd.out_shape[2];
        Tensor gmid(mid.shape());
        Tensor* gpw = nullptr;
        Tensor* gb = nullptr;
        Tensor* gdw = nullptr;
        if (want_param_grads) {
          auto& slots = out.param[static_cast<std::size_t>(i)];
          slots[0] = Tensor(nd.params[0].shape);
          slots[1] = Tensor(nd.params[1].shape);
          gdw = &slots[0];
          gpw = &slots[1];
          if (nd.use_bias) {
            slots[2] = Tensor(nd.params[2].shape);
            gb = &slots[2];
          }
        }
        dense_backward(mid, pv[1], pwn, gy, &gmid, gpw, gb);
        depthwise_backward(x, pv[0], nd, gmid, &grad_slot(nd.inputs[0]), gdw, nullptr);
        break;
      }
      case OpKind::BatchNorm: {
        Tensor& gx = grad_slot(nd.inputs[0]);
        const int c = nd.out_shape.back();
        const std::size_t rows = x.size() / static_cast<std::size_t>(c);
        const bool scaled = nd.params.size() == 4;
        const Tensor& var = pv[scaled ? 3 : 2];
        for (int ci = 0; ci < c; ++ci) {
          const double g0 = scaled ? pv[0][static_cast<std::size_t>(ci)] : 1.0;
          const double s = g0 / std::sqrt(var[static_cast<std::size_t>(ci)] + nd.epsilon);
          for (std::size_t r = 0; r < rows; ++r) {
            gx[r * c + ci] += gy[r * c + ci] * s;
          }
        }
        break;
      }
      case OpKind::ReLU: {
        Tensor& gx = grad_slot(nd.inputs[0]);
        const Tensor& y = tr.act[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < y.size(); ++j) {
          if (y[j] > 0.0) gx[j] += gy[j];
        }
        break;
      }
      case OpKind::MaxPool2D:
        pool_backward(x, nd, gy, grad_slot(nd.inputs[0]), true);
        break;
      case OpKind::AvgPool2D:
        pool_backward(x, nd, gy, grad_slot(nd.inputs[0]), false);
        break;
      case OpKind::ZeroPad2D: {
        Tensor& gx = grad_slot(nd.inputs[0]);
        const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
        for (int b = 0; b < n; ++b)
          for (int y = 0; y < h; ++y)
            for (int xw = 0; xw < w; ++xw)
              for (int ci = 0; ci < c; ++ci)
                gx.at(b, y, xw, ci) += gy.at(b, y + nd.pad_top, xw + nd.pad_left, ci);
        break;
      }
      case OpKind::Add:
        for (int in : nd.inputs) {
          Tensor& gx = grad_slot(in);
          for (std::size_t j = 0; j < gx.size(); ++j) gx[j] += gy[j];
        }
        break;
      case OpKind::Concat: {
        const int ctot = nd.out_shape.back();
        const std::size_t rows = gy.size() / static_cast<std::size_t>(ctot);
        int coff = 0;
        for (int in : nd.inputs) {
          Tensor& gx = grad_slot(in);
          const int cpart = gx.shape().back();
          for (std::size_t r = 0; r < rows; ++r) {
            for (int ci = 0; ci < cpart; ++ci) {
              gx[r * cpart + ci] += gy[r * ctot + coff + ci];
            }
          }
          coff += cpart;
        }
        break;
      }
      case OpKind::Dense: {
        Tensor* gk = nullptr;
        Tensor* gb = nullptr;
        if (want_param_grads) {
          auto& slots = out.param[static_cast<std::size_t>(i)];
          slots[0] = Tensor(nd.params[0].shape);
          slots[1] = Tensor(nd.params[1].shape);
          gk = &slots[0];
          gb = &slots[1];
        }
        dense_backward(x, pv[0], nd, gy, &grad_slot(nd.inputs[0]), gk, gb);
        break;
      }
      case OpKind::Dropout: {
        Tensor& gx = grad_slot(nd.inputs[0]);
        const Tensor& mask = tr.dropout_mask[static_cast<std::size_t>(i)];
        if (mask.empty()) {
          for (std::size_t j = 0; j < gx.size(); ++j) gx[j] += gy[j];
        } else {
          for (std::size_t j = 0; j < gx.size(); ++j) gx[j] += gy[j] * mask[j];
        }
        break;
      }
      case OpKind::Flatten: {
        Tensor& gx = grad_slot(nd.inputs[0]);
        for (std::size_t j = 0; j < gx.size(); ++j) gx[j] += gy[j];
        break;
      }
      case OpKind::Softmax: {
        Tensor& gx = grad_slot(nd.inputs[0]);
        const Tensor& p = tr.act[static_cast<std::size_t>(i)];
        const int k = nd.out_shape.back();
        const std::size_t rows = p.size() / static_cast<std::size_t>(k);
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (int ci = 0; ci < k; ++ci) dot += gy[r * k + ci] * p[r * k + ci];
          for (int ci = 0; ci < k; ++ci) {
            gx[r * k + ci] += p[r * k + ci] * (gy[r * k + ci] - dot);
          }
        }
        break;
      }
      case OpKind::Input:
        break;
    }
  }
  return out;
}

}  // namespace slrkit
