#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "slrkit/graph.hpp"
#include "slrkit/rng.hpp"
#include "slrkit/tensor.hpp"

namespace slrkit {

// Parameter values parallel to Graph::nodes(). An empty tensor means the
// parameter was never materialized (counting-only graphs stay cheap).
struct ParamStore {
  std::vector<std::vector<Tensor>> values;
};

ParamStore make_param_store(const Graph& g);

// Fan-based (Glorot) uniform for kernels, zeros for biases, identity for
// batch norm. Deterministic per (seed, node id, param index), so the same
// seed always yields bit-identical weights regardless of call order.
void init_params(const Graph& g, ParamStore& ps, std::uint64_t seed,
                 bool include_nontrainable);

// True when every parameter of every node in [0, upto] that has parameters
// is materialized.
bool params_ready(const Graph& g, const ParamStore& ps, int upto);

struct ForwardTrace {
  std::vector<Tensor> act;           // batch activation per node (may be empty)
  std::vector<Tensor> dropout_mask;  // kept-and-scaled mask per Dropout node
};

// Evaluates every node up to output_node whose inputs are available.
// `bindings` pins activations for specific nodes (the Input node, or an
// intermediate feature node when replaying cached backbone features).
ForwardTrace forward(const Graph& g, const ParamStore& ps,
                     const std::vector<std::pair<int, Tensor>>& bindings,
                     int output_node, bool training = false, Rng* rng = nullptr);

struct Gradients {
  std::vector<std::vector<Tensor>> param;  // layout of ParamStore
  std::vector<Tensor> act;                 // gradient wrt each node's activation
};

// Reverse sweep from `from_node`, seeded with dL/d(act[from_node]).
// Activation gradients are produced for every upstream node that was
// evaluated in the trace; parameter gradients only when requested.
Gradients backward(const Graph& g, const ParamStore& ps, const ForwardTrace& tr,
                   int from_node, const Tensor& seed, bool want_param_grads);

}  // namespace slrkit
