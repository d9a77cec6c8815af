#include "slrkit/model.hpp"

#include <fstream>

#include "nlohmann/json.hpp"
#include "slrkit/errors.hpp"
#include "slrkit/serialize.hpp"

namespace slrkit {

namespace {

using nlohmann::json;

void append_head(Graph& g, const HeadSpec& head) {
  const auto& fs = g.node(g.output()).out_shape;
  if (fs.size() != 3) throw ConfigError("head expects a (h, w, c) backbone feature map");
  int x = g.output();
  x = g.add_dense(x, head.dense1, true, "head_dense1");
  x = g.add_relu(x, "head_relu1");
  x = g.add_dropout(x, head.dropout_rate, "head_dropout1");
  x = g.add_flatten(x, "head_flatten");
  x = g.add_dense(x, head.dense2, true, "head_dense2");
  x = g.add_relu(x, "head_relu2");
  x = g.add_dropout(x, head.dropout_rate, "head_dropout2");
  x = g.add_dense(x, head.dense3, true, "head_dense3");
  x = g.add_relu(x, "head_relu3");
  x = g.add_dropout(x, head.dropout_rate, "head_dropout3");
  x = g.add_dense(x, head.classes, true, "head_logits");
  g.add_softmax(x, "head_softmax");
}

json backbone_to_json(const BackboneSpec& b) {
  return json{{"architecture", to_string(b.architecture)},
              {"input_side", b.input_side},
              {"weights_path", b.weights_path},
              {"seed", b.seed}};
}

BackboneSpec backbone_from_json(const json& j) {
  BackboneSpec b;
  b.architecture = parse_architecture(j.at("architecture").get<std::string>());
  b.input_side = j.at("input_side").get<int>();
  b.weights_path = j.at("weights_path").get<std::string>();
  b.seed = j.at("seed").get<std::uint64_t>();
  return b;
}

json head_to_json(const HeadSpec& h) {
  return json{{"dense1", h.dense1},
              {"dense2", h.dense2},
              {"dense3", h.dense3},
              {"classes", h.classes},
              {"dropout_rate", h.dropout_rate}};
}

HeadSpec head_from_json(const json& j) {
  HeadSpec h;
  h.dense1 = j.at("dense1").get<int>();
  h.dense2 = j.at("dense2").get<int>();
  h.dense3 = j.at("dense3").get<int>();
  h.classes = j.at("classes").get<int>();
  h.dropout_rate = j.at("dropout_rate").get<double>();
  return h;
}

void load_backbone_weights(ModelHandle& m) {
  const auto named = read_tensor_map(m.backbone.weights_path);
  for (int i = 0; i <= m.feature_node; ++i) {
    const Node& nd = m.graph.node(i);
    for (std::size_t p = 0; p < nd.params.size(); ++p) {
      const ParamDesc& pd = nd.params[p];
      auto it = named.find(pd.name);
      if (it == named.end()) {
        throw IoError("pretrained weights file " + m.backbone.weights_path +
                      " is missing tensor '" + pd.name + "'");
      }
      if (it->second.shape() != pd.shape) {
        throw IoError("pretrained tensor '" + pd.name + "' has the wrong shape");
      }
      m.params.values[static_cast<std::size_t>(i)][p] = it->second;
    }
  }
  m.backbone_weights_loaded = true;
}

}  // namespace

ModelHandle assemble_model(const BackboneSpec& backbone, const HeadSpec& head,
                           std::uint64_t head_seed,
                           std::vector<std::string> class_names) {
  if (!class_names.empty() && static_cast<int>(class_names.size()) != head.classes) {
    throw ConfigError("head classes (" + std::to_string(head.classes) +
                      ") do not match the number of class names (" +
                      std::to_string(class_names.size()) + ")");
  }
  ModelHandle m;
  m.graph = build_backbone_graph(backbone.architecture, backbone.input_side);
  m.feature_node = m.graph.output();
  append_head(m.graph, head);
  m.backbone = backbone;
  m.head = head;
  m.head_seed = head_seed;
  m.class_names = std::move(class_names);
  if (m.class_names.empty()) {
    for (int k = 0; k < head.classes; ++k) m.class_names.push_back("class_" + std::to_string(k));
  }
  m.input_node = 0;
  m.softmax_node = m.graph.output();
  m.logits_node = m.softmax_node - 1;

  m.params = make_param_store(m.graph);
  if (backbone.architecture == Architecture::Tiny) {
    init_params(m.graph, m.params, backbone.seed, /*include_nontrainable=*/true);
    m.backbone_weights_loaded = true;
  }
  // Head init runs after any backbone init so the head seed fully determines
  // the trainable weights.
  init_params(m.graph, m.params, head_seed, /*include_nontrainable=*/false);
  if (backbone.architecture != Architecture::Tiny && !backbone.weights_path.empty()) {
    load_backbone_weights(m);
  }
  return m;
}

void require_backbone_weights(const ModelHandle& model) {
  if (!model.backbone_weights_loaded) {
    throw IoError("pretrained weights for backbone '" +
                  to_string(model.backbone.architecture) +
                  "' are not available; supply --weights <file> (weights are never "
                  "silently randomized)");
  }
}

std::pair<std::int64_t, std::int64_t> count_parameters(const ModelHandle& model) {
  return {model.graph.trainable_param_count(), model.graph.nontrainable_param_count()};
}

Tensor predict(const ModelHandle& model, const Tensor& batch) {
  require_backbone_weights(model);
  auto tr = forward(model.graph, model.params, {{model.input_node, batch}},
                    model.softmax_node);
  return tr.act[static_cast<std::size_t>(model.softmax_node)];
}

Tensor extract_features(const ModelHandle& model, const Tensor& batch) {
  require_backbone_weights(model);
  auto tr = forward(model.graph, model.params, {{model.input_node, batch}},
                    model.feature_node);
  return tr.act[static_cast<std::size_t>(model.feature_node)];
}

void save_checkpoint(const ModelHandle& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  json j{{"backbone", backbone_to_json(model.backbone)},
         {"head", head_to_json(model.head)},
         {"class_names", model.class_names},
         {"head_seed", model.head_seed}};
  std::ofstream os(dir / "model.json");
  if (!os) throw IoError("cannot write " + (dir / "model.json").string());
  os << j.dump(2) << '\n';

  std::vector<std::pair<std::string, const Tensor*>> trainable;
  for (int i = 0; i < model.graph.size(); ++i) {
    const Node& nd = model.graph.node(i);
    for (std::size_t p = 0; p < nd.params.size(); ++p) {
      if (nd.params[p].trainable) {
        trainable.emplace_back(nd.params[p].name,
                               &model.params.values[static_cast<std::size_t>(i)][p]);
      }
    }
  }
  write_tensor_map(dir / "head_weights.bin", trainable);
}

ModelHandle load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream is(dir / "model.json");
  if (!is) throw IoError("cannot read " + (dir / "model.json").string());
  json j = json::parse(is);
  ModelHandle m = assemble_model(backbone_from_json(j.at("backbone")),
                                 head_from_json(j.at("head")),
                                 j.at("head_seed").get<std::uint64_t>(),
                                 j.at("class_names").get<std::vector<std::string>>());
  const auto named = read_tensor_map(dir / "head_weights.bin");
  for (int i = 0; i < m.graph.size(); ++i) {
    const Node& nd = m.graph.node(i);
    for (std::size_t p = 0; p < nd.params.size(); ++p) {
      if (!nd.params[p].trainable) continue;
      auto it = named.find(nd.params[p].name);
      if (it == named.end()) {
        throw IoError("checkpoint is missing head tensor '" + nd.params[p].name + "'");
      }
      if (it->second.shape() != nd.params[p].shape) {
        throw IoError("checkpoint tensor '" + nd.params[p].name + "' has the wrong shape");
      }
      m.params.values[static_cast<std::size_t>(i)][p] = it->second;
    }
  }
  return m;
}

}  // namespace slrkit
