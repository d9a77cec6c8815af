#include "slrkit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>

#include "nlohmann/json.hpp"
#include "slrkit/errors.hpp"
#include "slrkit/graph_exec.hpp"
#include "slrkit/math.hpp"
#include "slrkit/rng.hpp"

namespace slrkit {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void validate(const TrainConfig& c) {
  if (c.learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.label_smoothing < 0 || c.label_smoothing >= 1) {
    throw ConfigError("label_smoothing must be in [0, 1)");
  }
  if (c.dropout_rate < 0 || c.dropout_rate >= 1) {
    throw ConfigError("dropout_rate must be in [0, 1)");
  }
}

int argmax_row(const Tensor& t, int row) {
  const int k = t.dim(1);
  int best = 0;
  for (int j = 1; j < k; ++j) {
    if (t.at(row, j) > t.at(row, best)) best = j;
  }
  return best;
}

// Rows of a rank-N tensor gathered by index along the batch axis.
Tensor gather_rows(const Tensor& t, std::span<const int> rows) {
  std::vector<int> shape = t.shape();
  shape[0] = static_cast<int>(rows.size());
  const std::size_t stride = t.size() / static_cast<std::size_t>(t.dim(0));
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(t.data() + static_cast<std::size_t>(rows[i]) * stride, stride,
                out.data() + i * stride);
  }
  return out;
}

struct AdamState {
  std::vector<std::vector<Tensor>> m, v;
  std::int64_t t = 0;
};

}  // namespace

TrainConfig read_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "learning_rate") base.learning_rate = std::stod(val);
      else if (key == "batch_size") base.batch_size = std::stoi(val);
      else if (key == "epochs") base.epochs = std::stoi(val);
      else if (key == "adam_beta1") base.adam_beta1 = std::stod(val);
      else if (key == "adam_beta2") base.adam_beta2 = std::stod(val);
      else if (key == "adam_epsilon") base.adam_epsilon = std::stod(val);
      else if (key == "label_smoothing") base.label_smoothing = std::stod(val);
      else if (key == "dropout_rate") base.dropout_rate = std::stod(val);
      else if (key == "seed") base.seed = std::stoull(val);
      else throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                             ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": cannot parse value '" + val + "' for '" + key + "'");
    }
  }
  validate(base);
  return base;
}

std::pair<double, double> loss_and_accuracy(const Tensor& probs,
                                            const Tensor& labels_onehot,
                                            double label_smoothing) {
  const int n = probs.dim(0);
  const int k = probs.dim(1);
  if (n == 0) return {0.0, 0.0};
  double loss = 0.0;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const int y = argmax_row(labels_onehot, i);
    loss += cross_entropy_lsr({probs.data() + static_cast<std::size_t>(i) * k,
                               static_cast<std::size_t>(k)},
                              y, label_smoothing, k);
    if (argmax_row(probs, i) == y) ++hits;
  }
  return {loss / n, static_cast<double>(hits) / n};
}

TrainingHistory train_model(ModelHandle& model, const ImageBatch& train_set,
                            const ImageBatch& val_set, const TrainConfig& cfg) {
  validate(cfg);
  if (train_set.size() == 0) throw DataError("training set is empty");
  const int k = train_set.labels_onehot.dim(1);
  if (k != model.head.classes) {
    throw ConfigError("model has " + std::to_string(model.head.classes) +
                      " classes but the data has " + std::to_string(k));
  }

  TrainingHistory history;
  if (cfg.epochs == 0) return history;

  // The backbone is frozen, so its features are computed once and every
  // optimization step replays the head from the cached feature map.
  const Tensor train_feats = extract_features(model, train_set.data);
  const Tensor val_feats =
      val_set.size() > 0 ? extract_features(model, val_set.data) : Tensor();
  const int n = train_set.size();

  AdamState adam;
  adam.m.resize(model.params.values.size());
  adam.v.resize(model.params.values.size());
  for (int i = 0; i < model.graph.size(); ++i) {
    const Node& nd = model.graph.node(i);
    adam.m[static_cast<std::size_t>(i)].resize(nd.params.size());
    adam.v[static_cast<std::size_t>(i)].resize(nd.params.size());
    for (std::size_t p = 0; p < nd.params.size(); ++p) {
      if (nd.params[p].trainable) {
        adam.m[static_cast<std::size_t>(i)][p] = Tensor(nd.params[p].shape);
        adam.v[static_cast<std::size_t>(i)][p] = Tensor(nd.params[p].shape);
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch), 1);
    Rng dropout_rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch), 2);
    shuffle_rng.shuffle(order);

    for (int start = 0, batch_index = 0; start < n;
         start += cfg.batch_size, ++batch_index) {
      const int nb = std::min(cfg.batch_size, n - start);
      const Tensor bx = gather_rows(train_feats, {order.data() + start,
                                                  static_cast<std::size_t>(nb)});
      const Tensor by = gather_rows(train_set.labels_onehot,
                                    {order.data() + start, static_cast<std::size_t>(nb)});

      auto tr = forward(model.graph, model.params, {{model.feature_node, bx}},
                        model.logits_node, /*training=*/true, &dropout_rng);
      const Tensor& logits = tr.act[static_cast<std::size_t>(model.logits_node)];

      // Softmax + cross entropy folded into the analytic logit gradient
      // (p - s') / nb; the batch loss is tracked only as a health check.
      Tensor grad({nb, k});
      double batch_loss = 0.0;
      for (int i = 0; i < nb; ++i) {
        const std::span<const double> row{logits.data() + static_cast<std::size_t>(i) * k,
                                          static_cast<std::size_t>(k)};
        const auto p = softmax(row);
        const int y = argmax_row(by, i);
        batch_loss += cross_entropy_lsr(p, y, cfg.label_smoothing, k);
        const auto target = smoothed_target(y, cfg.label_smoothing, k);
        for (int j = 0; j < k; ++j) {
          grad.at(i, j) = (p[static_cast<std::size_t>(j)] -
                           target[static_cast<std::size_t>(j)]) / nb;
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite training loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }

      auto grads = backward(model.graph, model.params, tr, model.logits_node, grad,
                            /*want_param_grads=*/true);

      ++adam.t;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.t));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.t));
      for (int i = 0; i < model.graph.size(); ++i) {
        const Node& nd = model.graph.node(i);
        for (std::size_t p = 0; p < nd.params.size(); ++p) {
          if (!nd.params[p].trainable) continue;
          Tensor& g = grads.param[static_cast<std::size_t>(i)][p];
          if (g.empty()) continue;
          Tensor& w = model.params.values[static_cast<std::size_t>(i)][p];
          Tensor& m = adam.m[static_cast<std::size_t>(i)][p];
          Tensor& v = adam.v[static_cast<std::size_t>(i)][p];
          for (std::size_t e = 0; e < w.size(); ++e) {
            m[e] = cfg.adam_beta1 * m[e] + (1.0 - cfg.adam_beta1) * g[e];
            v[e] = cfg.adam_beta2 * v[e] + (1.0 - cfg.adam_beta2) * g[e] * g[e];
            w[e] -= cfg.learning_rate * (m[e] / bc1) /
                    (std::sqrt(v[e] / bc2) + cfg.adam_epsilon);
          }
        }
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    {
      auto tr = forward(model.graph, model.params, {{model.feature_node, train_feats}},
                        model.softmax_node);
      std::tie(rec.train_loss, rec.train_accuracy) =
          loss_and_accuracy(tr.act[static_cast<std::size_t>(model.softmax_node)],
                            train_set.labels_onehot, cfg.label_smoothing);
    }
    if (val_set.size() > 0) {
      auto tr = forward(model.graph, model.params, {{model.feature_node, val_feats}},
                        model.softmax_node);
      std::tie(rec.val_loss, rec.val_accuracy) =
          loss_and_accuracy(tr.act[static_cast<std::size_t>(model.softmax_node)],
                            val_set.labels_onehot, cfg.label_smoothing);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(rec);
  }
  return history;
}

void write_history_json(const std::filesystem::path& path, const TrainingHistory& h) {
  json rows = json::array();
  for (const auto& r : h.epochs) {
    rows.push_back({{"epoch", r.epoch},
                    {"train_loss", r.train_loss},
                    {"train_accuracy", r.train_accuracy},
                    {"val_loss", r.val_loss},
                    {"val_accuracy", r.val_accuracy},
                    {"seconds", r.seconds}});
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot write history " + path.string());
  os << json{{"epochs", rows}}.dump(2) << '\n';
}

void write_history_csv(const std::filesystem::path& path, const TrainingHistory& h) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write history " + path.string());
  os << "epoch,train_loss,train_accuracy,val_loss,val_accuracy,seconds\n";
  os.precision(17);
  for (const auto& r : h.epochs) {
    os << r.epoch << ',' << r.train_loss << ',' << r.train_accuracy << ','
       << r.val_loss << ',' << r.val_accuracy << ',' << r.seconds << '\n';
  }
}

}  // namespace slrkit
