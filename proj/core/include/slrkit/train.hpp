#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "slrkit/dataset.hpp"
#include "slrkit/model.hpp"
#include "slrkit/tensor.hpp"

namespace slrkit {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 128;
  int epochs = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double label_smoothing = 0.0;  // eps; 0 is plain categorical cross entropy
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;
};

// Plain-text config: one `key = value` per line, '#' comments. Keys match
// the TrainConfig field names exactly; unknown keys are rejected.
TrainConfig read_train_config(const std::filesystem::path& path,
                              TrainConfig base = {});

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
};

// Mean label-smoothed cross entropy + accuracy of probability rows against
// one-hot labels.
std::pair<double, double> loss_and_accuracy(const Tensor& probs,
                                            const Tensor& labels_onehot,
                                            double label_smoothing);

// Adam on the head only; the backbone stays frozen (its features are
// computed once and cached). Per-epoch shuffle order and dropout masks are
// derived from cfg.seed, so a fixed seed reproduces the loss trajectory.
// Epoch-end metrics are measured on the full sets in inference mode.
TrainingHistory train_model(ModelHandle& model, const ImageBatch& train_set,
                            const ImageBatch& val_set, const TrainConfig& cfg);

void write_history_json(const std::filesystem::path& path, const TrainingHistory& h);
void write_history_csv(const std::filesystem::path& path, const TrainingHistory& h);

}  // namespace slrkit
