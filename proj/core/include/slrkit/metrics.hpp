#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace slrkit {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::vector<long long>> counts;
  std::vector<std::string> class_names;
  int k() const { return static_cast<int>(counts.size()); }
  long long total() const;
};

struct ClassMetrics {
  long long tp = 0, fp = 0, fn = 0;
  long long support = 0;  // true count of the class
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool degenerate = false;  // a zero denominator was hit (metric reported as 0)
};

struct AggregateMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  AggregateMetrics macro, micro, weighted;
  double accuracy = 0.0;
  std::vector<std::string> class_names;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred, int k,
                                 std::vector<std::string> class_names = {});

// Per class k: TP = cm[k][k], FP = column sum - TP, FN = row sum - TP;
// precision, recall, F1 with the zero-denominator-yields-0 convention.
std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);

MetricsReport compute_metrics(const ConfusionMatrix& cm);

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& m);

// CSV: exact integer matrix with class-name header row and column.
void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);

// Heatmap on a white-to-blue scale normalized to the largest cell.
void render_confusion_png(const std::filesystem::path& path, const ConfusionMatrix& cm);

}  // namespace slrkit
