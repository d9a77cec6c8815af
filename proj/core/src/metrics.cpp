#include "slrkit/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"
#include "slrkit/errors.hpp"
#include "slrkit/image.hpp"
#include "slrkit/tensor.hpp"

namespace slrkit {

namespace {

using nlohmann::json;

double safe_div(long long num, long long den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (const auto& row : counts) {
    for (long long c : row) t += c;
  }
  return t;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred, int k,
                                 std::vector<std::string> class_names) {
  if (y_true.size() != y_pred.size()) {
    throw DataError("y_true and y_pred have different lengths");
  }
  if (!class_names.empty() && static_cast<int>(class_names.size()) != k) {
    throw ConfigError("class name count does not match K");
  }
  ConfusionMatrix cm;
  cm.counts.assign(static_cast<std::size_t>(k),
                   std::vector<long long>(static_cast<std::size_t>(k), 0));
  cm.class_names = std::move(class_names);
  if (cm.class_names.empty()) {
    for (int c = 0; c < k; ++c) cm.class_names.push_back("class_" + std::to_string(c));
  }
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= k || p < 0 || p >= k) {
      throw DataError("label outside [0, " + std::to_string(k) + ") at sample " +
                      std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  const int k = cm.k();
  std::vector<ClassMetrics> out(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    ClassMetrics& m = out[static_cast<std::size_t>(c)];
    long long row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
      col += cm.counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
    }
    m.tp = cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    m.fp = col - m.tp;
    m.fn = row - m.tp;
    m.support = row;
    m.precision = safe_div(m.tp, m.tp + m.fp, m.degenerate);
    m.recall = safe_div(m.tp, m.tp + m.fn, m.degenerate);
    if (m.precision + m.recall > 0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
      m.f1 = 0.0;
      m.degenerate = true;
    }
  }
  return out;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  MetricsReport rep;
  rep.class_names = cm.class_names;
  rep.per_class = per_class_metrics(cm);
  const int k = cm.k();

  long long diag = 0, total = 0, tp = 0, fp = 0, fn = 0, support = 0;
  for (const auto& m : rep.per_class) {
    rep.macro.precision += m.precision;
    rep.macro.recall += m.recall;
    rep.macro.f1 += m.f1;
    rep.weighted.precision += m.precision * static_cast<double>(m.support);
    rep.weighted.recall += m.recall * static_cast<double>(m.support);
    rep.weighted.f1 += m.f1 * static_cast<double>(m.support);
    tp += m.tp;
    fp += m.fp;
    fn += m.fn;
    support += m.support;
    diag += m.tp;
  }
  total = cm.total();
  if (k > 0) {
    rep.macro.precision /= k;
    rep.macro.recall /= k;
    rep.macro.f1 /= k;
  }
  if (support > 0) {
    rep.weighted.precision /= static_cast<double>(support);
    rep.weighted.recall /= static_cast<double>(support);
    rep.weighted.f1 /= static_cast<double>(support);
  }
  bool deg = false;
  rep.micro.precision = safe_div(tp, tp + fp, deg);
  rep.micro.recall = safe_div(tp, tp + fn, deg);
  rep.micro.f1 = (rep.micro.precision + rep.micro.recall > 0)
                     ? 2.0 * rep.micro.precision * rep.micro.recall /
                           (rep.micro.precision + rep.micro.recall)
                     : 0.0;
  rep.accuracy = total > 0 ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
  return rep;
}

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& m) {
  json per = json::array();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& pc = m.per_class[c];
    per.push_back({{"class", m.class_names[c]},
                   {"tp", pc.tp},
                   {"fp", pc.fp},
                   {"fn", pc.fn},
                   {"support", pc.support},
                   {"precision", pc.precision},
                   {"recall", pc.recall},
                   {"f1", pc.f1},
                   {"degenerate", pc.degenerate}});
  }
  auto agg = [](const AggregateMetrics& a) {
    return json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
  };
  json j{{"per_class", per},
         {"macro", agg(m.macro)},
         {"micro", agg(m.micro)},
         {"weighted", agg(m.weighted)},
         {"accuracy", m.accuracy}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write metrics " + path.string());
  os << j.dump(2) << '\n';
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write confusion matrix " + path.string());
  os << "true\\pred";
  for (const auto& name : cm.class_names) os << ',' << name;
  os << '\n';
  for (int i = 0; i < cm.k(); ++i) {
    os << cm.class_names[static_cast<std::size_t>(i)];
    for (long long c : cm.counts[static_cast<std::size_t>(i)]) os << ',' << c;
    os << '\n';
  }
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read confusion matrix " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty confusion CSV " + path.string());
  ConfusionMatrix cm;
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // corner label
    while (std::getline(ss, cell, ',')) cm.class_names.push_back(cell);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // row class name
    std::vector<long long> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stoll(cell));
    if (row.size() != cm.class_names.size()) {
      throw DataError("malformed confusion CSV row in " + path.string());
    }
    cm.counts.push_back(std::move(row));
  }
  if (cm.counts.size() != cm.class_names.size()) {
    throw DataError("confusion CSV is not square: " + path.string());
  }
  return cm;
}

void render_confusion_png(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  const int k = cm.k();
  const int cell = 32;
  long long max_cell = 0;
  for (const auto& row : cm.counts) {
    for (long long c : row) max_cell = std::max(max_cell, c);
  }
  Tensor img({k * cell, k * cell, 3});
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double t = max_cell > 0
          ? static_cast<double>(cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) /
                static_cast<double>(max_cell)
          : 0.0;
      // white (255,255,255) -> blue (8,48,107)
      const double r = 255.0 + t * (8.0 - 255.0);
      const double g = 255.0 + t * (48.0 - 255.0);
      const double b = 255.0 + t * (107.0 - 255.0);
      for (int y = i * cell; y < (i + 1) * cell; ++y) {
        for (int x = j * cell; x < (j + 1) * cell; ++x) {
          const std::size_t base = (static_cast<std::size_t>(y) * k * cell + x) * 3;
          img[base + 0] = r;
          img[base + 1] = g;
          img[base + 2] = b;
        }
      }
    }
  }
  write_png(path, img);
}

}  // namespace slrkit
