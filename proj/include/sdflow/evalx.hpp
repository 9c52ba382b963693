#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sdflow {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Throws Error(kLengthMismatch).
ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred);

// nullopt marks a 0/0 metric.
using Metric = std::optional<double>;

struct MetricBundle {
  Metric precision;
  Metric recall;
  Metric f1;
  Metric specificity;
  Metric npv;
  Metric accuracy;
  Metric balanced_accuracy;
};

MetricBundle metrics(const ConfusionCounts& counts);

std::string format_metric(const Metric& m, int precision = 4);

// Looks up a metric by name (precision, recall, f1, specificity, npv,
// accuracy, balanced_accuracy). Throws Error(kInvalidConfig) for other names.
Metric metric_by_name(const MetricBundle& bundle, const std::string& name);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) ... (1,1)
  double auroc = 0.0;
};

// Sweeps descending unique scores; rows with equal scores move together.
// Throws Error(kLengthMismatch) or Error(kSingleClass).
RocCurve roc(std::span<const int> y_true, std::span<const double> scores);

struct EvalCell {
  std::uint32_t m = 0;
  std::string predictor;
  bool ok = false;
  std::string failure_reason;
  ConfusionCounts counts;
  MetricBundle metrics;
  std::optional<RocCurve> roc;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t test_positives = 0;
};

struct EvalReport {
  std::vector<EvalCell> cells;

  const EvalCell* find(std::uint32_t m, const std::string& predictor) const;
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  // One row per cell with every scalar metric.
  std::string to_csv() const;
};

std::string roc_to_csv(const RocCurve& curve);

}  // namespace sdflow
