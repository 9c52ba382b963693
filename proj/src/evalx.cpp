#include "sdflow/evalx.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sdflow/error.hpp"
#include "sdflow/io_util.hpp"

namespace sdflow {

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::kLengthMismatch, "confusion: label and prediction lengths differ");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool actual = y_true[i] != 0;
    const bool predicted = y_pred[i] != 0;
    if (actual && predicted) ++c.tp;
    else if (!actual && predicted) ++c.fp;
    else if (!actual && !predicted) ++c.tn;
    else ++c.fn;
  }
  return c;
}

namespace {

Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricBundle metrics(const ConfusionCounts& c) {
  MetricBundle b;
  b.precision = ratio(c.tp, c.tp + c.fp);
  b.recall = ratio(c.tp, c.tp + c.fn);
  b.specificity = ratio(c.tn, c.tn + c.fp);
  b.npv = ratio(c.tn, c.tn + c.fn);
  b.accuracy = ratio(c.tp + c.tn, c.total());
  // 2TP / (2TP + FP + FN) equals the harmonic mean whenever both are defined.
  if (b.precision && b.recall) {
    b.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  }
  if (b.recall && b.specificity) b.balanced_accuracy = (*b.recall + *b.specificity) / 2.0;
  return b;
}

std::string format_metric(const Metric& m, int precision) {
  if (!m) return "n/a";
  return fmt::format("{:.{}f}", *m, precision);
}

Metric metric_by_name(const MetricBundle& b, const std::string& name) {
  if (name == "precision") return b.precision;
  if (name == "recall") return b.recall;
  if (name == "f1") return b.f1;
  if (name == "specificity") return b.specificity;
  if (name == "npv") return b.npv;
  if (name == "accuracy") return b.accuracy;
  if (name == "balanced_accuracy") return b.balanced_accuracy;
  throw Error(ErrorCode::kInvalidConfig, "unknown metric: " + name);
}

RocCurve roc(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) {
    throw Error(ErrorCode::kLengthMismatch, "roc: label and score lengths differ");
  }
  const auto positives = static_cast<std::uint64_t>(std::count_if(
      y_true.begin(), y_true.end(), [](int v) { return v != 0; }));
  const std::uint64_t negatives = y_true.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kSingleClass, "roc needs at least one positive and one negative");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  // Twice the area in units of one (positive, negative) pair, kept exact.
  unsigned __int128 twice_area = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::uint64_t group_tp = 0;
    std::uint64_t group_fp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (y_true[order[i]] != 0) ++group_tp;
      else ++group_fp;
    }
    twice_area += static_cast<unsigned __int128>(group_fp) * (2 * tp + group_tp);
    tp += group_tp;
    fp += group_fp;
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives)});
  }
  curve.auroc = static_cast<double>(static_cast<long double>(twice_area) /
                                    (2.0L * static_cast<long double>(positives) *
                                     static_cast<long double>(negatives)));
  return curve;
}

const EvalCell* EvalReport::find(std::uint32_t m, const std::string& predictor) const {
  for (const auto& c : cells) {
    if (c.m == m && c.predictor == predictor) return &c;
  }
  return nullptr;
}

namespace {

nlohmann::json metric_json(const Metric& m) {
  return m ? nlohmann::json(*m) : nlohmann::json(nullptr);
}

Metric metric_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json cell = {{"m", c.m},
                           {"predictor", c.predictor},
                           {"ok", c.ok},
                           {"train_rows", c.train_rows},
                           {"test_rows", c.test_rows},
                           {"test_positives", c.test_positives}};
    if (!c.ok) {
      cell["failure_reason"] = c.failure_reason;
    } else {
      cell["confusion"] = {{"tp", c.counts.tp}, {"fp", c.counts.fp}, {"tn", c.counts.tn}, {"fn", c.counts.fn}};
      cell["metrics"] = {{"precision", metric_json(c.metrics.precision)},
                         {"recall", metric_json(c.metrics.recall)},
                         {"f1", metric_json(c.metrics.f1)},
                         {"specificity", metric_json(c.metrics.specificity)},
                         {"npv", metric_json(c.metrics.npv)},
                         {"accuracy", metric_json(c.metrics.accuracy)},
                         {"balanced_accuracy", metric_json(c.metrics.balanced_accuracy)}};
      if (c.roc) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : c.roc->points) pts.push_back({p.fpr, p.tpr});
        cell["roc"] = {{"auroc", c.roc->auroc}, {"points", pts}};
      } else {
        cell["roc"] = nullptr;
      }
    }
    arr.push_back(std::move(cell));
  }
  return {{"format_version", 1}, {"cells", arr}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport report;
  try {
    for (const auto& cj : j.at("cells")) {
      EvalCell c;
      c.m = cj.at("m").get<std::uint32_t>();
      c.predictor = cj.at("predictor").get<std::string>();
      c.ok = cj.at("ok").get<bool>();
      c.train_rows = cj.at("train_rows").get<std::size_t>();
      c.test_rows = cj.at("test_rows").get<std::size_t>();
      c.test_positives = cj.at("test_positives").get<std::size_t>();
      if (!c.ok) {
        c.failure_reason = cj.value("failure_reason", "");
      } else {
        const auto& conf = cj.at("confusion");
        c.counts = {conf.at("tp").get<std::uint64_t>(), conf.at("fp").get<std::uint64_t>(),
                    conf.at("tn").get<std::uint64_t>(), conf.at("fn").get<std::uint64_t>()};
        const auto& mj = cj.at("metrics");
        c.metrics = {metric_from(mj, "precision"), metric_from(mj, "recall"), metric_from(mj, "f1"),
                     metric_from(mj, "specificity"), metric_from(mj, "npv"),
                     metric_from(mj, "accuracy"), metric_from(mj, "balanced_accuracy")};
        if (!cj.at("roc").is_null()) {
          RocCurve curve;
          curve.auroc = cj.at("roc").at("auroc").get<double>();
          for (const auto& p : cj.at("roc").at("points")) curve.points.push_back({p[0].get<double>(), p[1].get<double>()});
          c.roc = std::move(curve);
        }
      }
      report.cells.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kDataError, std::string("eval report: ") + ex.what());
  }
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "m,predictor,status,train_rows,test_rows,test_positives,tp,fp,tn,fn,"
         "precision,recall,f1,specificity,npv,accuracy,balanced_accuracy,auroc\n";
  auto num = [](const Metric& m) { return m ? format_double(*m) : std::string("n/a"); };
  for (const auto& c : cells) {
    out << c.m << ',' << c.predictor << ',' << (c.ok ? "ok" : "failed") << ',' << c.train_rows << ','
        << c.test_rows << ',' << c.test_positives << ',';
    if (!c.ok) {
      out << ",,,,,,,,,,,\n";
      continue;
    }
    out << c.counts.tp << ',' << c.counts.fp << ',' << c.counts.tn << ',' << c.counts.fn << ','
        << num(c.metrics.precision) << ',' << num(c.metrics.recall) << ',' << num(c.metrics.f1) << ','
        << num(c.metrics.specificity) << ',' << num(c.metrics.npv) << ',' << num(c.metrics.accuracy)
        << ',' << num(c.metrics.balanced_accuracy) << ','
        << (c.roc ? format_double(c.roc->auroc) : std::string("n/a")) << '\n';
  }
  return out.str();
}

std::string roc_to_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : curve.points) out += format_double(p.fpr) + ',' + format_double(p.tpr) + '\n';
  return out;
}

}  // namespace sdflow
