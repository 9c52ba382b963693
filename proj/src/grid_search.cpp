#include <algorithm>
#include <numeric>

#include "sdflow/error.hpp"
#include "sdflow/evalx.hpp"
#include "sdflow/models.hpp"
#include "sdflow/parallel.hpp"
#include "sdflow/rng.hpp"

namespace sdflow {

std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidConfig, "cross-validation needs k >= 2");
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? positives : negatives).push_back(i);

  Rng rng(seed);
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  };
  shuffle(positives);
  shuffle(negatives);

  std::vector<std::size_t> fold(y.size());
  std::size_t slot = 0;
  // Negatives continue where positives stopped so fold sizes stay within one.
  for (std::size_t i : positives) fold[i] = slot++ % k;
  for (std::size_t i : negatives) fold[i] = slot++ % k;
  return fold;
}

nlohmann::json GridSearchResult::to_json(const std::vector<PredictorParams>& grid) const {
  nlohmann::json candidates = nlohmann::json::array();
  for (std::size_t c = 0; c < cv_scores.size(); ++c) {
    const auto& scores = cv_scores[c];
    const double mean = scores.empty() ? 0.0
                                       : std::accumulate(scores.begin(), scores.end(), 0.0) /
                                             static_cast<double>(scores.size());
    candidates.push_back({{"params", c < grid.size() ? params_to_json(grid[c]) : nlohmann::json()},
                          {"fold_scores", scores},
                          {"mean_score", mean}});
  }
  return {{"selection_metric", selection_metric},
          {"best_index", best_index},
          {"best_params", params_to_json(best_params)},
          {"candidates", candidates}};
}

GridSearchResult grid_search_cv(const std::vector<PredictorParams>& grid, const DatasetMatrix& data,
                                std::size_t k, const std::string& metric, std::uint64_t seed,
                                unsigned threads) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidConfig, "grid search needs at least one candidate");
  if (k < 2) throw Error(ErrorCode::kInvalidConfig, "cross-validation needs k >= 2");
  metric_by_name(MetricBundle{}, metric);  // validates the name
  for (const auto& p : grid) validate(p);

  const std::size_t pos = data.positives();
  const std::size_t neg = data.rows - pos;
  if (pos < k || neg < k) {
    throw Error(ErrorCode::kDegenerateLabels,
                "stratified " + std::to_string(k) + "-fold CV needs >= " + std::to_string(k) +
                    " rows of each class (have " + std::to_string(pos) + " positive, " +
                    std::to_string(neg) + " negative)");
  }

  const auto fold_of = stratified_folds(data.y, k, seed);
  std::vector<DatasetMatrix> train_parts(k);
  std::vector<DatasetMatrix> valid_parts(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> valid_rows;
    for (std::size_t r = 0; r < data.rows; ++r) (fold_of[r] == f ? valid_rows : train_rows).push_back(r);
    train_parts[f] = data.subset(train_rows);
    valid_parts[f] = data.subset(valid_rows);
  }

  GridSearchResult result;
  result.selection_metric = metric;
  result.cv_scores.assign(grid.size(), std::vector<double>(k, 0.0));
  parallel_for(grid.size() * k, threads, [&](std::size_t task) {
    const std::size_t c = task / k;
    const std::size_t f = task % k;
    const auto model = fit(grid[c], train_parts[f]);
    const auto predicted = model->predict(valid_parts[f]);
    const auto bundle = metrics(confusion(valid_parts[f].y, predicted));
    result.cv_scores[c][f] = metric_by_name(bundle, metric).value_or(0.0);
  });

  double best_mean = -1.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double mean = std::accumulate(result.cv_scores[c].begin(), result.cv_scores[c].end(), 0.0) /
                        static_cast<double>(k);
    if (mean > best_mean) {
      best_mean = mean;
      result.best_index = c;
    }
  }
  result.best_params = grid[result.best_index];
  return result;
}

}  // namespace sdflow
