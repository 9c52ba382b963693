#include <algorithm>
#include <cmath>
#include <numeric>

#include "model_math.hpp"
#include "sdflow/error.hpp"
#include "sdflow/models.hpp"
#include "sdflow/rng.hpp"

namespace sdflow {

using detail::log_loss;
using detail::sigmoid;

double RegressionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[i].value;
}

std::size_t RegressionTree::depth() const {
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  std::size_t best = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes[i].feature >= 0) {
      stack.push_back({nodes[i].left, d + 1});
      stack.push_back({nodes[i].right, d + 1});
    }
  }
  return best;
}

namespace {

// Per-feature cut points. Bin of x = number of cuts strictly below x, so
// x <= cuts[t] exactly when bin(x) <= t.
struct BinnedData {
  std::size_t rows = 0;
  std::vector<std::vector<double>> cuts;
  std::vector<std::uint8_t> bins;  // column-major [feature][row]

  std::size_t bin_count(std::size_t feature) const { return cuts[feature].size() + 1; }
  const std::uint8_t* column(std::size_t feature) const { return bins.data() + feature * rows; }
};

BinnedData bin_features(const DatasetMatrix& data, std::size_t max_bins) {
  BinnedData b;
  b.rows = data.rows;
  b.cuts.resize(data.cols);
  b.bins.resize(data.cols * data.rows);
  std::vector<double> values(data.rows);
  for (std::size_t c = 0; c < data.cols; ++c) {
    for (std::size_t r = 0; r < data.rows; ++r) values[r] = data.at(r, c);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> unique = sorted;
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    auto& cuts = b.cuts[c];
    if (unique.size() <= max_bins) {
      for (std::size_t i = 0; i + 1 < unique.size(); ++i) cuts.push_back(0.5 * (unique[i] + unique[i + 1]));
    } else {
      for (std::size_t q = 1; q < max_bins; ++q) {
        const std::size_t idx = q * sorted.size() / max_bins;
        if (idx == 0 || sorted[idx - 1] == sorted[idx]) continue;
        const double cut = 0.5 * (sorted[idx - 1] + sorted[idx]);
        if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
      }
    }
    std::uint8_t* col = b.bins.data() + c * data.rows;
    for (std::size_t r = 0; r < data.rows; ++r) {
      col[r] = static_cast<std::uint8_t>(std::lower_bound(cuts.begin(), cuts.end(), values[r]) - cuts.begin());
    }
  }
  return b;
}

struct HistBin {
  double grad = 0.0;
  double weight = 0.0;
  std::size_t count = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedData& binned, const GbtParams& params, const std::vector<double>& grad,
              const std::vector<double>& weight)
      : binned_(binned), params_(params), grad_(grad), weight_(weight) {
    offsets_.resize(binned.cuts.size() + 1, 0);
    for (std::size_t c = 0; c < binned.cuts.size(); ++c) offsets_[c + 1] = offsets_[c] + binned.bin_count(c);
    hist_.resize(offsets_.back());
  }

  RegressionTree build(std::vector<std::size_t> rows) {
    RegressionTree tree;
    tree.nodes.emplace_back();
    grow(tree, 0, rows, 0);
    return tree;
  }

 private:
  void grow(RegressionTree& tree, int node, std::vector<std::size_t>& rows, std::uint32_t depth) {
    double g_sum = 0;
    double w_sum = 0;
    for (std::size_t r : rows) {
      g_sum += grad_[r] * weight_[r];
      w_sum += weight_[r];
    }
    tree.nodes[node].value = w_sum > 0 ? g_sum / w_sum : 0.0;
    if (depth >= params_.max_depth || rows.size() < 2 * static_cast<std::size_t>(params_.min_samples_leaf)) {
      return;
    }

    std::fill(hist_.begin(), hist_.end(), HistBin{});
    const std::size_t n_features = binned_.cuts.size();
    for (std::size_t c = 0; c < n_features; ++c) {
      if (binned_.cuts[c].empty()) continue;
      const std::uint8_t* col = binned_.column(c);
      HistBin* h = hist_.data() + offsets_[c];
      for (std::size_t r : rows) {
        HistBin& bin = h[col[r]];
        bin.grad += grad_[r] * weight_[r];
        bin.weight += weight_[r];
        ++bin.count;
      }
    }

    const double parent_score = g_sum * g_sum / w_sum;
    double best_gain = 1e-12;
    int best_feature = -1;
    std::size_t best_bin = 0;
    for (std::size_t c = 0; c < n_features; ++c) {
      const HistBin* h = hist_.data() + offsets_[c];
      double gl = 0, wl = 0;
      std::size_t nl = 0;
      for (std::size_t t = 0; t + 1 < binned_.bin_count(c); ++t) {
        gl += h[t].grad;
        wl += h[t].weight;
        nl += h[t].count;
        const std::size_t nr = rows.size() - nl;
        if (nl < params_.min_samples_leaf) continue;
        if (nr < params_.min_samples_leaf) break;
        const double gr = g_sum - gl;
        const double wr = w_sum - wl;
        if (wl <= 0 || wr <= 0) continue;
        const double gain = gl * gl / wl + gr * gr / wr - parent_score;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(c);
          best_bin = t;
        }
      }
    }
    if (best_feature < 0) return;

    const std::uint8_t* col = binned_.column(static_cast<std::size_t>(best_feature));
    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t r : rows) (col[r] <= best_bin ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int right = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node].feature = best_feature;
    tree.nodes[node].threshold = binned_.cuts[static_cast<std::size_t>(best_feature)][best_bin];
    tree.nodes[node].left = left;
    tree.nodes[node].right = right;
    grow(tree, left, left_rows, depth + 1);
    grow(tree, right, right_rows, depth + 1);
  }

  const BinnedData& binned_;
  const GbtParams& params_;
  const std::vector<double>& grad_;
  const std::vector<double>& weight_;
  std::vector<std::size_t> offsets_;
  std::vector<HistBin> hist_;
};

double mean_loss(const std::vector<double>& score, const std::vector<int>& y,
                 const std::vector<double>& weight) {
  double loss = 0, w = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    loss += weight[i] * log_loss(score[i], y[i]);
    w += weight[i];
  }
  return w > 0 ? loss / w : 0.0;
}

nlohmann::json node_json(const RegressionTree& tree, int i) {
  const auto& n = tree.nodes[static_cast<std::size_t>(i)];
  if (n.feature < 0) return {{"leaf", n.value}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", node_json(tree, n.left)},
          {"right", node_json(tree, n.right)}};
}

int node_from_json(RegressionTree& tree, const nlohmann::json& j) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("leaf")) {
    tree.nodes[static_cast<std::size_t>(index)].value = j.at("leaf").get<double>();
    return index;
  }
  const int left = node_from_json(tree, j.at("left"));
  const int right = node_from_json(tree, j.at("right"));
  auto& n = tree.nodes[static_cast<std::size_t>(index)];
  n.feature = j.at("feature").get<int>();
  n.threshold = j.at("threshold").get<double>();
  n.left = left;
  n.right = right;
  return index;
}

}  // namespace

GradientBoostedTreesModel GradientBoostedTreesModel::fit(const GbtParams& params, const DatasetMatrix& data) {
  const std::size_t n = data.rows;
  std::vector<double> weight(n);
  double pos_w = 0, total_w = 0;
  for (std::size_t i = 0; i < n; ++i) {
    weight[i] = data.y[i] ? params.positive_weight : 1.0;
    pos_w += data.y[i] ? weight[i] : 0.0;
    total_w += weight[i];
  }
  const double prior = std::clamp(total_w > 0 ? pos_w / total_w : 0.5, 1e-6, 1.0 - 1e-6);
  const double base = std::log(prior / (1.0 - prior));

  const BinnedData binned = bin_features(data, params.max_bins);
  std::vector<double> score(n, base);
  std::vector<double> grad(n);
  std::vector<RegressionTree> trees;
  trees.reserve(params.n_trees);

  GradientBoostedTreesModel model(base, params.learning_rate, data.cols, {});
  model.training_loss_.push_back(mean_loss(score, data.y, weight));

  Rng rng(params.seed);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const auto sample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(params.subsample_fraction * static_cast<double>(n))));

  for (std::uint32_t stage = 0; stage < params.n_trees; ++stage) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = data.y[i] - sigmoid(score[i]);

    std::vector<std::size_t> rows;
    if (sample_size >= n) {
      rows = all;
    } else {
      // Partial Fisher-Yates, then restore index order for cache locality.
      for (std::size_t i = 0; i < sample_size; ++i) std::swap(all[i], all[i + rng.below(n - i)]);
      rows.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(sample_size));
      std::sort(rows.begin(), rows.end());
    }

    TreeBuilder builder(binned, params, grad, weight);
    RegressionTree tree = builder.build(std::move(rows));
    for (std::size_t i = 0; i < n; ++i) score[i] += params.learning_rate * tree.predict(data.row(i));
    trees.push_back(std::move(tree));
    model.training_loss_.push_back(mean_loss(score, data.y, weight));
  }
  model.trees_ = std::move(trees);
  return model;
}

std::vector<double> GradientBoostedTreesModel::decision_function(const DatasetMatrix& X) const {
  if (X.cols != n_features_) {
    throw Error(ErrorCode::kShapeMismatch, "gbt: column count differs from training");
  }
  std::vector<double> out(X.rows, base_score_);
  for (std::size_t r = 0; r < X.rows; ++r) {
    const auto x = X.row(r);
    double s = 0;
    for (const auto& tree : trees_) s += tree.predict(x);
    out[r] += learning_rate_ * s;
  }
  return out;
}

std::vector<double> GradientBoostedTreesModel::predict_proba(const DatasetMatrix& X) const {
  auto out = decision_function(X);
  for (double& v : out) v = sigmoid(v);
  return out;
}

nlohmann::json GradientBoostedTreesModel::state_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(node_json(t, 0));
  return {{"base_score", base_score_},
          {"learning_rate", learning_rate_},
          {"n_features", n_features_},
          {"trees", trees}};
}

GradientBoostedTreesModel GradientBoostedTreesModel::from_state(const nlohmann::json& state) {
  std::vector<RegressionTree> trees;
  for (const auto& tj : state.at("trees")) {
    RegressionTree t;
    node_from_json(t, tj);
    trees.push_back(std::move(t));
  }
  return GradientBoostedTreesModel(state.at("base_score").get<double>(),
                                   state.at("learning_rate").get<double>(),
                                   state.at("n_features").get<std::size_t>(), std::move(trees));
}

}  // namespace sdflow
