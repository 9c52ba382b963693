#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdflow/features.hpp"

namespace sdflow {

enum class PredictorKind {
  Null,
  AllTrue,
  Random,
  SdBased,
  SplitSdMetric,
  LogisticRegression,
  GradientBoostedTrees,
  Mlp,
};

const char* to_string(PredictorKind kind);
PredictorKind parse_predictor_kind(const std::string& text);
bool is_trained(PredictorKind kind);

struct NullParams {};
struct AllTrueParams {};
struct RandomParams {
  std::uint64_t seed = 0;
};
struct SdBasedParams {};
struct SplitSdParams {
  double threshold = 0.0;  // positive iff split_sd_ratio > threshold
};

struct LrParams {
  double learning_rate = 0.1;
  double l2_penalty = 0.0;
  std::uint32_t max_epochs = 100;
  double convergence_tolerance = 1e-6;
  std::uint32_t batch_size = 64;
  double positive_weight = 1.0;
  std::uint64_t seed = 0;
};

struct GbtParams {
  std::uint32_t n_trees = 100;
  std::uint32_t max_depth = 3;
  double learning_rate = 0.1;  // shrinkage
  std::uint32_t min_samples_leaf = 1;
  double subsample_fraction = 1.0;
  std::uint32_t max_bins = 255;
  double positive_weight = 1.0;
  std::uint64_t seed = 0;
};

struct MlpParams {
  std::vector<std::uint32_t> hidden_layer_sizes{32};
  double learning_rate = 1e-3;  // Adam step size
  std::uint32_t max_epochs = 30;
  std::uint32_t batch_size = 64;
  double positive_weight = 1.0;
  std::uint64_t seed = 0;
};

using PredictorParams = std::variant<NullParams, AllTrueParams, RandomParams, SdBasedParams,
                                     SplitSdParams, LrParams, GbtParams, MlpParams>;

PredictorKind kind_of(const PredictorParams& params);
// Throws Error(kInvalidConfig) for out-of-range parameters.
void validate(const PredictorParams& params);
nlohmann::json params_to_json(const PredictorParams& params);
// Fields missing from `j` keep their defaults.
PredictorParams params_from_json(PredictorKind kind, const nlohmann::json& j);

class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual PredictorKind kind() const = 0;
  // Scores in [0, 1], one per row. Throws Error(kShapeMismatch).
  virtual std::vector<double> predict_proba(const DatasetMatrix& X) const = 0;
  // Binary decisions; default is score >= threshold.
  virtual std::vector<int> predict(const DatasetMatrix& X, double threshold = 0.5) const;
  virtual nlohmann::json state_json() const { return nlohmann::json::object(); }
};

class NullPredictor final : public Predictor {
 public:
  PredictorKind kind() const override { return PredictorKind::Null; }
  std::vector<double> predict_proba(const DatasetMatrix& X) const override;
};

class AllTruePredictor final : public Predictor {
 public:
  PredictorKind kind() const override { return PredictorKind::AllTrue; }
  std::vector<double> predict_proba(const DatasetMatrix& X) const override;
};

class RandomPredictor final : public Predictor {
 public:
  explicit RandomPredictor(std::uint64_t seed) : seed_(seed) {}
  PredictorKind kind() const override { return PredictorKind::Random; }
  std::vector<double> predict_proba(const DatasetMatrix& X) const override;

 private:
  std::uint64_t seed_;
};

// Positive when the observable part holds at least one qualifying event.
class SdBasedPredictor final : public Predictor {
 public:
  PredictorKind kind() const override { return PredictorKind::SdBased; }
  std::vector<double> predict_proba(const DatasetMatrix& X) const override;
};

// Scores with the split SD ratio clipped to [0, 1]; positive when the ratio
// exceeds the threshold.
class SplitSdMetricPredictor final : public Predictor {
 public:
  explicit SplitSdMetricPredictor(double threshold) : threshold_(threshold) {}
  PredictorKind kind() const override { return PredictorKind::SplitSdMetric; }
  std::vector<double> predict_proba(const DatasetMatrix& X) const override;
  std::vector<int> predict(const DatasetMatrix& X, double threshold = 0.5) const override;

 private:
  double threshold_;
};

// Weighted mean logistic loss plus (l2 / 2) * |w|^2, with its gradient.
struct LogisticObjective {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

LogisticObjective logistic_objective(std::span<const double> w, double b, const DatasetMatrix& data,
                                     double l2_penalty, double positive_weight = 1.0);

class LogisticRegressionModel final : public Predictor {
 public:
  LogisticRegressionModel(std::vector<double> weights, double bias)
      : weights_(std::move(weights)), bias_(bias) {}

  static LogisticRegressionModel fit(const LrParams& params, const DatasetMatrix& data);
  static LogisticRegressionModel from_state(const nlohmann::json& state);

  PredictorKind kind() const override { return PredictorKind::LogisticRegression; }
  std::vector<double> predict_proba(const DatasetMatrix& X) const override;
  nlohmann::json state_json() const override;

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  std::vector<double> weights_;
  double bias_;
};

struct TreeNode {
  // Internal node when feature >= 0: x[feature] <= threshold goes left.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  std::size_t depth() const;
};

class GradientBoostedTreesModel final : public Predictor {
 public:
  GradientBoostedTreesModel(double base_score, double learning_rate, std::size_t n_features,
                            std::vector<RegressionTree> trees)
      : base_score_(base_score), learning_rate_(learning_rate), n_features_(n_features),
        trees_(std::move(trees)) {}

  static GradientBoostedTreesModel fit(const GbtParams& params, const DatasetMatrix& data);
  static GradientBoostedTreesModel from_state(const nlohmann::json& state);

  PredictorKind kind() const override { return PredictorKind::GradientBoostedTrees; }
  std::vector<double> predict_proba(const DatasetMatrix& X) const override;
  // Raw additive score (log-odds) for each row.
  std::vector<double> decision_function(const DatasetMatrix& X) const;
  nlohmann::json state_json() const override;

  const std::vector<RegressionTree>& trees() const { return trees_; }
  // Mean training logistic loss after the initial constant and each stage.
  const std::vector<double>& training_loss() const { return training_loss_; }

 private:
  double base_score_;
  double learning_rate_;
  std::size_t n_features_;
  std::vector<RegressionTree> trees_;
  std::vector<double> training_loss_;
};

// Fully connected ReLU network with a sigmoid output unit.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  // He-initialized weights for layer sizes [inputs, hidden..., 1].
  MlpNetwork(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  // All weights and biases, layer by layer: W (out x in, row-major), then b.
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  double forward(std::span<const double> x) const;

  // Weighted mean logistic loss over `rows`, gradient accumulated into grad
  // (resized to parameters().size()).
  double loss_and_gradient(const DatasetMatrix& data, std::span<const std::size_t> rows,
                           double positive_weight, std::vector<double>& grad) const;

 private:
  std::vector<std::size_t> layer_sizes_;
  std::vector<double> params_;
};

class MlpModel final : public Predictor {
 public:
  explicit MlpModel(MlpNetwork network) : network_(std::move(network)) {}

  static MlpModel fit(const MlpParams& params, const DatasetMatrix& data);
  static MlpModel from_state(const nlohmann::json& state);

  PredictorKind kind() const override { return PredictorKind::Mlp; }
  std::vector<double> predict_proba(const DatasetMatrix& X) const override;
  nlohmann::json state_json() const override;

  const MlpNetwork& network() const { return network_; }

 private:
  MlpNetwork network_;
};

// Builds a predictor. Trained kinds throw Error(kDegenerateLabels) when the
// data lacks a positive or a negative row.
std::unique_ptr<Predictor> fit(const PredictorParams& params, const DatasetMatrix& data);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json predictor_to_json(const Predictor& predictor, const PredictorParams& params,
                                 const std::string& encoder_hash);
std::unique_ptr<Predictor> predictor_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Model selection

// Fold index per row. Each class is shuffled with `seed` and dealt
// round-robin, so fold class counts differ by at most one.
std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t k, std::uint64_t seed);

struct GridSearchResult {
  std::size_t best_index = 0;
  PredictorParams best_params;
  std::vector<std::vector<double>> cv_scores;  // [candidate][fold]
  std::string selection_metric = "f1";

  nlohmann::json to_json(const std::vector<PredictorParams>& grid) const;
};

// Undefined fold metrics count as 0. Ties go to the earliest candidate.
GridSearchResult grid_search_cv(const std::vector<PredictorParams>& grid, const DatasetMatrix& data,
                                std::size_t k = 5, const std::string& metric = "f1",
                                std::uint64_t seed = 0, unsigned threads = 1);

}  // namespace sdflow
