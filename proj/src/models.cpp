#include "sdflow/models.hpp"

#include <algorithm>

#include "sdflow/error.hpp"
#include "sdflow/rng.hpp"

namespace sdflow {

using nlohmann::json;

const char* to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::Null: return "null";
    case PredictorKind::AllTrue: return "all_true";
    case PredictorKind::Random: return "random";
    case PredictorKind::SdBased: return "sd_based";
    case PredictorKind::SplitSdMetric: return "split_sd_metric";
    case PredictorKind::LogisticRegression: return "logistic_regression";
    case PredictorKind::GradientBoostedTrees: return "gbt";
    case PredictorKind::Mlp: return "mlp";
  }
  return "unknown";
}

PredictorKind parse_predictor_kind(const std::string& text) {
  for (auto kind : {PredictorKind::Null, PredictorKind::AllTrue, PredictorKind::Random,
                    PredictorKind::SdBased, PredictorKind::SplitSdMetric,
                    PredictorKind::LogisticRegression, PredictorKind::GradientBoostedTrees,
                    PredictorKind::Mlp}) {
    if (text == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown predictor kind: " + text);
}

bool is_trained(PredictorKind kind) {
  return kind == PredictorKind::LogisticRegression || kind == PredictorKind::GradientBoostedTrees ||
         kind == PredictorKind::Mlp;
}

PredictorKind kind_of(const PredictorParams& params) {
  return std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NullParams>) return PredictorKind::Null;
        else if constexpr (std::is_same_v<T, AllTrueParams>) return PredictorKind::AllTrue;
        else if constexpr (std::is_same_v<T, RandomParams>) return PredictorKind::Random;
        else if constexpr (std::is_same_v<T, SdBasedParams>) return PredictorKind::SdBased;
        else if constexpr (std::is_same_v<T, SplitSdParams>) return PredictorKind::SplitSdMetric;
        else if constexpr (std::is_same_v<T, LrParams>) return PredictorKind::LogisticRegression;
        else if constexpr (std::is_same_v<T, GbtParams>) return PredictorKind::GradientBoostedTrees;
        else return PredictorKind::Mlp;
      },
      params);
}

namespace {

void require(bool ok, const char* message) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, message);
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void validate(const PredictorParams& params) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LrParams>) {
          require(p.learning_rate > 0, "lr: learning_rate must be > 0");
          require(p.l2_penalty >= 0, "lr: l2_penalty must be >= 0");
          require(p.batch_size >= 1, "lr: batch_size must be >= 1");
          require(p.positive_weight > 0, "lr: positive_weight must be > 0");
        } else if constexpr (std::is_same_v<T, GbtParams>) {
          require(p.n_trees >= 1, "gbt: n_trees must be >= 1");
          require(p.max_depth >= 1, "gbt: max_depth must be >= 1");
          require(p.learning_rate > 0, "gbt: learning_rate must be > 0");
          require(p.min_samples_leaf >= 1, "gbt: min_samples_leaf must be >= 1");
          require(p.subsample_fraction > 0 && p.subsample_fraction <= 1,
                  "gbt: subsample_fraction must be in (0, 1]");
          require(p.max_bins >= 2 && p.max_bins <= 256, "gbt: max_bins must be in [2, 256]");
          require(p.positive_weight > 0, "gbt: positive_weight must be > 0");
        } else if constexpr (std::is_same_v<T, MlpParams>) {
          require(!p.hidden_layer_sizes.empty(), "mlp: at least one hidden layer is required");
          for (auto h : p.hidden_layer_sizes) require(h >= 1, "mlp: hidden layer sizes must be >= 1");
          require(p.learning_rate > 0, "mlp: learning_rate must be > 0");
          require(p.batch_size >= 1, "mlp: batch_size must be >= 1");
          require(p.positive_weight > 0, "mlp: positive_weight must be > 0");
        }
      },
      params);
}

json params_to_json(const PredictorParams& params) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, RandomParams>) {
          return {{"seed", p.seed}};
        } else if constexpr (std::is_same_v<T, SplitSdParams>) {
          return {{"threshold", p.threshold}};
        } else if constexpr (std::is_same_v<T, LrParams>) {
          return {{"learning_rate", p.learning_rate}, {"l2_penalty", p.l2_penalty},
                  {"max_epochs", p.max_epochs}, {"convergence_tolerance", p.convergence_tolerance},
                  {"batch_size", p.batch_size}, {"positive_weight", p.positive_weight},
                  {"seed", p.seed}};
        } else if constexpr (std::is_same_v<T, GbtParams>) {
          return {{"n_trees", p.n_trees}, {"max_depth", p.max_depth},
                  {"learning_rate", p.learning_rate}, {"min_samples_leaf", p.min_samples_leaf},
                  {"subsample_fraction", p.subsample_fraction}, {"max_bins", p.max_bins},
                  {"positive_weight", p.positive_weight}, {"seed", p.seed}};
        } else if constexpr (std::is_same_v<T, MlpParams>) {
          return {{"hidden_layer_sizes", p.hidden_layer_sizes}, {"learning_rate", p.learning_rate},
                  {"max_epochs", p.max_epochs}, {"batch_size", p.batch_size},
                  {"positive_weight", p.positive_weight}, {"seed", p.seed}};
        } else {
          return json::object();
        }
      },
      params);
}

PredictorParams params_from_json(PredictorKind kind, const json& j) {
  try {
    switch (kind) {
      case PredictorKind::Null: return NullParams{};
      case PredictorKind::AllTrue: return AllTrueParams{};
      case PredictorKind::SdBased: return SdBasedParams{};
      case PredictorKind::Random: {
        RandomParams p;
        read_opt(j, "seed", p.seed);
        return p;
      }
      case PredictorKind::SplitSdMetric: {
        SplitSdParams p;
        read_opt(j, "threshold", p.threshold);
        return p;
      }
      case PredictorKind::LogisticRegression: {
        LrParams p;
        read_opt(j, "learning_rate", p.learning_rate);
        read_opt(j, "l2_penalty", p.l2_penalty);
        read_opt(j, "max_epochs", p.max_epochs);
        read_opt(j, "convergence_tolerance", p.convergence_tolerance);
        read_opt(j, "batch_size", p.batch_size);
        read_opt(j, "positive_weight", p.positive_weight);
        read_opt(j, "seed", p.seed);
        return p;
      }
      case PredictorKind::GradientBoostedTrees: {
        GbtParams p;
        read_opt(j, "n_trees", p.n_trees);
        read_opt(j, "max_depth", p.max_depth);
        read_opt(j, "learning_rate", p.learning_rate);
        read_opt(j, "min_samples_leaf", p.min_samples_leaf);
        read_opt(j, "subsample_fraction", p.subsample_fraction);
        read_opt(j, "max_bins", p.max_bins);
        read_opt(j, "positive_weight", p.positive_weight);
        read_opt(j, "seed", p.seed);
        return p;
      }
      case PredictorKind::Mlp: {
        MlpParams p;
        read_opt(j, "hidden_layer_sizes", p.hidden_layer_sizes);
        read_opt(j, "learning_rate", p.learning_rate);
        read_opt(j, "max_epochs", p.max_epochs);
        read_opt(j, "batch_size", p.batch_size);
        read_opt(j, "positive_weight", p.positive_weight);
        read_opt(j, "seed", p.seed);
        return p;
      }
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig, std::string("predictor params: ") + ex.what());
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown predictor kind");
}

std::vector<int> Predictor::predict(const DatasetMatrix& X, double threshold) const {
  const auto scores = predict_proba(X);
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
  return out;
}

std::vector<double> NullPredictor::predict_proba(const DatasetMatrix& X) const {
  return std::vector<double>(X.rows, 0.0);
}

std::vector<double> AllTruePredictor::predict_proba(const DatasetMatrix& X) const {
  return std::vector<double>(X.rows, 1.0);
}

std::vector<double> RandomPredictor::predict_proba(const DatasetMatrix& X) const {
  Rng rng(seed_);
  std::vector<double> out(X.rows);
  for (double& v : out) v = rng.uniform();
  return out;
}

std::vector<double> SdBasedPredictor::predict_proba(const DatasetMatrix& X) const {
  auto counts = X.raw_column(kSdEventCountColumn);
  // Counts are integers; 0.5 absorbs standardization round-off.
  for (double& v : counts) v = v >= 0.5 ? 1.0 : 0.0;
  return counts;
}

std::vector<double> SplitSdMetricPredictor::predict_proba(const DatasetMatrix& X) const {
  auto ratios = X.raw_column(kSplitSdRatioColumn);
  for (double& v : ratios) v = std::clamp(v, 0.0, 1.0);
  return ratios;
}

std::vector<int> SplitSdMetricPredictor::predict(const DatasetMatrix& X, double) const {
  const auto ratios = X.raw_column(kSplitSdRatioColumn);
  std::vector<int> out(ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i) out[i] = ratios[i] > threshold_ + 1e-9 ? 1 : 0;
  return out;
}

std::unique_ptr<Predictor> fit(const PredictorParams& params, const DatasetMatrix& data) {
  validate(params);
  if (is_trained(kind_of(params))) {
    const std::size_t pos = data.positives();
    if (pos == 0 || pos == data.rows) {
      throw Error(ErrorCode::kDegenerateLabels,
                  std::string(to_string(kind_of(params))) + ": training data has a single class");
    }
  }
  return std::visit(
      [&](const auto& p) -> std::unique_ptr<Predictor> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NullParams>) return std::make_unique<NullPredictor>();
        else if constexpr (std::is_same_v<T, AllTrueParams>) return std::make_unique<AllTruePredictor>();
        else if constexpr (std::is_same_v<T, RandomParams>) return std::make_unique<RandomPredictor>(p.seed);
        else if constexpr (std::is_same_v<T, SdBasedParams>) return std::make_unique<SdBasedPredictor>();
        else if constexpr (std::is_same_v<T, SplitSdParams>)
          return std::make_unique<SplitSdMetricPredictor>(p.threshold);
        else if constexpr (std::is_same_v<T, LrParams>)
          return std::make_unique<LogisticRegressionModel>(LogisticRegressionModel::fit(p, data));
        else if constexpr (std::is_same_v<T, GbtParams>)
          return std::make_unique<GradientBoostedTreesModel>(GradientBoostedTreesModel::fit(p, data));
        else return std::make_unique<MlpModel>(MlpModel::fit(p, data));
      },
      params);
}

json predictor_to_json(const Predictor& predictor, const PredictorParams& params,
                       const std::string& encoder_hash) {
  return {{"format_version", kModelFormatVersion},
          {"kind", to_string(predictor.kind())},
          {"params", params_to_json(params)},
          {"encoder_hash", encoder_hash},
          {"state", predictor.state_json()}};
}

std::unique_ptr<Predictor> predictor_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::kDataError, "unsupported model format version");
    }
    const auto kind = parse_predictor_kind(j.at("kind").get<std::string>());
    const auto params = params_from_json(kind, j.at("params"));
    const auto& state = j.at("state");
    switch (kind) {
      case PredictorKind::LogisticRegression:
        return std::make_unique<LogisticRegressionModel>(LogisticRegressionModel::from_state(state));
      case PredictorKind::GradientBoostedTrees:
        return std::make_unique<GradientBoostedTreesModel>(GradientBoostedTreesModel::from_state(state));
      case PredictorKind::Mlp:
        return std::make_unique<MlpModel>(MlpModel::from_state(state));
      default:
        return fit(params, DatasetMatrix{});
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kDataError, std::string("model document: ") + ex.what());
  }
}

}  // namespace sdflow
