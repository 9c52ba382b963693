#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sdflow/error.hpp"
#include "sdflow/evalx.hpp"
#include "sdflow/models.hpp"
#include "sdflow/rng.hpp"

using namespace sdflow;

namespace {

DatasetMatrix matrix(std::size_t rows, std::size_t cols, std::vector<double> x, std::vector<int> y) {
  DatasetMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.X = std::move(x);
  m.y = std::move(y);
  for (std::size_t c = 0; c < cols; ++c) m.column_names.push_back("x" + std::to_string(c));
  m.flow_ids.resize(rows);
  return m;
}

DatasetMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double positive_rate = 0.5) {
  std::vector<double> x(rows * cols);
  for (auto& v : x) v = rng.normal();
  std::vector<int> y(rows);
  for (auto& v : y) v = rng.bernoulli(positive_rate);
  y[0] = 1;
  y[1] = 0;
  return matrix(rows, cols, std::move(x), std::move(y));
}

// Two Gaussian blobs far apart along (1, 1).
DatasetMatrix blobs(Rng& rng, std::size_t rows) {
  std::vector<double> x;
  std::vector<int> y;
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = static_cast<int>(r % 2);
    const double centre = label ? 3.0 : -3.0;
    x.push_back(centre + 0.5 * rng.normal());
    x.push_back(centre + 0.5 * rng.normal());
    y.push_back(label);
  }
  return matrix(rows, 2, std::move(x), std::move(y));
}

double accuracy(const Predictor& p, const DatasetMatrix& m) {
  const auto pred = p.predict(m);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == m.y[i];
  return static_cast<double>(ok) / pred.size();
}

// Matrix with the two heuristic columns in raw units.
DatasetMatrix heuristic_matrix(std::vector<double> counts, std::vector<double> ratios) {
  const std::size_t n = counts.size();
  std::vector<double> x;
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back(counts[i]);
    x.push_back(ratios[i]);
  }
  auto m = matrix(n, 2, std::move(x), std::vector<int>(n, 0));
  m.column_names = {kSdEventCountColumn, kSplitSdRatioColumn};
  return m;
}

}  // namespace

TEST(Baselines, NullAndAllTrue) {
  Rng rng(1);
  const auto m = random_matrix(rng, 40, 3);
  for (double s : NullPredictor().predict_proba(m)) EXPECT_EQ(s, 0.0);
  for (int p : NullPredictor().predict(m)) EXPECT_EQ(p, 0);
  for (int p : AllTruePredictor().predict(m)) EXPECT_EQ(p, 1);
}

TEST(Baselines, NullOnImbalancedData) {
  std::vector<int> y(1000, 0);
  std::fill(y.begin(), y.begin() + 50, 1);
  const auto m = matrix(1000, 1, std::vector<double>(1000, 0.0), y);
  const auto b = metrics(confusion(m.y, NullPredictor().predict(m)));
  EXPECT_EQ(*b.accuracy, 0.95);
  EXPECT_EQ(*b.balanced_accuracy, 0.5);
  EXPECT_EQ(*metrics(confusion(m.y, AllTruePredictor().predict(m))).recall, 1.0);
}

TEST(Baselines, RandomIsSeededAndUniform) {
  Rng rng(2);
  const auto m = random_matrix(rng, 5000, 1);
  const auto a = RandomPredictor(7).predict_proba(m);
  EXPECT_EQ(a, RandomPredictor(7).predict_proba(m));
  EXPECT_NE(a, RandomPredictor(8).predict_proba(m));
  double mean = 0;
  for (double s : a) {
    EXPECT_GE(s, 0.0);
    EXPECT_LT(s, 1.0);
    mean += s;
  }
  EXPECT_NEAR(mean / a.size(), 0.5, 0.02);
}

TEST(Heuristics, SdBased) {
  const auto m = heuristic_matrix({0, 1, 2}, {0, 0, 0});
  EXPECT_EQ(SdBasedPredictor().predict_proba(m), (std::vector<double>{0, 1, 1}));
  EXPECT_EQ(SdBasedPredictor().predict(m), (std::vector<int>{0, 1, 1}));
}

TEST(Heuristics, SplitSdMetric) {
  const auto m = heuristic_matrix({0, 0, 0, 0}, {0, 0.5, 1.5, 0.25});
  SplitSdMetricPredictor p(0.0);
  EXPECT_EQ(p.predict_proba(m), (std::vector<double>{0, 0.5, 1.0, 0.25}));
  EXPECT_EQ(p.predict(m), (std::vector<int>{0, 1, 1, 1}));
  EXPECT_EQ(SplitSdMetricPredictor(0.4).predict(m), (std::vector<int>{0, 1, 1, 0}));
}

TEST(Heuristics, ReadRawValuesThroughScaling) {
  auto m = heuristic_matrix({(2 - 1) / 0.5, (0 - 1) / 0.5}, {(0.5 - 0.2) / 0.1, (0 - 0.2) / 0.1});
  m.scaling = {{1, 0.5}, {0.2, 0.1}};
  EXPECT_EQ(SdBasedPredictor().predict(m), (std::vector<int>{1, 0}));
  EXPECT_EQ(SplitSdMetricPredictor(0).predict(m), (std::vector<int>{1, 0}));
}

TEST(Heuristics, MissingColumnIsShapeMismatch) {
  Rng rng(1);
  const auto m = random_matrix(rng, 4, 2);
  EXPECT_THROW(SdBasedPredictor().predict_proba(m), Error);
}

TEST(LogisticObjective, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = random_matrix(rng, 10, 5);
    const double l2 = trial % 2 ? 0.1 : 0.0;
    const double pw = trial % 3 ? 1.0 : 2.5;
    std::vector<double> theta(6);
    for (auto& v : theta) v = rng.normal();
    auto f = [&](const std::vector<double>& t) {
      return logistic_objective(std::span(t.data(), 5), t[5], data, l2, pw).loss;
    };
    const auto obj = logistic_objective(std::span(theta.data(), 5), theta[5], data, l2, pw);
    const auto num = oracle::numeric_gradient(f, theta, 1e-6);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_LT(oracle::relative_error(obj.grad_w[i], num[i]), 1e-5);
    EXPECT_LT(oracle::relative_error(obj.grad_b, num[5]), 1e-5);
  }
}

TEST(LogisticRegression, SeparableBlobs) {
  Rng rng(4);
  const auto data = blobs(rng, 200);
  LrParams p;
  p.max_epochs = 200;
  const auto model = LogisticRegressionModel::fit(p, data);
  EXPECT_EQ(accuracy(model, data), 1.0);
}

TEST(LogisticRegression, ShapeMismatch) {
  Rng rng(4);
  const auto model = LogisticRegressionModel::fit(LrParams{}, blobs(rng, 50));
  EXPECT_THROW(model.predict_proba(random_matrix(rng, 5, 3)), Error);
}

TEST(Mlp, GradientMatchesFiniteDifferencesOneHiddenUnit) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = random_matrix(rng, 10, 4);
    MlpNetwork net({4, 1, 1}, 100 + trial);
    // Keep the hidden pre-activation away from the ReLU kink.
    for (auto& v : net.parameters()) v = rng.normal();
    std::vector<std::size_t> rows(10);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    std::vector<double> grad;
    net.loss_and_gradient(data, rows, 1.0, grad);
    auto f = [&](const std::vector<double>& p) {
      MlpNetwork copy = net;
      copy.parameters() = p;
      std::vector<double> g;
      return copy.loss_and_gradient(data, rows, 1.0, g);
    };
    const auto num = oracle::numeric_gradient(f, net.parameters(), 1e-6);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      EXPECT_LT(oracle::relative_error(grad[i], num[i]), 1e-4) << "trial " << trial << " param " << i;
    }
  }
}

TEST(Mlp, GradientMatchesFiniteDifferencesDeeper) {
  Rng rng(6);
  const auto data = random_matrix(rng, 12, 5);
  MlpNetwork net({5, 4, 3, 1}, 9);
  std::vector<std::size_t> rows{0, 2, 3, 5, 7, 11};
  std::vector<double> grad;
  net.loss_and_gradient(data, rows, 3.0, grad);
  auto f = [&](const std::vector<double>& p) {
    MlpNetwork copy = net;
    copy.parameters() = p;
    std::vector<double> g;
    return copy.loss_and_gradient(data, rows, 3.0, g);
  };
  const auto num = oracle::numeric_gradient(f, net.parameters(), 1e-6);
  for (std::size_t i = 0; i < grad.size(); ++i) EXPECT_LT(oracle::relative_error(grad[i], num[i]), 1e-4);
}

TEST(Mlp, LearnsBlobs) {
  Rng rng(7);
  const auto data = blobs(rng, 200);
  MlpParams p;
  p.learning_rate = 1e-2;
  const auto model = MlpModel::fit(p, data);
  EXPECT_EQ(accuracy(model, data), 1.0);
}

TEST(Gbt, StumpRecoversThreshold) {
  std::vector<double> x;
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    x.push_back(i);
    y.push_back(i >= 37);
  }
  const auto data = matrix(100, 1, x, y);
  GbtParams p;
  p.n_trees = 1;
  p.max_depth = 1;
  p.learning_rate = 1.0;
  const auto model = GradientBoostedTreesModel::fit(p, data);
  ASSERT_EQ(model.trees().size(), 1u);
  const auto& root = model.trees()[0].nodes[0];
  EXPECT_EQ(root.feature, 0);
  EXPECT_GT(root.threshold, 36);
  EXPECT_LT(root.threshold, 37);
  EXPECT_EQ(accuracy(model, data), 1.0);
}

TEST(Gbt, TrainingLossNonIncreasing) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    auto data = random_matrix(rng, 300, 6, 0.2);
    for (std::size_t r = 0; r < data.rows; ++r) {
      if (data.at(r, 0) + data.at(r, 1) * data.at(r, 2) > 0.5) data.y[r] = 1;
    }
    GbtParams p;
    p.n_trees = 60;
    p.max_depth = 1 + trial % 4;
    p.learning_rate = trial % 2 ? 0.3 : 0.1;
    const auto model = GradientBoostedTreesModel::fit(p, data);
    const auto& loss = model.training_loss();
    ASSERT_EQ(loss.size(), p.n_trees + 1);
    for (std::size_t s = 1; s < loss.size(); ++s) EXPECT_LE(loss[s], loss[s - 1] + 1e-12) << "stage " << s;
    EXPECT_LT(loss.back(), loss.front());
    for (const auto& t : model.trees()) EXPECT_LE(t.depth(), p.max_depth);
  }
}

TEST(Fit, DegenerateLabels) {
  Rng rng(9);
  auto data = random_matrix(rng, 20, 2);
  std::fill(data.y.begin(), data.y.end(), 0);
  for (PredictorParams p : {PredictorParams{LrParams{}}, PredictorParams{GbtParams{}}, PredictorParams{MlpParams{}}}) {
    try {
      fit(p, data);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kDegenerateLabels);
    }
  }
  EXPECT_NO_THROW(fit(NullParams{}, data));
}

TEST(Fit, ProbabilitiesInRangeAndDeterministic) {
  Rng rng(10);
  for (int trial = 0; trial < 4; ++trial) {
    auto data = random_matrix(rng, 120, 4, 0.3);
    data.column_names[0] = kSdEventCountColumn;
    data.column_names[1] = kSplitSdRatioColumn;
    LrParams lr;
    lr.seed = trial;
    GbtParams gbt;
    gbt.n_trees = 20;
    gbt.subsample_fraction = 0.7;
    gbt.seed = trial;
    MlpParams mlp;
    mlp.max_epochs = 5;
    mlp.seed = trial;
    for (const PredictorParams& p : std::vector<PredictorParams>{NullParams{}, AllTrueParams{}, RandomParams{3},
                                                                 SdBasedParams{}, SplitSdParams{}, lr, gbt, mlp}) {
      const auto a = fit(p, data)->predict_proba(data);
      const auto b = fit(p, data)->predict_proba(data);
      EXPECT_EQ(a, b) << to_string(kind_of(p));
      for (double s : a) {
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
      }
    }
  }
}

TEST(Serialization, RoundTripPreservesScores) {
  Rng rng(11);
  const auto data = random_matrix(rng, 150, 3, 0.4);
  GbtParams gbt;
  gbt.n_trees = 15;
  MlpParams mlp;
  mlp.max_epochs = 3;
  for (const PredictorParams& p : std::vector<PredictorParams>{LrParams{}, gbt, mlp, RandomParams{5}}) {
    const auto model = fit(p, data);
    const auto j = predictor_to_json(*model, p, "abc");
    EXPECT_EQ(j.at("encoder_hash"), "abc");
    const auto back = predictor_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back->kind(), model->kind());
    EXPECT_EQ(back->predict_proba(data), model->predict_proba(data));
  }
}

TEST(Params, ValidationAndJson) {
  LrParams lr;
  lr.learning_rate = 0;
  EXPECT_THROW(validate(lr), Error);
  GbtParams gbt;
  gbt.subsample_fraction = 1.5;
  EXPECT_THROW(validate(gbt), Error);
  MlpParams mlp;
  mlp.hidden_layer_sizes.clear();
  EXPECT_THROW(validate(mlp), Error);
  mlp = MlpParams{};
  mlp.hidden_layer_sizes = {64, 32};
  const auto j = params_to_json(mlp);
  EXPECT_EQ(params_to_json(params_from_json(PredictorKind::Mlp, j)), j);
  EXPECT_EQ(parse_predictor_kind("gbt"), PredictorKind::GradientBoostedTrees);
  EXPECT_THROW(parse_predictor_kind("svm"), Error);
}
