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

LogisticObjective logistic_objective(std::span<const double> w, double b, const DatasetMatrix& data,
                                     double l2_penalty, double positive_weight) {
  LogisticObjective out;
  out.grad_w.assign(w.size(), 0.0);
  double weight_sum = 0;
  for (std::size_t r = 0; r < data.rows; ++r) {
    const auto x = data.row(r);
    const double z = std::inner_product(w.begin(), w.end(), x.begin(), b);
    const int y = data.y[r];
    const double sw = y ? positive_weight : 1.0;
    out.loss += sw * log_loss(z, y);
    const double g = sw * (sigmoid(z) - y);
    for (std::size_t c = 0; c < w.size(); ++c) out.grad_w[c] += g * x[c];
    out.grad_b += g;
    weight_sum += sw;
  }
  if (weight_sum > 0) {
    out.loss /= weight_sum;
    for (double& g : out.grad_w) g /= weight_sum;
    out.grad_b /= weight_sum;
  }
  for (std::size_t c = 0; c < w.size(); ++c) {
    out.loss += 0.5 * l2_penalty * w[c] * w[c];
    out.grad_w[c] += l2_penalty * w[c];
  }
  return out;
}

LogisticRegressionModel LogisticRegressionModel::fit(const LrParams& params, const DatasetMatrix& data) {
  const std::size_t d = data.cols;
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  Rng rng(params.seed);

  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(d);
  double previous = logistic_objective(w, b, data, params.l2_penalty, params.positive_weight).loss;

  for (std::uint32_t epoch = 0; epoch < params.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t end = std::min(order.size(), start + params.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double grad_b = 0;
      double weight_sum = 0;
      for (std::size_t k = start; k < end; ++k) {
        const auto x = data.row(order[k]);
        const int y = data.y[order[k]];
        const double sw = y ? params.positive_weight : 1.0;
        const double g = sw * (sigmoid(std::inner_product(w.begin(), w.end(), x.begin(), b)) - y);
        for (std::size_t c = 0; c < d; ++c) grad[c] += g * x[c];
        grad_b += g;
        weight_sum += sw;
      }
      const double step = params.learning_rate / weight_sum;
      for (std::size_t c = 0; c < d; ++c) {
        w[c] -= step * grad[c] + params.learning_rate * params.l2_penalty * w[c];
      }
      b -= step * grad_b;
    }

    const double current = logistic_objective(w, b, data, params.l2_penalty, params.positive_weight).loss;
    if (std::abs(previous - current) < params.convergence_tolerance) break;
    previous = current;
  }
  return LogisticRegressionModel(std::move(w), b);
}

std::vector<double> LogisticRegressionModel::predict_proba(const DatasetMatrix& X) const {
  if (X.cols != weights_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "logistic regression: column count differs from training");
  }
  std::vector<double> out(X.rows);
  for (std::size_t r = 0; r < X.rows; ++r) {
    const auto x = X.row(r);
    out[r] = sigmoid(std::inner_product(weights_.begin(), weights_.end(), x.begin(), bias_));
  }
  return out;
}

nlohmann::json LogisticRegressionModel::state_json() const {
  return {{"weights", weights_}, {"bias", bias_}};
}

LogisticRegressionModel LogisticRegressionModel::from_state(const nlohmann::json& state) {
  return LogisticRegressionModel(state.at("weights").get<std::vector<double>>(),
                                 state.at("bias").get<double>());
}

}  // namespace sdflow
