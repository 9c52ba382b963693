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

MlpNetwork::MlpNetwork(std::vector<std::size_t> layer_sizes, std::uint64_t seed)
    : layer_sizes_(std::move(layer_sizes)) {
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const std::size_t in = layer_sizes_[l];
    const std::size_t out = layer_sizes_[l + 1];
    const double scale = std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(in, 1)));
    for (std::size_t i = 0; i < in * out; ++i) params_.push_back(rng.normal() * scale);
    params_.insert(params_.end(), out, 0.0);
  }
}

namespace {

// Runs one forward pass, keeping every layer's post-activation output in
// `acts` (acts[0] is the input). Returns the output logit.
double forward_pass(const std::vector<std::size_t>& sizes, const std::vector<double>& params,
                    std::span<const double> x, std::vector<std::vector<double>>& acts) {
  const std::size_t layers = sizes.size() - 1;
  acts.resize(sizes.size());
  acts[0].assign(x.begin(), x.end());
  const double* p = params.data();
  double logit = 0.0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const double* W = p;
    const double* b = p + in * out;
    auto& next = acts[l + 1];
    next.resize(out);
    const auto& prev = acts[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = W + o * in;
      double z = b[o];
      for (std::size_t i = 0; i < in; ++i) z += w[i] * prev[i];
      next[o] = z;
    }
    if (l + 1 < layers) {
      for (double& v : next) v = v > 0 ? v : 0.0;
    } else {
      logit = next[0];
    }
    p += in * out + out;
  }
  return logit;
}

}  // namespace

double MlpNetwork::forward(std::span<const double> x) const {
  std::vector<std::vector<double>> acts;
  return forward_pass(layer_sizes_, params_, x, acts);
}

double MlpNetwork::loss_and_gradient(const DatasetMatrix& data, std::span<const std::size_t> rows,
                                     double positive_weight, std::vector<double>& grad) const {
  grad.assign(params_.size(), 0.0);
  const std::size_t layers = layer_sizes_.size() - 1;
  std::vector<std::size_t> offsets(layers);
  for (std::size_t l = 0, off = 0; l < layers; ++l) {
    offsets[l] = off;
    off += layer_sizes_[l] * layer_sizes_[l + 1] + layer_sizes_[l + 1];
  }

  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  double loss = 0;
  double weight_sum = 0;

  for (std::size_t r : rows) {
    const int y = data.y[r];
    const double sw = y ? positive_weight : 1.0;
    const double logit = forward_pass(layer_sizes_, params_, data.row(r), acts);
    loss += sw * log_loss(logit, y);
    weight_sum += sw;

    delta.assign(1, sw * (sigmoid(logit) - y));
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = layer_sizes_[l];
      const std::size_t out = layer_sizes_[l + 1];
      const double* W = params_.data() + offsets[l];
      double* gW = grad.data() + offsets[l];
      double* gb = gW + in * out;
      const auto& prev = acts[l];
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* g = gW + o * in;
        for (std::size_t i = 0; i < in; ++i) g[i] += d * prev[i];
        gb[o] += d;
      }
      if (l == 0) break;
      prev_delta.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* w = W + o * in;
        for (std::size_t i = 0; i < in; ++i) prev_delta[i] += d * w[i];
      }
      // prev holds ReLU outputs for hidden layers.
      for (std::size_t i = 0; i < in; ++i) {
        if (prev[i] <= 0.0) prev_delta[i] = 0.0;
      }
      delta.swap(prev_delta);
    }
  }
  if (weight_sum > 0) {
    for (double& g : grad) g /= weight_sum;
    loss /= weight_sum;
  }
  return loss;
}

MlpModel MlpModel::fit(const MlpParams& params, const DatasetMatrix& data) {
  std::vector<std::size_t> sizes{data.cols};
  for (auto h : params.hidden_layer_sizes) sizes.push_back(h);
  sizes.push_back(1);
  MlpNetwork net(sizes, params.seed);

  auto& theta = net.parameters();
  std::vector<double> m(theta.size(), 0.0);
  std::vector<double> v(theta.size(), 0.0);
  std::vector<double> grad;
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  Rng rng(Rng::stream_seed(params.seed, 1));
  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), 0);

  for (std::uint32_t epoch = 0; epoch < params.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t end = std::min(order.size(), start + params.batch_size);
      net.loss_and_gradient(data, std::span<const std::size_t>(order.data() + start, end - start),
                            params.positive_weight, grad);
      beta1_t *= kBeta1;
      beta2_t *= kBeta2;
      const double step = params.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
      for (std::size_t k = 0; k < theta.size(); ++k) {
        m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * grad[k];
        v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * grad[k] * grad[k];
        theta[k] -= step * m[k] / (std::sqrt(v[k]) + kEps);
      }
    }
  }
  return MlpModel(std::move(net));
}

std::vector<double> MlpModel::predict_proba(const DatasetMatrix& X) const {
  if (X.cols != network_.layer_sizes().front()) {
    throw Error(ErrorCode::kShapeMismatch, "mlp: column count differs from training");
  }
  std::vector<double> out(X.rows);
  std::vector<std::vector<double>> acts;
  for (std::size_t r = 0; r < X.rows; ++r) {
    out[r] = sigmoid(forward_pass(network_.layer_sizes(), network_.parameters(), X.row(r), acts));
  }
  return out;
}

nlohmann::json MlpModel::state_json() const {
  return {{"layer_sizes", network_.layer_sizes()}, {"parameters", network_.parameters()}};
}

MlpModel MlpModel::from_state(const nlohmann::json& state) {
  MlpNetwork net(state.at("layer_sizes").get<std::vector<std::size_t>>(), 0);
  auto params = state.at("parameters").get<std::vector<double>>();
  if (params.size() != net.parameters().size()) {
    throw Error(ErrorCode::kDataError, "mlp state: parameter count does not match layer sizes");
  }
  net.parameters() = std::move(params);
  return MlpModel(std::move(net));
}

}  // namespace sdflow
