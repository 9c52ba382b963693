#pragma once

#include <cmath>

namespace sdflow::detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Logistic loss of raw score z against label y in {0, 1}.
inline double log_loss(double z, int y) { return y ? softplus(-z) : softplus(z); }

}  // namespace sdflow::detail
