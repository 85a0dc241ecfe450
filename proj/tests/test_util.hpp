#pragma once

#include <cmath>
#include <vector>

#include "fedcd/mlp.hpp"
#include "fedcd/rng.hpp"

namespace fedcd::testing {

inline LabeledBatch random_batch(std::size_t rows, std::size_t dim, std::size_t classes,
                                 Rng& rng) {
  LabeledBatch b;
  b.features = Matrix(rows, dim);
  for (double& v : b.features.data) v = rng.normal();
  for (std::size_t r = 0; r < rows; ++r)
    b.labels.push_back(static_cast<std::uint32_t>(rng.below(classes)));
  return b;
}

/// Two Gaussian blobs far apart along every axis.
inline LabeledBatch two_blobs(std::size_t per_class, std::size_t dim, Rng& rng) {
  LabeledBatch b;
  b.features = Matrix(2 * per_class, dim);
  for (std::size_t r = 0; r < 2 * per_class; ++r) {
    const double center = r < per_class ? -2.0 : 2.0;
    for (std::size_t j = 0; j < dim; ++j) b.features(r, j) = center + 0.5 * rng.normal();
    b.labels.push_back(r < per_class ? 0 : 1);
  }
  return b;
}

/// Central finite-difference gradient of the mean loss, independent of the
/// backpropagation code path.
inline std::vector<double> numeric_gradient(const ModelWeights& w, const LabeledBatch& b,
                                            double eps) {
  std::vector<double> g(w.params.size());
  ModelWeights probe = w;
  for (std::size_t k = 0; k < w.params.size(); ++k) {
    probe.params[k] = w.params[k] + eps;
    const double up = mean_loss(probe, b);
    probe.params[k] = w.params[k] - eps;
    const double down = mean_loss(probe, b);
    probe.params[k] = w.params[k];
    g[k] = (up - down) / (2.0 * eps);
  }
  return g;
}

inline double relative_error(double a, double b) {
  const double denom = std::max(std::abs(a) + std::abs(b), 1e-7);
  return std::abs(a - b) / denom;
}

}  // namespace fedcd::testing
