#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedcd/rng.hpp"

namespace fedcd {

/// Thrown when array shapes disagree (feature width vs. input layer, label
/// range vs. class count, parameter count vs. architecture).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MlpSpec {
  /// Input width, hidden widths..., class count.
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::kRelu;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  /// Sum over layers of fan_in * fan_out + fan_out.
  std::size_t param_count() const;
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

/// Location of one parameter tensor inside the flat vector.
struct TensorSlice {
  std::size_t offset;
  std::size_t size;
};

/// Per layer: weight matrix stored [fan_out][fan_in] row-major, followed by
/// the bias vector. Layers are laid out in order.
std::vector<TensorSlice> tensor_layout(const MlpSpec& spec);

struct ModelWeights {
  MlpSpec spec;
  std::vector<double> params;

  bool operator==(const ModelWeights&) const = default;
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const Matrix&) const = default;
};

struct LabeledBatch {
  Matrix features;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  /// Row subset in the given order.
  LabeledBatch select(std::span<const std::size_t> rows) const;
  void validate(std::size_t input_dim, std::size_t num_classes) const;

  bool operator==(const LabeledBatch&) const = default;
};

struct LossAndGrad {
  double loss;
  std::vector<double> grad;
};

struct TrainerParams {
  std::size_t epochs = 1;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
};

/// Glorot-uniform weights, zero biases.
ModelWeights init_weights(const MlpSpec& spec, Rng& rng);

/// Softmax class probabilities, one row per example.
Matrix forward(const ModelWeights& w, const Matrix& features);

/// Mean cross-entropy and its gradient with respect to every parameter.
LossAndGrad loss_and_grad(const ModelWeights& w, const LabeledBatch& batch);

double mean_loss(const ModelWeights& w, const LabeledBatch& batch);

/// Mini-batch SGD for `epochs` passes. Shuffling uses only `rng`; the input
/// weights are left untouched.
ModelWeights sgd_train(const ModelWeights& w, const LabeledBatch& train,
                       const TrainerParams& params, Rng& rng);

/// Fraction of rows whose argmax probability (ties to the lowest class)
/// equals the label.
double evaluate_accuracy(const ModelWeights& w, const LabeledBatch& batch);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

}  // namespace fedcd
