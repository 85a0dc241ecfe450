#include "fedcd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedcd {

std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return n;
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("MLP needs at least an input and output layer");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw std::invalid_argument("MLP layer sizes must be >= 1");
}

std::vector<TensorSlice> tensor_layout(const MlpSpec& spec) {
  std::vector<TensorSlice> out;
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_sizes[l], o = spec.layer_sizes[l + 1];
    out.push_back({off, in * o});
    off += in * o;
    out.push_back({off, o});
    off += o;
  }
  return out;
}

LabeledBatch LabeledBatch::select(std::span<const std::size_t> rows) const {
  LabeledBatch out;
  out.features = Matrix(rows.size(), features.cols);
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels[i] = labels[rows[i]];
  }
  return out;
}

void LabeledBatch::validate(std::size_t input_dim,
                            std::size_t num_classes) const {
  if (features.rows != labels.size())
    throw DimensionError("feature rows and label count differ");
  if (features.cols != input_dim)
    throw DimensionError("feature width " + std::to_string(features.cols) +
                         " does not match input layer " +
                         std::to_string(input_dim));
  for (auto y : labels)
    if (y >= num_classes) throw DimensionError("label out of range");
}

ModelWeights init_weights(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ModelWeights w{spec, std::vector<double>(spec.param_count(), 0.0)};
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_sizes[l], o = spec.layer_sizes[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(in + o));
    for (std::size_t k = 0; k < in * o; ++k) w.params[off + k] = rng.uniform(-a, a);
    off += in * o + o;
  }
  return w;
}

namespace {

void check_params(const ModelWeights& w) {
  w.spec.validate();
  if (w.params.size() != w.spec.param_count())
    throw DimensionError("parameter vector length does not match architecture");
}

double activate(Activation a, double z) {
  return a == Activation::kRelu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the activation output.
double activate_grad(Activation a, double out) {
  return a == Activation::kRelu ? (out > 0.0 ? 1.0 : 0.0) : 1.0 - out * out;
}

// Pre-softmax pass. Returns every layer's output; the last entry holds logits.
std::vector<Matrix> forward_layers(const ModelWeights& w, const Matrix& x) {
  const auto& sizes = w.spec.layer_sizes;
  const std::size_t n = x.rows;
  std::vector<Matrix> acts;
  acts.reserve(sizes.size());
  acts.push_back(x);
  std::size_t off = 0;
  for (std::size_t l = 0; l < w.spec.num_layers(); ++l) {
    const std::size_t in = sizes[l], o = sizes[l + 1];
    const double* W = w.params.data() + off;
    const double* b = W + in * o;
    const Matrix& a = acts.back();
    Matrix z(n, o);
    const bool hidden = l + 1 < w.spec.num_layers();
    for (std::size_t r = 0; r < n; ++r) {
      const double* ar = a.data.data() + r * in;
      double* zr = z.data.data() + r * o;
      for (std::size_t j = 0; j < o; ++j) {
        const double* Wj = W + j * in;
        double s = b[j];
        for (std::size_t i = 0; i < in; ++i) s += Wj[i] * ar[i];
        zr[j] = hidden ? activate(w.spec.activation, s) : s;
      }
    }
    acts.push_back(std::move(z));
    off += in * o + o;
  }
  return acts;
}

// In-place row softmax; returns log-sum-exp per row.
std::vector<double> softmax_rows(Matrix& m) {
  std::vector<double> lse(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      s += v;
    }
    for (double& v : row) v /= s;
    lse[r] = mx + std::log(s);
  }
  return lse;
}

}  // namespace

Matrix forward(const ModelWeights& w, const Matrix& features) {
  check_params(w);
  if (features.cols != w.spec.input_dim())
    throw DimensionError("feature width does not match input layer");
  auto acts = forward_layers(w, features);
  Matrix p = std::move(acts.back());
  softmax_rows(p);
  return p;
}

LossAndGrad loss_and_grad(const ModelWeights& w, const LabeledBatch& batch) {
  check_params(w);
  batch.validate(w.spec.input_dim(), w.spec.num_classes());
  if (batch.empty()) throw std::invalid_argument("loss of an empty batch");

  const auto& sizes = w.spec.layer_sizes;
  const std::size_t n = batch.size();
  const std::size_t L = w.spec.num_layers();
  auto acts = forward_layers(w, batch.features);
  Matrix logits = acts.back();
  const auto lse = softmax_rows(acts.back());

  LossAndGrad out{0.0, std::vector<double>(w.params.size(), 0.0)};
  for (std::size_t r = 0; r < n; ++r)
    out.loss += lse[r] - logits(r, batch.labels[r]);
  out.loss /= static_cast<double>(n);

  // delta = dLoss/dz for the current layer.
  Matrix delta = std::move(acts.back());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    delta(r, batch.labels[r]) -= 1.0;
    for (double& v : delta.row(r)) v *= inv_n;
  }

  const auto layout = tensor_layout(w.spec);
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = sizes[l], o = sizes[l + 1];
    const Matrix& a = acts[l];
    double* gW = out.grad.data() + layout[2 * l].offset;
    double* gb = out.grad.data() + layout[2 * l + 1].offset;
    for (std::size_t r = 0; r < n; ++r) {
      const double* ar = a.data.data() + r * in;
      const double* dr = delta.data.data() + r * o;
      for (std::size_t j = 0; j < o; ++j) {
        const double d = dr[j];
        if (d == 0.0) continue;
        gb[j] += d;
        double* gWj = gW + j * in;
        for (std::size_t i = 0; i < in; ++i) gWj[i] += d * ar[i];
      }
    }
    if (l == 0) break;
    const double* W = w.params.data() + layout[2 * l].offset;
    Matrix prev(n, in);
    for (std::size_t r = 0; r < n; ++r) {
      const double* dr = delta.data.data() + r * o;
      double* pr = prev.data.data() + r * in;
      for (std::size_t j = 0; j < o; ++j) {
        const double d = dr[j];
        if (d == 0.0) continue;
        const double* Wj = W + j * in;
        for (std::size_t i = 0; i < in; ++i) pr[i] += d * Wj[i];
      }
      const double* ar = a.data.data() + r * in;
      for (std::size_t i = 0; i < in; ++i)
        pr[i] *= activate_grad(w.spec.activation, ar[i]);
    }
    delta = std::move(prev);
  }
  return out;
}

double mean_loss(const ModelWeights& w, const LabeledBatch& batch) {
  check_params(w);
  batch.validate(w.spec.input_dim(), w.spec.num_classes());
  if (batch.empty()) throw std::invalid_argument("loss of an empty batch");
  auto acts = forward_layers(w, batch.features);
  Matrix logits = acts.back();
  const auto lse = softmax_rows(acts.back());
  double loss = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r)
    loss += lse[r] - logits(r, batch.labels[r]);
  return loss / static_cast<double>(batch.size());
}

ModelWeights sgd_train(const ModelWeights& w, const LabeledBatch& train,
                       const TrainerParams& params, Rng& rng) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (params.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (params.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(params.learning_rate >= 0.0))
    throw std::invalid_argument("learning rate must be non-negative");
  check_params(w);
  train.validate(w.spec.input_dim(), w.spec.num_classes());

  ModelWeights out = w;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t e = 0; e < params.epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t stop = std::min(order.size(), start + params.batch_size);
      const auto mb = train.select(
          std::span<const std::size_t>(order.data() + start, stop - start));
      const auto lg = loss_and_grad(out, mb);
      for (std::size_t k = 0; k < out.params.size(); ++k)
        out.params[k] -= params.learning_rate * lg.grad[k];
    }
  }
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best]) best = k;
  return best;
}

double evaluate_accuracy(const ModelWeights& w, const LabeledBatch& batch) {
  if (batch.empty()) throw std::invalid_argument("accuracy of an empty batch");
  batch.validate(w.spec.input_dim(), w.spec.num_classes());
  const Matrix p = forward(w, batch.features);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < batch.size(); ++r)
    if (argmax(p.row(r)) == batch.labels[r]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

}  // namespace fedcd
