#include "fedcd/quantize.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedcd {

void QuantizationSpec::validate() const {
  if (bits != 0 && bits != 4 && bits != 8 && bits != 16)
    throw std::invalid_argument("quantization bits must be one of 0, 4, 8, 16 (got " +
                                std::to_string(bits) + ")");
}

long long quant_levels(int bits) { return (1LL << (bits - 1)) - 1; }

double quantize_tensor(std::span<double> values, int bits) {
  if (bits == 0 || values.empty()) return 0.0;
  double max_abs = 0.0;
  for (double v : values) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs == 0.0) return 0.0;
  const auto levels = static_cast<double>(quant_levels(bits));
  const double scale = max_abs / levels;
  for (double& v : values) {
    const double q = std::round(v / scale);
    v = max_abs * (q / levels);
  }
  return scale;
}

ModelWeights quantize_weights(const ModelWeights& w, const QuantizationSpec& q) {
  q.validate();
  ModelWeights out = w;
  if (!q.enabled()) return out;
  for (const auto& t : tensor_layout(w.spec))
    quantize_tensor(std::span<double>(out.params.data() + t.offset, t.size), q.bits);
  return out;
}

std::size_t payload_bytes(std::size_t param_count, const QuantizationSpec& q) {
  const std::size_t bits = q.enabled() ? static_cast<std::size_t>(q.bits) : 64;
  return (param_count * bits + 7) / 8;
}

}  // namespace fedcd
