#pragma once

#include <cstddef>
#include <span>

#include "fedcd/mlp.hpp"

namespace fedcd {

/// Symmetric uniform per-tensor quantization. `bits == 0` disables it.
struct QuantizationSpec {
  int bits = 0;

  void validate() const;
  bool enabled() const { return bits != 0; }
  bool operator==(const QuantizationSpec&) const = default;
};

/// Largest representable magnitude level, 2^(bits-1) - 1.
long long quant_levels(int bits);

/// Quantizes one tensor in place. Values become max|x| * (q / levels) for an
/// integer q, which keeps the tensor maximum exact and makes repeated
/// application a no-op. Returns the step size max|x| / levels.
double quantize_tensor(std::span<double> values, int bits);

/// Applies `quantize_tensor` to every weight matrix and bias vector.
ModelWeights quantize_weights(const ModelWeights& w, const QuantizationSpec& q);

/// Serialized size of one model update: ceil(params * bits / 8), or 8 bytes
/// per parameter when quantization is off.
std::size_t payload_bytes(std::size_t param_count, const QuantizationSpec& q);

}  // namespace fedcd
