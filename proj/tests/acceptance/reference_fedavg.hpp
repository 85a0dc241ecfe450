#pragma once

#include <vector>

#include "fedcd/engine.hpp"

namespace fedcd::reference {

/// Plain federated averaging for a one-hidden-layer ReLU network, coded
/// directly from the textbook update without the library's trainer or
/// aggregation. Shares only the seed-derivation keys, the initial weights
/// and the device shards with the engine.
///
/// Returns the global parameter vector after each round.
std::vector<std::vector<double>> run_fedavg(const SimulationConfig& cfg,
                                            const std::vector<DeviceShard>& shards,
                                            std::vector<double> init_params,
                                            std::size_t inputs, std::size_t hidden,
                                            std::size_t classes);

}  // namespace fedcd::reference
