#include "acceptance/reference_fedavg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcd/rng.hpp"

namespace fedcd::reference {
namespace {

struct Net {
  std::size_t in, hid, out;
  // Offsets into the flat parameter vector: W1[hid][in], b1[hid], W2[out][hid], b2[out].
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return hid * in; }
  std::size_t w2() const { return hid * in + hid; }
  std::size_t b2() const { return hid * in + hid + out * hid; }
};

// Gradient of the mean cross-entropy over rows idx[lo, hi).
std::vector<double> minibatch_grad(const Net& n, const std::vector<double>& p,
                                   const LabeledBatch& data, const std::vector<std::size_t>& idx,
                                   std::size_t lo, std::size_t hi) {
  std::vector<double> g(p.size(), 0.0);
  std::vector<double> z(n.hid), h(n.hid), logit(n.out), dz(n.hid);
  for (std::size_t t = lo; t < hi; ++t) {
    const auto x = data.features.row(idx[t]);
    const auto y = data.labels[idx[t]];
    for (std::size_t j = 0; j < n.hid; ++j) {
      double s = p[n.b1() + j];
      for (std::size_t i = 0; i < n.in; ++i) s += p[n.w1() + j * n.in + i] * x[i];
      z[j] = s;
      h[j] = s > 0.0 ? s : 0.0;
    }
    double mx = -INFINITY;
    for (std::size_t k = 0; k < n.out; ++k) {
      double s = p[n.b2() + k];
      for (std::size_t j = 0; j < n.hid; ++j) s += p[n.w2() + k * n.hid + j] * h[j];
      logit[k] = s;
      mx = std::max(mx, s);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < n.out; ++k) denom += std::exp(logit[k] - mx);
    std::fill(dz.begin(), dz.end(), 0.0);
    for (std::size_t k = 0; k < n.out; ++k) {
      const double dk = std::exp(logit[k] - mx) / denom - (k == y ? 1.0 : 0.0);
      g[n.b2() + k] += dk;
      for (std::size_t j = 0; j < n.hid; ++j) {
        g[n.w2() + k * n.hid + j] += dk * h[j];
        dz[j] += dk * p[n.w2() + k * n.hid + j];
      }
    }
    for (std::size_t j = 0; j < n.hid; ++j) {
      if (z[j] <= 0.0) continue;
      g[n.b1() + j] += dz[j];
      for (std::size_t i = 0; i < n.in; ++i) g[n.w1() + j * n.in + i] += dz[j] * x[i];
    }
  }
  const double m = static_cast<double>(hi - lo);
  for (double& v : g) v /= m;
  return g;
}

}  // namespace

std::vector<std::vector<double>> run_fedavg(const SimulationConfig& cfg,
                                            const std::vector<DeviceShard>& shards,
                                            std::vector<double> global, std::size_t inputs,
                                            std::size_t hidden, std::size_t classes) {
  const Net net{inputs, hidden, classes};
  std::vector<std::vector<double>> trajectory;
  for (std::size_t round = 1; round <= cfg.total_rounds; ++round) {
    // Uniform K-subset by partial Fisher-Yates on the "select" stream.
    Rng pick(derive_seed(cfg.seed, "select", {round}));
    std::vector<std::size_t> ids(cfg.n_devices);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = 0; i < cfg.devices_per_round; ++i)
      std::swap(ids[i], ids[i + pick.below(cfg.n_devices - i)]);
    ids.resize(cfg.devices_per_round);
    std::sort(ids.begin(), ids.end());

    std::vector<double> sum(global.size(), 0.0);
    for (std::size_t d : ids) {
      const auto& data = shards[d].train;
      Rng rng(derive_seed(cfg.seed, "train", {round, d, 0}));
      std::vector<double> local = global;
      std::vector<std::size_t> order(data.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t e = 0; e < cfg.trainer.epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t lo = 0; lo < order.size(); lo += cfg.trainer.batch_size) {
          const std::size_t hi = std::min(order.size(), lo + cfg.trainer.batch_size);
          const auto g = minibatch_grad(net, local, data, order, lo, hi);
          for (std::size_t k = 0; k < local.size(); ++k)
            local[k] -= cfg.trainer.learning_rate * g[k];
        }
      }
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += local[k];
    }
    for (std::size_t k = 0; k < global.size(); ++k)
      global[k] = sum[k] / static_cast<double>(ids.size());
    trajectory.push_back(global);
  }
  return trajectory;
}

}  // namespace fedcd::reference
