#include "icep/freezing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace icep {

std::vector<LayerDelta> layer_scores(const Network& before, const Network& after) {
  if (before.layers.size() != after.layers.size())
    throw std::invalid_argument("layer_scores: networks differ in depth");
  std::vector<LayerDelta> out;
  for (size_t i = 0; i < before.layers.size(); ++i) {
    const Layer& b = before.layers[i];
    const Layer& a = after.layers[i];
    if (!b.parameterized()) continue;
    if (b.weights.shape != a.weights.shape)
      throw std::invalid_argument("layer_scores: layer " + std::to_string(i) +
                                  " shapes differ");
    LayerDelta d;
    d.layer_index = static_cast<int>(i);
    double l1 = 0.0, sq = 0.0;
    for (size_t k = 0; k < b.weights.data.size(); ++k) {
      l1 += std::fabs(static_cast<double>(a.weights.data[k]) -
                      static_cast<double>(b.weights.data[k]));
      sq += static_cast<double>(b.weights.data[k]) * static_cast<double>(b.weights.data[k]);
    }
    d.l1_change = l1;
    d.init_l2 = std::sqrt(sq);
    if (d.init_l2 > 0.0) {
      d.score = d.l1_change / d.init_l2;
    } else {
      d.score = std::numeric_limits<double>::infinity();
      std::fprintf(stderr, "warning: layer %zu has zero initial weight norm, never frozen\n", i);
    }
    out.push_back(d);
  }
  return out;
}

std::vector<int> select_frozen(const std::vector<LayerDelta>& scores, double eta) {
  if (!(eta >= 0.0) || eta >= 1.0)
    throw std::invalid_argument("freeze: eta must be in [0,1)");
  const size_t want = static_cast<size_t>(
      std::floor(eta * static_cast<double>(scores.size())));
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    return scores[x].score < scores[y].score;
  });
  std::vector<int> chosen;
  for (size_t k = 0; k < order.size() && chosen.size() < want; ++k) {
    if (std::isinf(scores[order[k]].score)) break;  // +inf tail, never frozen
    chosen.push_back(scores[order[k]].layer_index);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

FreezeSet probe_and_freeze(Network& net, const PruneSchedule& schedule, double eta,
                           const Criterion& crit, const Dataset& train,
                           const FineTuneFn& ft) {
  if (schedule.actions.empty()) throw std::invalid_argument("freeze probe: empty schedule");
  if (!(eta >= 0.0) || eta >= 1.0)
    throw std::invalid_argument("freeze: eta must be in [0,1)");

  const PruneAction& a = schedule.actions.front();
  std::vector<float> scores = score_structures(net, a.layer_index, crit, &train);
  apply_prune(net, a, scores);

  const Network snapshot = net;
  ft(net);

  FreezeSet fs;
  fs.eta = eta;
  fs.deltas = layer_scores(snapshot, net);
  fs.frozen_layer_indices = select_frozen(fs.deltas, eta);
  for (int i : fs.frozen_layer_indices) {
    net.layers[static_cast<size_t>(i)].frozen = true;
    for (LayerDelta& d : fs.deltas)
      if (d.layer_index == i) d.frozen = true;
  }
  return fs;
}

}  // namespace icep
