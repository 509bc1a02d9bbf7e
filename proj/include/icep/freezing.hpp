#pragma once

#include <functional>
#include <vector>

#include "icep/pruning.hpp"

namespace icep {

struct LayerDelta {
  int layer_index = 0;
  double l1_change = 0.0;  // sum |W_after - W_before| over the probe
  double init_l2 = 0.0;    // sqrt(sum W_before^2) at probe start
  double score = 0.0;      // l1_change / init_l2; +inf when init_l2 == 0
  bool frozen = false;
};

struct FreezeSet {
  std::vector<int> frozen_layer_indices;
  double eta = 0.0;
  std::vector<LayerDelta> deltas;  // one per parameterized layer, network order
};

/// Normalized weight change per parameterized layer, weights only (biases
/// excluded). Zero init_l2 yields +inf (layer can never be frozen) and a
/// stderr warning.
std::vector<LayerDelta> layer_scores(const Network& before, const Network& after);

/// The floor(eta * L) lowest-scoring layers, L = parameterized-layer count
/// == scores.size(). Ties break toward the lower layer index; +inf scores
/// are never selected.
std::vector<int> select_frozen(const std::vector<LayerDelta>& scores, double eta);

/// Runs one fine-tune pass over the network in place; what it measures or
/// records around the epoch is the caller's business.
using FineTuneFn = std::function<void(Network&)>;

/// Schedule step 1 doubles as the freeze probe: prune its action, snapshot
/// the weights, run `ft` once (always, whatever the accuracy gate would
/// say), score the observed movement, and freeze the floor(eta * L)
/// least-moving parameterized layers. Probe weight updates are kept; runs
/// at most once per pipeline, on a network with nothing frozen yet.
FreezeSet probe_and_freeze(Network& net, const PruneSchedule& schedule, double eta,
                           const Criterion& crit, const Dataset& train,
                           const FineTuneFn& ft);

}  // namespace icep
