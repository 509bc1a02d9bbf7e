#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icep/network.hpp"

namespace icep {

enum class CriterionKind { l1_norm, random, entropy, mean_activation };

const char* criterion_name(CriterionKind k);
CriterionKind parse_criterion(const std::string& name);  // l1|random|entropy|mean_act

struct Criterion {
  CriterionKind kind = CriterionKind::l1_norm;
  uint64_t rng_seed = 0;         // random only
  int calib_batch_size = 256;    // entropy / mean_activation
  int histogram_bins = 32;       // entropy
};

struct PruneAction {
  int layer_index = 0;
  float target_ratio = 0.0f;  // cumulative fraction of original structures pruned
};

struct PruneSchedule {
  std::vector<PruneAction> actions;
};

/// One score per output structure of the layer; LOWER = pruned earlier.
/// Already-masked structures score -inf. l1_norm sums |W| per structure;
/// random draws uniform scores seeded by (rng_seed, layer_index); entropy
/// builds a histogram of per-sample global-average-pooled layer outputs and
/// takes Shannon entropy in nats; mean_activation averages post-ReLU outputs
/// over samples and positions. The data-driven criteria need calib != null.
std::vector<float> score_structures(const Network& net, int layer_index,
                                    const Criterion& c, const Dataset* calib);

/// Masks the lowest-scored retained structures so the total masked count
/// reaches floor(target_ratio * structure_count). Ties break toward the
/// lower index; never unmasks. Frozen layers are pruned like any other.
void apply_prune(Network& net, const PruneAction& a, const std::vector<float>& scores);

/// Unmasked parameters: weights and biases of retained structures, minus
/// input columns fed by masked upstream structures.
int64_t param_count(const Network& net);

/// param_count / original_count as a plain double ratio.
double alpha(const Network& net, int64_t original_count);

/// One action per prunable layer, front to back, all at `ratio`.
PruneSchedule default_schedule(const Network& net, float ratio);

/// Text file, one "layer_index,ratio" pair per line; # starts a comment.
PruneSchedule load_schedule(const std::string& path);

void validate_schedule(const Network& net, const PruneSchedule& s);

}  // namespace icep
