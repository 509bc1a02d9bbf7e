#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "icep/autotune.hpp"
#include "icep/freezing.hpp"
#include "icep/pruning.hpp"

namespace icep {

struct PipelineToggles {
  bool use_threshold = true;
  bool use_freezing = true;
  bool use_scheduler = true;
};

struct TrainOptions {
  int batch_size = 64;
  float momentum = 0.9f;
  float weight_decay = 1e-4f;
  InnerKind inner = InnerKind::constant;
  int final_extra_epochs = 0;  // extra full fine-tune epochs after the schedule
};

struct StepRecord {
  int step = 0;  // 1-based position in the schedule
  int layer_index = 0;
  double alpha = 1.0;  // unmasked-parameter fraction after this step's prune
  double acc_before_ft = 0.0;
  bool triggered = false;  // the gate condition, whether or not a fine-tune ran
  double lr_max_used = 0.0;  // NaN when the step ran no fine-tune
  double acc_after = 0.0;
  double step_seconds = 0.0;
};

struct RunReport {
  std::string pipeline_name = "pft";
  std::vector<StepRecord> records;
  double total_seconds = 0.0;
  double acc_orig = 0.0;
  double final_accuracy = 0.0;
  double alpha_final = 1.0;
  int ft_epochs = 0;  // fine-tune epochs actually run (probe included)
  bool aborted = false;
  std::string abort_reason;
  // config echo
  HyperParams params;
  PipelineToggles toggles;
  uint64_t master_seed = 0;
  std::string config_hash;
  std::vector<LayerDelta> freeze_deltas;  // emitted by the freeze probe
};

/// One pass over train in shuffled batches: forward, mean-CE backward, one
/// SGD step per batch with a fresh optimizer state. The per-step LR follows
/// `inner` capped at lr_max. The rng drives only the shuffle.
void fine_tune_epoch(Network& net, const Dataset& train, double lr_max,
                     const TrainOptions& opt, std::mt19937_64& rng);

/// The prune-fine-tune operator. Per step: prune, test, gate on
/// acc_orig - acc >= theta, and when triggered fine-tune one epoch at the
/// alpha-dependent LR cap (lr_base when use_scheduler is off). acc_orig is
/// measured once at entry. With use_freezing, schedule step 1 runs as the
/// freeze probe (fine-tunes regardless of the gate) when floor(eta * L) >= 1.
/// A non-finite loss aborts with a partial report rather than throwing.
std::pair<Network, RunReport> pft(const Network& input, const PruneSchedule& schedule,
                                  const HyperParams& h, const Dataset& train,
                                  const Dataset& test, const Criterion& crit,
                                  const PipelineToggles& toggles, const TrainOptions& opt,
                                  uint64_t master_seed);

struct IceResult {
  Network model;
  RunReport report;  // Stage-2 run
  TuneResult tune;
};

/// Stage 1 alone: grid-searches the space with pft on subsampled train/test
/// splits. Each trial starts from a fresh copy of the input model with a
/// seed derived from (master_seed, trial index) and scores
/// objective(trial PT, trial accuracy drop); aborted trials count as failed.
TuneResult tune_stage1(const Network& input, const PruneSchedule& schedule,
                       const SearchSpace& space, const Dataset& train, const Dataset& test,
                       const SubsampleSpec& sub, const Criterion& crit,
                       const PipelineToggles& toggles, const TrainOptions& opt,
                       uint64_t master_seed);

/// Stage 1 as above, then Stage 2 reruns pft on the full data with the
/// winner and master_seed itself.
IceResult ice_pipeline(const Network& input, const PruneSchedule& schedule,
                       const SearchSpace& space, const Dataset& train, const Dataset& test,
                       const SubsampleSpec& sub, const Criterion& crit,
                       const PipelineToggles& toggles, const TrainOptions& opt,
                       uint64_t master_seed);

/// Prune each step then always fine-tune one epoch at constant lr_base: no
/// gate, no freezing, no LR cap. Seed handling matches pft, so an all-off
/// pft with theta = -inf reproduces it bit for bit.
std::pair<Network, RunReport> baseline_pipeline(const Network& input,
                                                const PruneSchedule& schedule,
                                                const Dataset& train, const Dataset& test,
                                                const Criterion& crit, double lr_base,
                                                const TrainOptions& opt, uint64_t master_seed);

}  // namespace icep
