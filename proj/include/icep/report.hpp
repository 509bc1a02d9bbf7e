#pragma once

#include <string>
#include <vector>

#include "icep/pipeline.hpp"

namespace icep {

/// The slice of a summary JSON that comparison and rendering need.
struct RunSummary {
  std::string pipeline;
  std::string config_hash;
  uint64_t master_seed = 0;
  double acc_orig = 0.0;
  double final_accuracy = 0.0;
  double total_seconds = 0.0;
  double alpha_final = 1.0;
  int ft_epochs = 0;
  bool aborted = false;
  std::string source_path;
};

/// One CSV row per StepRecord; numbers rendered %.9g, triggered as 0/1,
/// lr_max_used "none" on steps that ran no fine-tune.
void write_report_csv(const RunReport& r, const std::string& path);

void write_summary_json(const RunReport& r, const std::string& path);

RunSummary read_summary_json(const std::string& path);

RunSummary summarize(const RunReport& r);

/// layer_index,l1_change,init_l2,score,frozen rows from the freeze probe.
void write_freeze_csv(const std::vector<LayerDelta>& deltas, const std::string& path);

/// One row per grid trial: the six hyperparameters, PT, delta_a, e, failed.
void write_trials_csv(const TuneResult& t, const std::string& path);

/// Merged table (pipeline, pruned_ratio, final_accuracy, total_seconds,
/// speedup vs the baseline row) plus an x=seconds,y=accuracy scatter file.
void write_comparison(const std::vector<RunSummary>& rows, const std::string& table_path,
                      const std::string& plot_path);

std::string render_summary(const RunSummary& s);

}  // namespace icep
