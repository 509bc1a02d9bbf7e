#pragma once

#include <string>
#include <vector>

#include "icep/config.hpp"

namespace icep {

/// Each command returns a process exit code: 0 ok, 3 runtime failure
/// (config problems throw ConfigError before any compute and map to 2 in
/// the CLI driver). Output files land in cfg.out_dir with the config hash
/// in their names.

int cmd_pretrain(const ExperimentConfig& cfg);

/// mode "ice" (two-stage when a space is configured, fixed-hyper pft
/// otherwise) or "baseline".
int cmd_prune(const ExperimentConfig& cfg, const std::string& mode);

/// Stage 1 only: dumps the trial table and the winning hyperparameters.
int cmd_autotune(const ExperimentConfig& cfg);

/// Full pipeline plus the three leave-one-out variants, shared master seed,
/// one merged CSV across the four runs.
int cmd_ablate(const ExperimentConfig& cfg);

int cmd_compare(const std::vector<std::string>& summary_paths, const std::string& out_table,
                const std::string& out_plot);

int cmd_report(const std::string& summary_path);

}  // namespace icep
