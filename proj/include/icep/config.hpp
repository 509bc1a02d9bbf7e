#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icep/autotune.hpp"
#include "icep/dataset.hpp"
#include "icep/network.hpp"
#include "icep/pipeline.hpp"

namespace icep {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything an experiment needs, parsed and validated from one JSON file.
/// config_hash is FNV-1a64 of the canonical serialization after CLI
/// overrides, so outputs are traceable to the effective configuration.
struct ExperimentConfig {
  // model
  std::vector<int> input_shape{3, 16, 16};
  int classes = 10;
  std::vector<LayerSpec> layers;  // empty = default CNN

  // data
  DataFormat format = DataFormat::synthetic;
  std::vector<std::string> train_paths, test_paths;
  bool synthesize = false;
  BlobSpec blob;  // count field unused; the two below rule
  int train_count = 0, test_count = 0;

  // schedule
  std::string schedule_path;      // empty = uniform default schedule
  double uniform_ratio = 0.6;

  Criterion criterion;
  PipelineToggles toggles;
  HyperParams hyper;

  bool has_space = false;
  SearchSpace space;

  TrainOptions train_opt;
  int pretrain_epochs = 5;

  SubsampleSpec sub;
  uint64_t seed = 0;
  std::string out_dir = "runs";
  std::string checkpoint_path;

  std::string config_hash;
};

/// CLI-flag overrides folded into the JSON before validation and hashing.
struct ConfigOverrides {
  std::optional<std::string> criterion;
  std::optional<std::string> data_format;
  std::optional<std::string> inner;
  std::optional<double> lr_base, lr_delta, lr_p, lr_beta;
};

/// Strict parse: unknown keys, wrong types, or out-of-range values raise
/// ConfigError naming the offending key. No file or network I/O happens
/// here beyond reading the config itself (and a schedule/space file when
/// referenced).
ExperimentConfig load_config(const std::string& path, const ConfigOverrides& ov = {});

}  // namespace icep
