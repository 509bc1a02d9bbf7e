#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icep/tensor.hpp"

namespace icep {

struct Sample {
  std::vector<float> x;
  int label = 0;
};

/// Immutable after load; all samples share one shape, labels in [0, class_count).
struct Dataset {
  std::vector<int> shape;  // per-sample, e.g. {3,32,32}
  int class_count = 0;
  std::string split_tag = "train";
  std::vector<Sample> samples;

  size_t size() const { return samples.size(); }
  int64_t sample_numel() const { return Tensor::numel(shape); }
};

struct SubsampleSpec {
  double fraction = 0.1;
  uint64_t seed = 0;
  bool stratified = true;
};

enum class DataFormat { cifar10, synthetic };

DataFormat parse_data_format(const std::string& name);

/// Reads one file of the given format. Throws ParseError naming the byte
/// offset on a corrupt header or truncated payload.
Dataset load_dataset(const std::string& path, DataFormat format,
                     const std::string& split_tag);

/// Concatenates several files of one format (shapes must agree).
Dataset load_dataset_files(const std::vector<std::string>& paths, DataFormat format,
                           const std::string& split_tag);

/// Self-describing binary format, magic "ICED".
void save_synthetic(const Dataset& d, const std::string& path);

struct BlobSpec {
  int class_count = 10;
  int count = 1000;  // total samples, spread evenly over classes
  std::vector<int> shape = {3, 16, 16};
  uint64_t seed = 0;
  float noise = 1.0f;  // stddev around the class prototype
};

/// Gaussian-blob classification set: one random prototype per class, samples
/// are prototype + noise. Prototypes depend only on (seed, class_count, shape);
/// noise also mixes in split_tag, so "train" and "test" built from one spec
/// share class prototypes but not samples.
Dataset make_blobs(const BlobSpec& spec, const std::string& split_tag);

/// Stratified (default) or plain random subsample; pure function of (d, spec).
Dataset subsample(const Dataset& d, const SubsampleSpec& spec);

/// Assembles samples[indices] into a batch tensor (N, shape...) plus labels.
void make_batch(const Dataset& d, const std::vector<int>& indices, Tensor& batch,
                std::vector<int>& labels);

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace icep
