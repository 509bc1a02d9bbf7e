#include "icep/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace icep {

const char* criterion_name(CriterionKind k) {
  switch (k) {
    case CriterionKind::l1_norm: return "l1";
    case CriterionKind::random: return "random";
    case CriterionKind::entropy: return "entropy";
    case CriterionKind::mean_activation: return "mean_act";
  }
  return "?";
}

CriterionKind parse_criterion(const std::string& name) {
  if (name == "l1" || name == "l1_norm") return CriterionKind::l1_norm;
  if (name == "random") return CriterionKind::random;
  if (name == "entropy") return CriterionKind::entropy;
  if (name == "mean_act" || name == "mean_activation") return CriterionKind::mean_activation;
  throw std::invalid_argument("unknown criterion: " + name);
}

/// Per-sample, per-structure summary of one layer's output: conv feature maps
/// are average-pooled over space, dense outputs taken as-is. Shape (N, S).
static Tensor pooled_activations(const Network& net, int layer_index, const Dataset& calib,
                                 int batch_size) {
  const size_t n = std::min(calib.samples.size(), static_cast<size_t>(batch_size));
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  Tensor batch;
  std::vector<int> labels;
  make_batch(calib, idx, batch, labels);
  Tensor act = forward(net, batch, nullptr, layer_index);
  const int s_count = act.dim(1);
  Tensor pooled({static_cast<int>(n), s_count});
  const int64_t plane = act.size() / (static_cast<int64_t>(n) * s_count);
  for (size_t i = 0; i < n; ++i) {
    for (int s = 0; s < s_count; ++s) {
      const float* p = act.ptr() + (static_cast<int64_t>(i) * s_count + s) * plane;
      double sum = 0.0;
      for (int64_t k = 0; k < plane; ++k) sum += p[k];
      pooled.data[i * static_cast<size_t>(s_count) + static_cast<size_t>(s)] =
          static_cast<float>(sum / static_cast<double>(plane));
    }
  }
  return pooled;
}

std::vector<float> score_structures(const Network& net, int layer_index,
                                    const Criterion& c, const Dataset* calib) {
  const Layer& L = net.layers.at(static_cast<size_t>(layer_index));
  if (!L.prunable())
    throw std::invalid_argument("score: layer " + std::to_string(layer_index) +
                                " is not prunable");
  const int s_count = L.structure_count();
  std::vector<float> scores(static_cast<size_t>(s_count), 0.0f);
  switch (c.kind) {
    case CriterionKind::l1_norm: {
      const int64_t per = L.weights.size() / s_count;
      for (int s = 0; s < s_count; ++s) {
        const float* p = L.weights.ptr() + per * s;
        double sum = 0.0;
        for (int64_t k = 0; k < per; ++k) sum += std::fabs(p[k]);
        scores[static_cast<size_t>(s)] = static_cast<float>(sum);
      }
      break;
    }
    case CriterionKind::random: {
      std::mt19937_64 rng(c.rng_seed ^
                          (0x9E3779B97F4A7C15ull * (static_cast<uint64_t>(layer_index) + 1)));
      std::uniform_real_distribution<float> uni(0.0f, 1.0f);
      for (auto& s : scores) s = uni(rng);
      break;
    }
    case CriterionKind::entropy: {
      if (!calib || calib->samples.empty())
        throw std::invalid_argument("entropy criterion needs calibration data");
      if (c.calib_batch_size < 1) throw std::invalid_argument("calib_batch_size must be >= 1");
      if (c.histogram_bins < 2) throw std::invalid_argument("histogram_bins must be >= 2");
      Tensor pooled = pooled_activations(net, layer_index, *calib, c.calib_batch_size);
      const int n = pooled.dim(0);
      for (int s = 0; s < s_count; ++s) {
        float lo = pooled.data[static_cast<size_t>(s)], hi = lo;
        for (int i = 1; i < n; ++i) {
          const float v = pooled.data[static_cast<size_t>(i) * s_count + static_cast<size_t>(s)];
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        if (!(hi > lo)) {
          scores[static_cast<size_t>(s)] = 0.0f;  // constant map
          continue;
        }
        std::vector<int> hist(static_cast<size_t>(c.histogram_bins), 0);
        for (int i = 0; i < n; ++i) {
          const float v = pooled.data[static_cast<size_t>(i) * s_count + static_cast<size_t>(s)];
          int b = static_cast<int>((v - lo) / (hi - lo) * static_cast<float>(c.histogram_bins));
          b = std::min(b, c.histogram_bins - 1);
          hist[static_cast<size_t>(b)] += 1;
        }
        double h = 0.0;
        for (int cnt : hist) {
          if (cnt == 0) continue;
          const double p = static_cast<double>(cnt) / n;
          h -= p * std::log(p);
        }
        scores[static_cast<size_t>(s)] = static_cast<float>(h);
      }
      break;
    }
    case CriterionKind::mean_activation: {
      if (!calib || calib->samples.empty())
        throw std::invalid_argument("mean_act criterion needs calibration data");
      if (c.calib_batch_size < 1) throw std::invalid_argument("calib_batch_size must be >= 1");
      const size_t n = std::min(calib->samples.size(), static_cast<size_t>(c.calib_batch_size));
      std::vector<int> idx(n);
      for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
      Tensor batch;
      std::vector<int> labels;
      make_batch(*calib, idx, batch, labels);
      Tensor act = forward(net, batch, nullptr, layer_index);
      const int64_t plane = act.size() / (static_cast<int64_t>(n) * s_count);
      for (int s = 0; s < s_count; ++s) {
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
          const float* p = act.ptr() + (static_cast<int64_t>(i) * s_count + s) * plane;
          for (int64_t k = 0; k < plane; ++k) sum += p[k] > 0.0f ? p[k] : 0.0f;
        }
        scores[static_cast<size_t>(s)] =
            static_cast<float>(sum / (static_cast<double>(n) * static_cast<double>(plane)));
      }
      break;
    }
  }
  for (int s = 0; s < s_count; ++s)
    if (!L.mask[static_cast<size_t>(s)])
      scores[static_cast<size_t>(s)] = -std::numeric_limits<float>::infinity();
  return scores;
}

void apply_prune(Network& net, const PruneAction& a, const std::vector<float>& scores) {
  Layer& L = net.layers.at(static_cast<size_t>(a.layer_index));
  if (!L.prunable())
    throw std::invalid_argument("prune: layer " + std::to_string(a.layer_index) +
                                " is not prunable");
  if (!(a.target_ratio >= 0.0f) || a.target_ratio >= 1.0f)
    throw std::invalid_argument("prune: target ratio must be in [0,1)");
  const int s_count = L.structure_count();
  if (static_cast<int>(scores.size()) != s_count)
    throw std::invalid_argument("prune: score count does not match structure count");
  const int want_masked = static_cast<int>(std::floor(
      static_cast<double>(a.target_ratio) * static_cast<double>(s_count)));
  int masked = 0;
  for (uint8_t m : L.mask) masked += m ? 0 : 1;
  if (masked >= want_masked) return;  // never unmask

  std::vector<int> retained;
  for (int s = 0; s < s_count; ++s)
    if (L.mask[static_cast<size_t>(s)]) retained.push_back(s);
  std::stable_sort(retained.begin(), retained.end(), [&](int x, int y) {
    return scores[static_cast<size_t>(x)] < scores[static_cast<size_t>(y)];
  });
  for (int k = 0; k < want_masked - masked; ++k)
    L.mask[static_cast<size_t>(retained[static_cast<size_t>(k)])] = 0;
}

int64_t param_count(const Network& net) {
  int64_t total = 0;
  for (const Layer& L : net.layers) {
    if (!L.parameterized()) continue;
    int64_t out_ret = 0;
    if (L.prunable()) {
      for (uint8_t m : L.mask) out_ret += m ? 1 : 0;
    } else {
      out_ret = L.structure_count();
    }
    int64_t in_ret;
    if (L.kind == LayerKind::dense) {
      in_ret = L.weights.dim(1);
      if (L.input_src >= 0) {
        const Layer& S = net.layers[static_cast<size_t>(L.input_src)];
        int64_t src_ret = 0;
        for (uint8_t m : S.mask) src_ret += m ? 1 : 0;
        in_ret = src_ret * L.input_group;
      }
      total += out_ret * in_ret + out_ret;
    } else {
      in_ret = L.weights.dim(1);
      if (L.input_src >= 0) {
        const Layer& S = net.layers[static_cast<size_t>(L.input_src)];
        int64_t src_ret = 0;
        for (uint8_t m : S.mask) src_ret += m ? 1 : 0;
        in_ret = src_ret;
      }
      total += out_ret * in_ret * L.weights.dim(2) * L.weights.dim(3) + out_ret;
    }
  }
  return total;
}

double alpha(const Network& net, int64_t original_count) {
  if (original_count <= 0) throw std::invalid_argument("alpha: original count must be > 0");
  return static_cast<double>(param_count(net)) / static_cast<double>(original_count);
}

PruneSchedule default_schedule(const Network& net, float ratio) {
  PruneSchedule s;
  for (int i : net.prunable_indices()) s.actions.push_back({i, ratio});
  if (s.actions.empty()) throw std::invalid_argument("schedule: network has no prunable layer");
  return s;
}

PruneSchedule load_schedule(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("schedule: cannot open " + path);
  PruneSchedule s;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected layer_index,ratio");
    try {
      PruneAction act;
      act.layer_index = std::stoi(line.substr(0, comma));
      act.target_ratio = std::stof(line.substr(comma + 1));
      s.actions.push_back(act);
    } catch (const std::exception&) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected layer_index,ratio");
    }
  }
  if (s.actions.empty())
    throw std::invalid_argument(path + ": empty schedule");
  return s;
}

void validate_schedule(const Network& net, const PruneSchedule& s) {
  if (s.actions.empty()) throw std::invalid_argument("schedule: empty");
  for (const PruneAction& a : s.actions) {
    if (a.layer_index < 0 || a.layer_index >= static_cast<int>(net.layers.size()))
      throw std::invalid_argument("schedule: layer index " + std::to_string(a.layer_index) +
                                  " out of range");
    if (!net.layers[static_cast<size_t>(a.layer_index)].prunable())
      throw std::invalid_argument("schedule: layer " + std::to_string(a.layer_index) +
                                  " is not prunable");
    if (!(a.target_ratio >= 0.0f) || a.target_ratio >= 1.0f)
      throw std::invalid_argument("schedule: ratio must be in [0,1)");
  }
}

}  // namespace icep
