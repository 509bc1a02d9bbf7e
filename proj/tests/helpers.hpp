#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "icep/network.hpp"

namespace icep::testutil {

inline Layer dense_layer(std::vector<int> wshape, std::vector<float> w, std::vector<float> b,
                         bool masked = true) {
  Layer L;
  L.kind = LayerKind::dense;
  L.weights = Tensor(wshape, std::move(w));
  L.bias = Tensor({wshape[0]}, std::move(b));
  if (masked) L.mask.assign(static_cast<size_t>(wshape[0]), 1);
  return L;
}

inline Layer conv_layer(std::vector<int> wshape, std::vector<float> w, std::vector<float> b,
                        bool masked = true) {
  Layer L;
  L.kind = LayerKind::conv2d;
  L.weights = Tensor(wshape, std::move(w));
  L.bias = Tensor({wshape[0]}, std::move(b));
  if (masked) L.mask.assign(static_cast<size_t>(wshape[0]), 1);
  return L;
}

inline Layer plain_layer(LayerKind k, int window = 0) {
  Layer L;
  L.kind = k;
  L.window = window;
  return L;
}

/// Parameter bytes of one layer, for bit-identity checks.
inline std::string layer_bytes(const Layer& L) {
  std::string s;
  s.append(reinterpret_cast<const char*>(L.weights.ptr()), L.weights.size() * 4);
  s.append(reinterpret_cast<const char*>(L.bias.ptr()), L.bias.size() * 4);
  return s;
}

inline std::string net_bytes(const Network& net) {
  std::string s;
  for (const auto& L : net.layers) s += layer_bytes(L);
  for (const auto& L : net.layers)
    for (uint8_t m : L.mask) s.push_back(static_cast<char>(m));
  return s;
}

/// Tiny labeled dataset from explicit rows.
inline Dataset toy_dataset(std::vector<int> shape, int classes,
                           std::vector<std::pair<std::vector<float>, int>> rows) {
  Dataset d;
  d.shape = std::move(shape);
  d.class_count = classes;
  for (auto& [x, y] : rows) {
    Sample s;
    s.x = std::move(x);
    s.label = y;
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace icep::testutil
