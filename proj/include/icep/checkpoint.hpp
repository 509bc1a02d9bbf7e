#pragma once

#include <string>

#include "icep/network.hpp"

namespace icep {

/// Binary network snapshot, magic "ICEP", version 1. Layout: header with
/// input shape and per-layer descriptors (kind, frozen, window, param
/// shapes), then raw little-endian f32 parameters in declaration order,
/// then per-prunable-layer masks as packed bits (LSB first). Save/load
/// round-trips bit-exactly, including masked-out parameter values.
void save_checkpoint(const Network& net, const std::string& path);

Network load_checkpoint(const std::string& path);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace icep
