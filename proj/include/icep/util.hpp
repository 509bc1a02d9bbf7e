#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace icep {

uint64_t fnv1a64(const void* data, size_t n);
uint64_t fnv1a64(const std::string& s);

/// Derives an independent RNG stream seed from (seed, tag).
uint64_t mix_seed(uint64_t seed, const std::string& tag);
uint64_t mix_seed(uint64_t seed, uint64_t index);

std::string to_hex(uint64_t v);

/// %.9g rendering, with inf/nan spelled out; used for every numeric report
/// field so rerenders of equal values are byte-stable.
std::string format_g9(double v);

}  // namespace icep
