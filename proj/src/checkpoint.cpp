#include "icep/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace icep {

constexpr uint32_t kVersion = 1;

static void put_u32(std::ostream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}

static void put_shape(std::ostream& f, const std::vector<int>& s) {
  put_u32(f, static_cast<uint32_t>(s.size()));
  for (int d : s) put_u32(f, static_cast<uint32_t>(d));
}

void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError(path + ": cannot open for write");
  f.write("ICEP", 4);
  put_u32(f, kVersion);
  put_shape(f, net.input_shape);
  put_u32(f, static_cast<uint32_t>(net.layers.size()));
  for (const Layer& L : net.layers) {
    put_u32(f, static_cast<uint32_t>(L.kind));
    put_u32(f, (L.frozen ? 1u : 0u) | (L.prunable() ? 2u : 0u));
    put_u32(f, static_cast<uint32_t>(L.window));
    put_shape(f, L.weights.shape);
    put_shape(f, L.bias.shape);
  }
  for (const Layer& L : net.layers) {
    f.write(reinterpret_cast<const char*>(L.weights.ptr()),
            static_cast<std::streamsize>(L.weights.size() * 4));
    f.write(reinterpret_cast<const char*>(L.bias.ptr()),
            static_cast<std::streamsize>(L.bias.size() * 4));
  }
  for (const Layer& L : net.layers) {
    if (!L.prunable()) continue;
    std::vector<unsigned char> bits((L.mask.size() + 7) / 8, 0);
    for (size_t i = 0; i < L.mask.size(); ++i)
      if (L.mask[i]) bits[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
    f.write(reinterpret_cast<const char*>(bits.data()),
            static_cast<std::streamsize>(bits.size()));
  }
  if (!f) throw CheckpointError(path + ": write failed");
}

namespace {
struct Reader {
  std::string path;
  std::vector<char> buf;
  size_t at = 0;

  void need(size_t n) const {
    if (at + n > buf.size())
      throw CheckpointError(path + " @" + std::to_string(at) + ": truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + at, 4);
    at += 4;
    return v;
  }
  std::vector<int> shape() {
    const uint32_t rank = u32();
    if (rank > 4) throw CheckpointError(path + ": implausible tensor rank");
    std::vector<int> s(rank);
    for (auto& d : s) d = static_cast<int>(u32());
    return s;
  }
  void raw(void* dst, size_t n) {
    need(n);
    std::memcpy(dst, buf.data() + at, n);
    at += n;
  }
};
}  // namespace

Network load_checkpoint(const std::string& path) {
  Reader r;
  r.path = path;
  {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError(path + ": cannot open");
    f.seekg(0, std::ios::end);
    r.buf.resize(static_cast<size_t>(f.tellg()));
    f.seekg(0);
    if (!r.buf.empty()) f.read(r.buf.data(), static_cast<std::streamsize>(r.buf.size()));
    if (!f) throw CheckpointError(path + ": read failed");
  }
  r.need(8);
  if (std::memcmp(r.buf.data(), "ICEP", 4) != 0)
    throw CheckpointError(path + ": bad magic, expected ICEP");
  r.at = 4;
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointError(path + ": version " + std::to_string(version) +
                          ", this build reads " + std::to_string(kVersion));
  Network net;
  net.input_shape = r.shape();
  const uint32_t layer_count = r.u32();
  if (layer_count == 0 || layer_count > 1024)
    throw CheckpointError(path + ": implausible layer count");
  net.layers.resize(layer_count);
  std::vector<bool> has_mask(layer_count, false);
  for (size_t i = 0; i < net.layers.size(); ++i) {
    Layer& L = net.layers[i];
    const uint32_t kind = r.u32();
    if (kind > static_cast<uint32_t>(LayerKind::flatten))
      throw CheckpointError(path + ": unknown layer kind " + std::to_string(kind));
    L.kind = static_cast<LayerKind>(kind);
    const uint32_t flags = r.u32();
    L.frozen = (flags & 1u) != 0;
    has_mask[i] = (flags & 2u) != 0;
    L.window = static_cast<int>(r.u32());
    // Rank 0 marks an absent tensor; Tensor({}) would hold one scalar.
    auto read_tensor = [&r]() {
      std::vector<int> s = r.shape();
      return s.empty() ? Tensor() : Tensor(std::move(s));
    };
    L.weights = read_tensor();
    L.bias = read_tensor();
  }
  for (Layer& L : net.layers) {
    r.raw(L.weights.ptr(), static_cast<size_t>(L.weights.size()) * 4);
    r.raw(L.bias.ptr(), static_cast<size_t>(L.bias.size()) * 4);
  }
  for (size_t i = 0; i < net.layers.size(); ++i) {
    if (!has_mask[i]) continue;
    Layer& L = net.layers[i];
    if (!L.parameterized())
      throw CheckpointError(path + ": mask flag on unparameterized layer " + std::to_string(i));
    const size_t n = static_cast<size_t>(L.weights.dim(0));
    std::vector<unsigned char> bits((n + 7) / 8);
    r.raw(bits.data(), bits.size());
    L.mask.resize(n);
    for (size_t k = 0; k < n; ++k) L.mask[k] = (bits[k / 8] >> (k % 8)) & 1u;
  }
  if (r.at != r.buf.size())
    throw CheckpointError(path + " @" + std::to_string(r.at) + ": trailing bytes");
  try {
    net.finalize();
  } catch (const std::exception& e) {
    throw CheckpointError(path + ": inconsistent network: " + e.what());
  }
  return net;
}

}  // namespace icep
