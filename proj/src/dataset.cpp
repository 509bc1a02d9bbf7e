#include "icep/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>

#include "icep/util.hpp"

namespace icep {

DataFormat parse_data_format(const std::string& name) {
  if (name == "cifar10") return DataFormat::cifar10;
  if (name == "synthetic") return DataFormat::synthetic;
  throw std::invalid_argument("unknown data format: " + name);
}

static ParseError parse_error(const std::string& path, int64_t offset, const std::string& what) {
  return ParseError(path + " @" + std::to_string(offset) + ": " + what);
}

static std::vector<char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError(path + ": cannot open");
  f.seekg(0, std::ios::end);
  const std::streamoff len = f.tellg();
  f.seekg(0);
  std::vector<char> buf(static_cast<size_t>(len));
  if (len > 0) f.read(buf.data(), len);
  if (!f) throw ParseError(path + ": read failed");
  return buf;
}

static uint32_t get_u32(const std::vector<char>& buf, size_t at) {
  uint32_t v;
  std::memcpy(&v, buf.data() + at, 4);
  return v;  // little-endian host assumed throughout the binary formats
}

static Dataset load_cifar10(const std::string& path, const std::string& split_tag) {
  const std::vector<char> buf = read_file(path);
  constexpr size_t kRecord = 3073;  // 1 label byte + 3*32*32 pixel bytes
  if (buf.empty() || buf.size() % kRecord != 0)
    throw parse_error(path, static_cast<int64_t>(buf.size()),
                      "size is not a positive multiple of 3073");
  Dataset d;
  d.shape = {3, 32, 32};
  d.class_count = 10;
  d.split_tag = split_tag;
  d.samples.resize(buf.size() / kRecord);
  for (size_t r = 0; r < d.samples.size(); ++r) {
    const unsigned char* rec = reinterpret_cast<const unsigned char*>(buf.data()) + r * kRecord;
    if (rec[0] > 9)
      throw parse_error(path, static_cast<int64_t>(r * kRecord),
                        "label " + std::to_string(rec[0]) + " out of range");
    Sample& s = d.samples[r];
    s.label = rec[0];
    s.x.resize(3072);
    for (size_t i = 0; i < 3072; ++i) s.x[i] = static_cast<float>(rec[1 + i]) / 255.0f;
  }
  return d;
}

static Dataset load_synthetic(const std::string& path, const std::string& split_tag) {
  const std::vector<char> buf = read_file(path);
  if (buf.size() < 24 || std::memcmp(buf.data(), "ICED", 4) != 0)
    throw parse_error(path, 0, "bad magic, expected ICED");
  Dataset d;
  d.split_tag = split_tag;
  d.class_count = static_cast<int>(get_u32(buf, 4));
  const uint32_t count = get_u32(buf, 8);
  d.shape = {static_cast<int>(get_u32(buf, 12)), static_cast<int>(get_u32(buf, 16)),
             static_cast<int>(get_u32(buf, 20))};
  if (d.class_count < 1 || d.shape[0] < 1 || d.shape[1] < 1 || d.shape[2] < 1)
    throw parse_error(path, 4, "non-positive class count or shape");
  const size_t numel = static_cast<size_t>(d.sample_numel());
  const size_t rec = 1 + numel * 4;
  if (buf.size() != 24 + static_cast<size_t>(count) * rec)
    throw parse_error(path, static_cast<int64_t>(buf.size()),
                      "size does not match declared sample count");
  d.samples.resize(count);
  for (size_t r = 0; r < count; ++r) {
    const char* p = buf.data() + 24 + r * rec;
    const unsigned char label = static_cast<unsigned char>(*p);
    if (label >= d.class_count)
      throw parse_error(path, static_cast<int64_t>(24 + r * rec),
                        "label " + std::to_string(label) + " out of range");
    Sample& s = d.samples[r];
    s.label = label;
    s.x.resize(numel);
    std::memcpy(s.x.data(), p + 1, numel * 4);
  }
  return d;
}

Dataset load_dataset(const std::string& path, DataFormat format, const std::string& split_tag) {
  switch (format) {
    case DataFormat::cifar10: return load_cifar10(path, split_tag);
    case DataFormat::synthetic: return load_synthetic(path, split_tag);
  }
  throw std::logic_error("unreachable");
}

Dataset load_dataset_files(const std::vector<std::string>& paths, DataFormat format,
                           const std::string& split_tag) {
  if (paths.empty()) throw std::invalid_argument("no dataset files given");
  Dataset all = load_dataset(paths[0], format, split_tag);
  for (size_t i = 1; i < paths.size(); ++i) {
    Dataset d = load_dataset(paths[i], format, split_tag);
    if (d.shape != all.shape || d.class_count != all.class_count)
      throw ParseError(paths[i] + ": shape or class count differs from " + paths[0]);
    all.samples.insert(all.samples.end(), std::make_move_iterator(d.samples.begin()),
                       std::make_move_iterator(d.samples.end()));
  }
  return all;
}

void save_synthetic(const Dataset& d, const std::string& path) {
  if (d.shape.size() != 3) throw std::invalid_argument("save: shape must be CxHxW");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(path + ": cannot open for write");
  auto put_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  f.write("ICED", 4);
  put_u32(static_cast<uint32_t>(d.class_count));
  put_u32(static_cast<uint32_t>(d.samples.size()));
  for (int dim : d.shape) put_u32(static_cast<uint32_t>(dim));
  const size_t numel = static_cast<size_t>(d.sample_numel());
  for (const Sample& s : d.samples) {
    const unsigned char label = static_cast<unsigned char>(s.label);
    f.write(reinterpret_cast<const char*>(&label), 1);
    f.write(reinterpret_cast<const char*>(s.x.data()), static_cast<std::streamsize>(numel * 4));
  }
  if (!f) throw std::runtime_error(path + ": write failed");
}

Dataset make_blobs(const BlobSpec& spec, const std::string& split_tag) {
  if (spec.class_count < 2 || spec.count < spec.class_count || spec.shape.size() != 3)
    throw std::invalid_argument("blobs: need >= 2 classes, count >= classes, CxHxW shape");
  Dataset d;
  d.shape = spec.shape;
  d.class_count = spec.class_count;
  d.split_tag = split_tag;
  const size_t numel = static_cast<size_t>(d.sample_numel());

  std::mt19937_64 proto_rng(spec.seed);
  std::normal_distribution<float> unit(0.0f, 1.0f);
  std::vector<std::vector<float>> protos(static_cast<size_t>(spec.class_count));
  for (auto& p : protos) {
    p.resize(numel);
    for (float& v : p) v = unit(proto_rng);
  }

  std::mt19937_64 noise_rng(mix_seed(spec.seed, split_tag));
  std::normal_distribution<float> noise(0.0f, spec.noise);
  d.samples.resize(static_cast<size_t>(spec.count));
  for (size_t i = 0; i < d.samples.size(); ++i) {
    Sample& s = d.samples[i];
    s.label = static_cast<int>(i) % spec.class_count;
    const auto& p = protos[static_cast<size_t>(s.label)];
    s.x.resize(numel);
    for (size_t k = 0; k < numel; ++k) s.x[k] = p[k] + noise(noise_rng);
  }
  return d;
}

Dataset subsample(const Dataset& d, const SubsampleSpec& spec) {
  if (!(spec.fraction > 0.0) || spec.fraction > 1.0)
    throw std::invalid_argument("subsample: fraction must be in (0,1]");
  const size_t total = d.samples.size();
  const size_t target = static_cast<size_t>(std::llround(spec.fraction * static_cast<double>(total)));
  if (target < 1) throw std::invalid_argument("subsample: fraction selects zero samples");

  std::mt19937_64 rng(spec.seed);
  std::vector<int> chosen;
  chosen.reserve(target);
  if (!spec.stratified) {
    std::vector<int> idx(total);
    for (size_t i = 0; i < total; ++i) idx[i] = static_cast<int>(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    chosen.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target));
  } else {
    std::vector<std::vector<int>> by_class(static_cast<size_t>(d.class_count));
    for (size_t i = 0; i < total; ++i)
      by_class[static_cast<size_t>(d.samples[i].label)].push_back(static_cast<int>(i));

    // Largest-remainder quotas keep every class within one sample of its
    // exact proportional share.
    std::vector<size_t> quota(by_class.size());
    std::vector<std::pair<double, size_t>> rem;
    size_t assigned = 0;
    for (size_t c = 0; c < by_class.size(); ++c) {
      const double exact =
          static_cast<double>(target) * static_cast<double>(by_class[c].size()) /
          static_cast<double>(total);
      quota[c] = static_cast<size_t>(exact);
      assigned += quota[c];
      rem.emplace_back(exact - static_cast<double>(quota[c]), c);
    }
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (size_t k = 0; assigned < target; ++k, ++assigned) quota[rem[k % rem.size()].second] += 1;

    for (size_t c = 0; c < by_class.size(); ++c) {
      auto& pool = by_class[c];
      if (quota[c] > pool.size())
        throw std::invalid_argument("subsample: class " + std::to_string(c) +
                                    " has too few samples for its quota");
      std::shuffle(pool.begin(), pool.end(), rng);
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    }
  }
  std::sort(chosen.begin(), chosen.end());

  Dataset out;
  out.shape = d.shape;
  out.class_count = d.class_count;
  out.split_tag = d.split_tag;
  out.samples.reserve(chosen.size());
  for (int i : chosen) out.samples.push_back(d.samples[static_cast<size_t>(i)]);
  return out;
}

void make_batch(const Dataset& d, const std::vector<int>& indices, Tensor& batch,
                std::vector<int>& labels) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
  std::vector<int> shape = d.shape;
  shape.insert(shape.begin(), static_cast<int>(indices.size()));
  batch = Tensor(shape);
  labels.resize(indices.size());
  const size_t numel = static_cast<size_t>(d.sample_numel());
  for (size_t n = 0; n < indices.size(); ++n) {
    const Sample& s = d.samples.at(static_cast<size_t>(indices[n]));
    std::memcpy(batch.ptr() + n * numel, s.x.data(), numel * 4);
    labels[n] = s.label;
  }
}

}  // namespace icep
