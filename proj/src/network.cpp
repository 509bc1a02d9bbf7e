#include "icep/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace icep {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& name) {
  if (name == "dense") return LayerKind::dense;
  if (name == "conv2d") return LayerKind::conv2d;
  if (name == "relu") return LayerKind::relu;
  if (name == "maxpool2d") return LayerKind::maxpool2d;
  if (name == "flatten") return LayerKind::flatten;
  throw std::invalid_argument("unknown layer kind: " + name);
}

static std::string shape_str(const std::vector<int>& s) {
  std::string r;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) r += "x";
    r += std::to_string(s[i]);
  }
  return r;
}

static std::invalid_argument layer_error(int i, const Layer& L, const std::string& what) {
  return std::invalid_argument("layer " + std::to_string(i) + " (" +
                               layer_kind_name(L.kind) + "): " + what);
}

void Network::finalize() {
  if (layers.empty()) throw std::invalid_argument("network: no layers");
  if (input_shape.empty()) throw std::invalid_argument("network: no input shape");
  std::vector<int> shape = input_shape;
  int src = -1;   // prunable layer whose structures index the current channels
  int group = 1;  // flat positions per upstream structure once flattened
  for (size_t li = 0; li < layers.size(); ++li) {
    Layer& L = layers[li];
    const int i = static_cast<int>(li);
    L.in_shape = shape;
    if (L.prunable() && static_cast<int>(L.mask.size()) != L.structure_count())
      throw layer_error(i, L, "mask size " + std::to_string(L.mask.size()) +
                                  " != structure count " + std::to_string(L.structure_count()));
    switch (L.kind) {
      case LayerKind::dense: {
        if (shape.size() != 1)
          throw layer_error(i, L, "expected flat input, got " + shape_str(shape));
        if (L.weights.rank() != 2 || L.bias.rank() != 1 ||
            L.bias.dim(0) != L.weights.dim(0))
          throw layer_error(i, L, "bad parameter shapes");
        if (L.weights.dim(1) != shape[0])
          throw layer_error(i, L, "weights expect input " + std::to_string(L.weights.dim(1)) +
                                      ", trace gives " + shape_str(shape));
        if (src >= 0) {
          const int s = layers[src].weights.dim(0);
          if (shape[0] != s * group)
            throw layer_error(i, L, "input " + std::to_string(shape[0]) +
                                        " not divisible into " + std::to_string(s) +
                                        " upstream structures");
        }
        L.input_src = src;
        L.input_group = group;
        shape = {L.weights.dim(0)};
        src = i;
        group = 1;
        break;
      }
      case LayerKind::conv2d: {
        if (shape.size() != 3)
          throw layer_error(i, L, "expected CxHxW input, got " + shape_str(shape));
        if (L.weights.rank() != 4 || L.bias.rank() != 1 ||
            L.bias.dim(0) != L.weights.dim(0))
          throw layer_error(i, L, "bad parameter shapes");
        if (L.weights.dim(1) != shape[0])
          throw layer_error(i, L, "weights expect " + std::to_string(L.weights.dim(1)) +
                                      " channels, trace gives " + shape_str(shape));
        const int oh = shape[1] - L.weights.dim(2) + 1;
        const int ow = shape[2] - L.weights.dim(3) + 1;
        if (oh < 1 || ow < 1)
          throw layer_error(i, L, "kernel larger than input " + shape_str(shape));
        if (src >= 0 && shape[0] != layers[src].weights.dim(0))
          throw layer_error(i, L, "channel count does not match upstream structures");
        L.input_src = src;
        L.input_group = 1;
        shape = {L.weights.dim(0), oh, ow};
        src = i;
        group = 1;
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::maxpool2d: {
        if (shape.size() != 3)
          throw layer_error(i, L, "expected CxHxW input, got " + shape_str(shape));
        if (L.window < 1) throw layer_error(i, L, "window must be >= 1");
        const int oh = shape[1] / L.window, ow = shape[2] / L.window;
        if (oh < 1 || ow < 1)
          throw layer_error(i, L, "window larger than input " + shape_str(shape));
        shape = {shape[0], oh, ow};
        break;
      }
      case LayerKind::flatten: {
        int64_t n = Tensor::numel(shape);
        if (shape.size() > 1 && src >= 0)
          group *= static_cast<int>(n / shape[0]);
        shape = {static_cast<int>(n)};
        break;
      }
    }
    L.out_shape = shape;
  }
}

int Network::num_classes() const {
  const auto& out = layers.back().out_shape;
  if (out.size() != 1)
    throw std::logic_error("network output is not flat: " + shape_str(out));
  return out[0];
}

std::vector<int> Network::prunable_indices() const {
  std::vector<int> r;
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].prunable()) r.push_back(static_cast<int>(i));
  return r;
}

int Network::parameterized_count() const {
  int n = 0;
  for (const auto& L : layers)
    if (L.parameterized()) ++n;
  return n;
}

int Network::retained_count(int i) const {
  const Layer& L = layers.at(static_cast<size_t>(i));
  if (!L.prunable()) return L.structure_count();
  int n = 0;
  for (uint8_t m : L.mask) n += m ? 1 : 0;
  return n;
}

Network build_network(const std::vector<int>& input_shape,
                      const std::vector<LayerSpec>& specs, uint64_t seed) {
  Network net;
  net.input_shape = input_shape;
  std::mt19937_64 rng(seed);
  std::vector<int> shape = input_shape;
  for (const LayerSpec& sp : specs) {
    Layer L;
    L.kind = sp.kind;
    switch (sp.kind) {
      case LayerKind::dense: {
        if (shape.size() != 1)
          throw std::invalid_argument("dense needs flat input, got " + shape_str(shape));
        const int in = shape[0];
        L.weights = Tensor({sp.units, in});
        L.bias = Tensor({sp.units});
        std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(in)));
        for (float& w : L.weights.data) w = dist(rng);
        L.mask.assign(static_cast<size_t>(sp.units), 1);
        shape = {sp.units};
        break;
      }
      case LayerKind::conv2d: {
        if (shape.size() != 3)
          throw std::invalid_argument("conv2d needs CxHxW input, got " + shape_str(shape));
        const int c = shape[0];
        const int fan_in = c * sp.kernel * sp.kernel;
        L.weights = Tensor({sp.units, c, sp.kernel, sp.kernel});
        L.bias = Tensor({sp.units});
        std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
        for (float& w : L.weights.data) w = dist(rng);
        L.mask.assign(static_cast<size_t>(sp.units), 1);
        shape = {sp.units, shape[1] - sp.kernel + 1, shape[2] - sp.kernel + 1};
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::maxpool2d:
        L.window = sp.window;
        shape = {shape[0], shape[1] / sp.window, shape[2] / sp.window};
        break;
      case LayerKind::flatten:
        shape = {static_cast<int>(Tensor::numel(shape))};
        break;
    }
    net.layers.push_back(std::move(L));
  }
  net.finalize();
  return net;
}

Network build_default_cnn(const std::vector<int>& input_shape, int classes, uint64_t seed) {
  std::vector<LayerSpec> specs = {
      {LayerKind::conv2d, 8, 3, 0},  {LayerKind::relu, 0, 0, 0},
      {LayerKind::maxpool2d, 0, 0, 2}, {LayerKind::conv2d, 16, 3, 0},
      {LayerKind::relu, 0, 0, 0},      {LayerKind::maxpool2d, 0, 0, 2},
      {LayerKind::flatten, 0, 0, 0},   {LayerKind::dense, 64, 0, 0},
      {LayerKind::relu, 0, 0, 0},      {LayerKind::dense, classes, 0, 0},
  };
  return build_network(input_shape, specs, seed);
}

static bool kept(const Layer& L, int s) { return L.mask.empty() || L.mask[static_cast<size_t>(s)]; }

static void dense_forward(const Layer& L, const Tensor& x, Tensor& y) {
  const int n_count = x.dim(0), in = x.dim(1), out = L.weights.dim(0);
  const float* xp = x.ptr();
  const float* wp = L.weights.ptr();
  const float* bp = L.bias.ptr();
  float* yp = y.ptr();
  for (int n = 0; n < n_count; ++n) {
    const float* xr = xp + static_cast<int64_t>(n) * in;
    float* yr = yp + static_cast<int64_t>(n) * out;
    for (int o = 0; o < out; ++o) {
      if (!kept(L, o)) continue;
      const float* wr = wp + static_cast<int64_t>(o) * in;
      float acc = bp[o];
      for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }
}

static void conv_forward(const Layer& L, const Tensor& x, Tensor& y) {
  const int n_count = x.dim(0), c_count = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int f_count = L.weights.dim(0), kh = L.weights.dim(2), kw = L.weights.dim(3);
  const int oh = h - kh + 1, ow = w - kw + 1;
  const float* xp = x.ptr();
  const float* wp = L.weights.ptr();
  const float* bp = L.bias.ptr();
  float* yp = y.ptr();
  for (int n = 0; n < n_count; ++n) {
    for (int f = 0; f < f_count; ++f) {
      if (!kept(L, f)) continue;
      float* plane = yp + (static_cast<int64_t>(n) * f_count + f) * oh * ow;
      std::fill(plane, plane + static_cast<int64_t>(oh) * ow, bp[f]);
      for (int c = 0; c < c_count; ++c) {
        const float* xplane = xp + (static_cast<int64_t>(n) * c_count + c) * h * w;
        const float* wplane = wp + (static_cast<int64_t>(f) * c_count + c) * kh * kw;
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) {
            const float wv = wplane[u * kw + v];
            for (int oi = 0; oi < oh; ++oi) {
              const float* xr = xplane + (oi + u) * w + v;
              float* yr = plane + oi * ow;
              for (int oj = 0; oj < ow; ++oj) yr[oj] += wv * xr[oj];
            }
          }
        }
      }
    }
  }
}

static void pool_forward(const Layer& L, const Tensor& x, Tensor& y, std::vector<int32_t>* argmax) {
  const int n_count = x.dim(0), c_count = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int win = L.window, oh = h / win, ow = w / win;
  const float* xp = x.ptr();
  float* yp = y.ptr();
  if (argmax) argmax->assign(static_cast<size_t>(n_count) * c_count * oh * ow, 0);
  int64_t oidx = 0;
  for (int n = 0; n < n_count; ++n) {
    for (int c = 0; c < c_count; ++c) {
      const float* xplane = xp + (static_cast<int64_t>(n) * c_count + c) * h * w;
      for (int oi = 0; oi < oh; ++oi) {
        for (int oj = 0; oj < ow; ++oj, ++oidx) {
          int best = oi * win * w + oj * win;
          float bv = xplane[best];
          for (int u = 0; u < win; ++u) {
            for (int v = 0; v < win; ++v) {
              const int idx = (oi * win + u) * w + oj * win + v;
              if (xplane[idx] > bv) {
                bv = xplane[idx];
                best = idx;
              }
            }
          }
          yp[oidx] = bv;
          if (argmax) (*argmax)[static_cast<size_t>(oidx)] = best;
        }
      }
    }
  }
}

Tensor forward(const Network& net, const Tensor& batch, ForwardTape* tape, int upto) {
  if (batch.rank() != static_cast<int>(net.input_shape.size()) + 1)
    throw std::invalid_argument("forward: batch rank " + std::to_string(batch.rank()) +
                                " does not fit input " + shape_str(net.input_shape));
  for (size_t i = 0; i < net.input_shape.size(); ++i)
    if (batch.shape[i + 1] != net.input_shape[i])
      throw std::invalid_argument("forward: batch shape " + batch.shape_str() +
                                  " does not fit input " + shape_str(net.input_shape));
  const size_t limit = upto < 0 ? net.layers.size() : static_cast<size_t>(upto) + 1;
  if (limit > net.layers.size())
    throw std::invalid_argument("forward: layer index out of range");
  const int n_count = batch.dim(0);
  if (tape) {
    tape->acts.clear();
    tape->acts.reserve(limit + 1);
    tape->pool_argmax.assign(net.layers.size(), {});
    tape->acts.push_back(batch);
  }
  Tensor cur = batch;
  for (size_t li = 0; li < limit; ++li) {
    const Layer& L = net.layers[li];
    const Tensor& x = tape ? tape->acts.back() : cur;
    std::vector<int> oshape = L.out_shape;
    oshape.insert(oshape.begin(), n_count);
    Tensor y(oshape);
    switch (L.kind) {
      case LayerKind::dense:
        dense_forward(L, x, y);
        break;
      case LayerKind::conv2d:
        conv_forward(L, x, y);
        break;
      case LayerKind::relu:
        for (int64_t i = 0; i < x.size(); ++i) y.data[static_cast<size_t>(i)] = x.data[static_cast<size_t>(i)] > 0.0f ? x.data[static_cast<size_t>(i)] : 0.0f;
        break;
      case LayerKind::maxpool2d:
        pool_forward(L, x, y, tape ? &tape->pool_argmax[li] : nullptr);
        break;
      case LayerKind::flatten:
        y.data = x.data;
        break;
    }
    if (tape)
      tape->acts.push_back(std::move(y));
    else
      cur = std::move(y);
  }
  return tape ? tape->acts.back() : cur;
}

static void check_labels(const std::vector<int>& labels, int classes) {
  for (int l : labels)
    if (l < 0 || l >= classes)
      throw std::invalid_argument("label " + std::to_string(l) + " out of range [0," +
                                  std::to_string(classes) + ")");
}

double softmax_ce_loss(const Tensor& logits, const std::vector<int>& labels) {
  const int n_count = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != n_count)
    throw std::invalid_argument("loss: label count does not match batch");
  check_labels(labels, classes);
  double total = 0.0;
  for (int n = 0; n < n_count; ++n) {
    const float* row = logits.ptr() + static_cast<int64_t>(n) * classes;
    float mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) denom += std::exp(static_cast<double>(row[c] - mx));
    total += std::log(denom) - static_cast<double>(row[labels[static_cast<size_t>(n)]] - mx);
  }
  return total / n_count;
}

Tensor softmax_ce_grad(const Tensor& logits, const std::vector<int>& labels) {
  const int n_count = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != n_count)
    throw std::invalid_argument("loss grad: label count does not match batch");
  check_labels(labels, classes);
  Tensor g(logits.shape);
  for (int n = 0; n < n_count; ++n) {
    const float* row = logits.ptr() + static_cast<int64_t>(n) * classes;
    float* gr = g.ptr() + static_cast<int64_t>(n) * classes;
    float mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) denom += std::exp(static_cast<double>(row[c] - mx));
    for (int c = 0; c < classes; ++c) {
      double p = std::exp(static_cast<double>(row[c] - mx)) / denom;
      if (c == labels[static_cast<size_t>(n)]) p -= 1.0;
      gr[c] = static_cast<float>(p / n_count);
    }
  }
  return g;
}

static void dense_backward(const Layer& L, const Tensor& x, const Tensor& dy,
                           LayerGrads* g, Tensor* dx) {
  const int n_count = x.dim(0), in = x.dim(1), out = L.weights.dim(0);
  const float* xp = x.ptr();
  const float* wp = L.weights.ptr();
  const float* dyp = dy.ptr();
  for (int n = 0; n < n_count; ++n) {
    const float* xr = xp + static_cast<int64_t>(n) * in;
    const float* dyr = dyp + static_cast<int64_t>(n) * out;
    float* dxr = dx ? dx->ptr() + static_cast<int64_t>(n) * in : nullptr;
    for (int o = 0; o < out; ++o) {
      if (!kept(L, o)) continue;
      const float d = dyr[o];
      if (g) {
        g->bias.data[static_cast<size_t>(o)] += d;
        float* dwr = g->weights.ptr() + static_cast<int64_t>(o) * in;
        for (int i = 0; i < in; ++i) dwr[i] += d * xr[i];
      }
      if (dxr) {
        const float* wr = wp + static_cast<int64_t>(o) * in;
        for (int i = 0; i < in; ++i) dxr[i] += d * wr[i];
      }
    }
  }
}

static void conv_backward(const Layer& L, const Tensor& x, const Tensor& dy,
                          LayerGrads* g, Tensor* dx) {
  const int n_count = x.dim(0), c_count = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int f_count = L.weights.dim(0), kh = L.weights.dim(2), kw = L.weights.dim(3);
  const int oh = h - kh + 1, ow = w - kw + 1;
  const float* xp = x.ptr();
  const float* wp = L.weights.ptr();
  const float* dyp = dy.ptr();
  for (int n = 0; n < n_count; ++n) {
    for (int f = 0; f < f_count; ++f) {
      if (!kept(L, f)) continue;
      const float* dplane = dyp + (static_cast<int64_t>(n) * f_count + f) * oh * ow;
      if (g) {
        double db = 0.0;
        for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) db += dplane[i];
        g->bias.data[static_cast<size_t>(f)] += static_cast<float>(db);
      }
      for (int c = 0; c < c_count; ++c) {
        const float* xplane = xp + (static_cast<int64_t>(n) * c_count + c) * h * w;
        const float* wplane = wp + (static_cast<int64_t>(f) * c_count + c) * kh * kw;
        float* dwplane = g ? g->weights.ptr() + (static_cast<int64_t>(f) * c_count + c) * kh * kw : nullptr;
        float* dxplane = dx ? dx->ptr() + (static_cast<int64_t>(n) * c_count + c) * h * w : nullptr;
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) {
            const float wv = wplane[u * kw + v];
            float acc = 0.0f;
            for (int oi = 0; oi < oh; ++oi) {
              const float* dr = dplane + oi * ow;
              const float* xr = xplane + (oi + u) * w + v;
              float* dxr = dxplane ? dxplane + (oi + u) * w + v : nullptr;
              for (int oj = 0; oj < ow; ++oj) {
                acc += dr[oj] * xr[oj];
                if (dxr) dxr[oj] += dr[oj] * wv;
              }
            }
            if (dwplane) dwplane[u * kw + v] += acc;
          }
        }
      }
    }
  }
}

Gradients backward(const Network& net, const ForwardTape& tape,
                   const std::vector<int>& labels) {
  if (tape.acts.size() != net.layers.size() + 1)
    throw std::invalid_argument("backward: tape does not match network");
  Gradients grads(net.layers.size());
  int stop = -1;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].parameterized() && !net.layers[i].frozen) {
      stop = static_cast<int>(i);
      break;
    }
  }
  if (stop < 0) return grads;  // everything frozen
  Tensor delta = softmax_ce_grad(tape.acts.back(), labels);
  for (int i = static_cast<int>(net.layers.size()) - 1; i >= stop; --i) {
    const Layer& L = net.layers[static_cast<size_t>(i)];
    const Tensor& x = tape.acts[static_cast<size_t>(i)];
    const bool want_w = L.parameterized() && !L.frozen;
    const bool want_dx = i > stop;
    LayerGrads* g = nullptr;
    if (want_w) {
      grads[static_cast<size_t>(i)].weights = Tensor(L.weights.shape);
      grads[static_cast<size_t>(i)].bias = Tensor(L.bias.shape);
      g = &grads[static_cast<size_t>(i)];
    }
    Tensor dx;
    if (want_dx && L.kind != LayerKind::relu && L.kind != LayerKind::flatten)
      dx = Tensor(x.shape);
    switch (L.kind) {
      case LayerKind::dense:
        dense_backward(L, x, delta, g, want_dx ? &dx : nullptr);
        break;
      case LayerKind::conv2d:
        conv_backward(L, x, delta, g, want_dx ? &dx : nullptr);
        break;
      case LayerKind::relu:
        if (want_dx) {
          dx = std::move(delta);
          for (int64_t k = 0; k < x.size(); ++k)
            if (x.data[static_cast<size_t>(k)] <= 0.0f) dx.data[static_cast<size_t>(k)] = 0.0f;
        }
        break;
      case LayerKind::maxpool2d:
        if (want_dx) {
          const auto& amax = tape.pool_argmax[static_cast<size_t>(i)];
          if (amax.size() != static_cast<size_t>(delta.size()))
            throw std::invalid_argument("backward: pool argmax missing from tape");
          const int c_count = x.dim(1), h = x.dim(2), w = x.dim(3);
          const int64_t out_plane = delta.size() / (static_cast<int64_t>(x.dim(0)) * c_count);
          int64_t oidx = 0;
          for (int n = 0; n < x.dim(0); ++n) {
            for (int c = 0; c < c_count; ++c) {
              float* dxplane = dx.ptr() + (static_cast<int64_t>(n) * c_count + c) * h * w;
              for (int64_t k = 0; k < out_plane; ++k, ++oidx)
                dxplane[amax[static_cast<size_t>(oidx)]] += delta.data[static_cast<size_t>(oidx)];
            }
          }
        }
        break;
      case LayerKind::flatten:
        if (want_dx) {
          dx = std::move(delta);
          dx.shape = x.shape;
        }
        break;
    }
    if (want_dx) delta = std::move(dx);
  }
  return grads;
}

OptimizerState OptimizerState::for_network(const Network& net, float momentum,
                                           float weight_decay) {
  OptimizerState s;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  s.buffers.resize(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].parameterized()) {
      s.buffers[i].weights = Tensor(net.layers[i].weights.shape);
      s.buffers[i].bias = Tensor(net.layers[i].bias.shape);
    }
  }
  return s;
}

void sgd_step(Network& net, const Gradients& grads, OptimizerState& state, float lr) {
  if (grads.size() != net.layers.size() || state.buffers.size() != net.layers.size())
    throw std::invalid_argument("sgd_step: gradient/state size does not match network");
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerGrads& g = grads[i];
    if (g.weights.size() == 0) continue;
    for (float v : g.weights.data)
      if (!std::isfinite(v))
        throw NumericalError("sgd_step: non-finite weight gradient in layer " + std::to_string(i));
    for (float v : g.bias.data)
      if (!std::isfinite(v))
        throw NumericalError("sgd_step: non-finite bias gradient in layer " + std::to_string(i));
  }
  const float mu = state.momentum, wd = state.weight_decay;
  for (size_t li = 0; li < net.layers.size(); ++li) {
    Layer& L = net.layers[li];
    const LayerGrads& g = grads[li];
    if (!L.parameterized() || L.frozen || g.weights.size() == 0) continue;
    LayerGrads& buf = state.buffers[li];
    const std::vector<uint8_t>* in_mask = nullptr;
    if (L.input_src >= 0 && net.layers[static_cast<size_t>(L.input_src)].prunable())
      in_mask = &net.layers[static_cast<size_t>(L.input_src)].mask;
    auto update = [&](float& w, float& b, float gv) {
      const float adj = gv + wd * w;
      b = mu * b + adj;
      w -= lr * b;
    };
    if (L.kind == LayerKind::dense) {
      const int out = L.weights.dim(0), in = L.weights.dim(1);
      for (int o = 0; o < out; ++o) {
        if (!kept(L, o)) continue;
        update(L.bias.data[static_cast<size_t>(o)], buf.bias.data[static_cast<size_t>(o)],
               g.bias.data[static_cast<size_t>(o)]);
        const int64_t row = static_cast<int64_t>(o) * in;
        for (int c = 0; c < in; ++c) {
          if (in_mask && !(*in_mask)[static_cast<size_t>(c / L.input_group)]) continue;
          update(L.weights.data[static_cast<size_t>(row + c)],
                 buf.weights.data[static_cast<size_t>(row + c)],
                 g.weights.data[static_cast<size_t>(row + c)]);
        }
      }
    } else {  // conv2d
      const int f_count = L.weights.dim(0), c_count = L.weights.dim(1);
      const int k2 = L.weights.dim(2) * L.weights.dim(3);
      for (int f = 0; f < f_count; ++f) {
        if (!kept(L, f)) continue;
        update(L.bias.data[static_cast<size_t>(f)], buf.bias.data[static_cast<size_t>(f)],
               g.bias.data[static_cast<size_t>(f)]);
        for (int c = 0; c < c_count; ++c) {
          if (in_mask && !(*in_mask)[static_cast<size_t>(c)]) continue;
          const int64_t base = (static_cast<int64_t>(f) * c_count + c) * k2;
          for (int k = 0; k < k2; ++k)
            update(L.weights.data[static_cast<size_t>(base + k)],
                   buf.weights.data[static_cast<size_t>(base + k)],
                   g.weights.data[static_cast<size_t>(base + k)]);
        }
      }
    }
  }
}

double test_accuracy(const Network& net, const Dataset& data, int batch_size) {
  if (data.shape != net.input_shape)
    throw std::invalid_argument("test: dataset shape does not match network input");
  if (data.samples.empty()) throw std::invalid_argument("test: empty dataset");
  int64_t correct = 0;
  Tensor batch;
  std::vector<int> labels;
  std::vector<int> idx;
  for (size_t start = 0; start < data.samples.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(data.samples.size(), start + static_cast<size_t>(batch_size));
    idx.resize(end - start);
    for (size_t k = start; k < end; ++k) idx[k - start] = static_cast<int>(k);
    make_batch(data, idx, batch, labels);
    Tensor logits = forward(net, batch);
    const int classes = logits.dim(1);
    for (size_t n = 0; n < idx.size(); ++n) {
      const float* row = logits.ptr() + static_cast<int64_t>(n) * classes;
      int arg = 0;
      for (int c = 1; c < classes; ++c)
        if (row[c] > row[arg]) arg = c;
      correct += arg == labels[n] ? 1 : 0;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.samples.size());
}

}  // namespace icep
