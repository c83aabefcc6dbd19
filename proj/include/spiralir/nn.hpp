#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spiralir::nn {

enum class Op { Dense, Conv3x3, Upsample2, LeakyRelu, Relu, Tanh };

std::string op_name(Op op);
Op op_from_name(const std::string& name);

struct Shape {
  int c = 0, h = 0, w = 0;
  std::size_t size() const { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape&) const = default;
};

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), v(s.size(), T{}) {}
  T* plane(int c) { return v.data() + static_cast<std::size_t>(c) * shape.h * shape.w; }
  const T* plane(int c) const { return v.data() + static_cast<std::size_t>(c) * shape.h * shape.w; }
};

template <typename T>
struct Layer {
  Op op = Op::Relu;
  Shape in, out;
  std::vector<T> weights;  // Dense: out.size x in.size row-major; Conv: oc x ic x 3 x 3
  std::vector<T> bias;     // Dense: out.size; Conv: oc
  T leak = static_cast<T>(0.1);

  std::size_t n_params() const { return weights.size() + bias.size(); }
};

// Chain of layers with a flat parameter view (per layer: weights then bias).
template <typename T>
struct Network {
  std::vector<Layer<T>> layers;

  Shape input_shape() const { return layers.front().in; }
  Shape output_shape() const { return layers.back().out; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.n_params();
    return n;
  }
  std::vector<T> get_params() const {
    std::vector<T> flat;
    flat.reserve(param_count());
    for (const auto& l : layers) {
      flat.insert(flat.end(), l.weights.begin(), l.weights.end());
      flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
  }
  void set_params(std::span<const T> flat) {
    if (flat.size() != param_count())
      throw std::invalid_argument("Network::set_params: size mismatch");
    std::size_t k = 0;
    for (auto& l : layers) {
      for (auto& w : l.weights) w = flat[k++];
      for (auto& b : l.bias) b = flat[k++];
    }
  }

  template <typename U>
  Network<U> cast() const {
    Network<U> out;
    out.layers.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.layers[i].op = layers[i].op;
      out.layers[i].in = layers[i].in;
      out.layers[i].out = layers[i].out;
      out.layers[i].leak = static_cast<U>(layers[i].leak);
      out.layers[i].weights.assign(layers[i].weights.begin(), layers[i].weights.end());
      out.layers[i].bias.assign(layers[i].bias.begin(), layers[i].bias.end());
    }
    return out;
  }
};

// Build description: parameterized ops give their output shape, activations
// and upsample infer it.
struct LayerDef {
  Op op;
  Shape out;  // Dense: full shape; Conv3x3: only c is used
};

template <typename T>
Network<T> init_network(std::span<const LayerDef> defs, Shape input, std::uint64_t seed) {
  if (defs.empty()) throw std::invalid_argument("init_network: no layers");
  Network<T> net;
  std::mt19937_64 rng(seed);
  Shape cur = input;
  for (const auto& def : defs) {
    Layer<T> l;
    l.op = def.op;
    l.in = cur;
    switch (def.op) {
      case Op::Dense: {
        l.out = def.out;
        if (l.out.size() == 0) throw std::invalid_argument("init_network: dense needs out shape");
        l.weights.resize(l.out.size() * l.in.size());
        l.bias.assign(l.out.size(), T{});
        const double stddev = std::sqrt(2.0 / static_cast<double>(l.in.size()));
        std::normal_distribution<double> gauss(0.0, stddev);
        for (auto& w : l.weights) w = static_cast<T>(gauss(rng));
        break;
      }
      case Op::Conv3x3: {
        if (def.out.c <= 0) throw std::invalid_argument("init_network: conv needs out channels");
        l.out = {def.out.c, cur.h, cur.w};
        l.weights.resize(static_cast<std::size_t>(def.out.c) * cur.c * 9);
        l.bias.assign(def.out.c, T{});
        const double stddev = std::sqrt(2.0 / (9.0 * cur.c));
        std::normal_distribution<double> gauss(0.0, stddev);
        for (auto& w : l.weights) w = static_cast<T>(gauss(rng));
        break;
      }
      case Op::Upsample2:
        l.out = {cur.c, cur.h * 2, cur.w * 2};
        break;
      case Op::LeakyRelu:
      case Op::Relu:
      case Op::Tanh:
        l.out = cur;
        break;
    }
    cur = l.out;
    net.layers.push_back(std::move(l));
  }
  return net;
}

template <typename T>
struct Cache {
  std::vector<Tensor<T>> acts;  // acts[i] = input of layer i; acts.back() = output
};

namespace detail {

void gemm_rm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
             int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm_rm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
             int lda, const double* b, int ldb, double beta, double* c, int ldc);

// Lowered 3x3 zero-pad patches: col is (ic*9) x (h*w) row-major.
template <typename T>
void im2col3x3(const T* x, int ic, int h, int w, T* col) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < ic; ++i) {
    const T* xp = x + i * plane;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        T* row = col + (static_cast<std::size_t>(i) * 9 + (dy + 1) * 3 + (dx + 1)) * plane;
        for (int yy = 0; yy < h; ++yy) {
          const int sy = yy + dy;
          T* r = row + static_cast<std::size_t>(yy) * w;
          if (sy < 0 || sy >= h) {
            for (int xx = 0; xx < w; ++xx) r[xx] = T{};
            continue;
          }
          const T* s = xp + static_cast<std::size_t>(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + dx;
            r[xx] = (sx >= 0 && sx < w) ? s[sx] : T{};
          }
        }
      }
  }
}

template <typename T>
void col2im3x3_add(const T* col, int ic, int h, int w, T* x) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < ic; ++i) {
    T* xp = x + i * plane;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const T* row = col + (static_cast<std::size_t>(i) * 9 + (dy + 1) * 3 + (dx + 1)) * plane;
        for (int yy = 0; yy < h; ++yy) {
          const int sy = yy + dy;
          if (sy < 0 || sy >= h) continue;
          const T* r = row + static_cast<std::size_t>(yy) * w;
          T* s = xp + static_cast<std::size_t>(sy) * w;
          const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
          for (int xx = x0; xx < x1; ++xx) s[xx + dx] += r[xx];
        }
      }
  }
}

template <typename T>
void conv3x3_forward(const Layer<T>& l, const T* x, T* y) {
  const int h = l.in.h, w = l.in.w, ic = l.in.c, oc = l.out.c;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<T> col(static_cast<std::size_t>(ic) * 9 * plane);
  im2col3x3(x, ic, h, w, col.data());
  gemm_rm(false, false, oc, static_cast<int>(plane), ic * 9, T{1}, l.weights.data(), ic * 9,
          col.data(), static_cast<int>(plane), T{0}, y, static_cast<int>(plane));
  for (int o = 0; o < oc; ++o) {
    T* yp = y + o * plane;
    const T b = l.bias[o];
    for (std::size_t p = 0; p < plane; ++p) yp[p] += b;
  }
}

template <typename T>
void conv3x3_backward(const Layer<T>& l, const T* x, const T* dy, T* dx, T* dw, T* db) {
  const int h = l.in.h, w = l.in.w, ic = l.in.c, oc = l.out.c;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int o = 0; o < oc; ++o) {
    const T* dyp = dy + o * plane;
    T acc{};
    for (std::size_t p = 0; p < plane; ++p) acc += dyp[p];
    db[o] += acc;
  }
  std::vector<T> col(static_cast<std::size_t>(ic) * 9 * plane);
  im2col3x3(x, ic, h, w, col.data());
  // dW += dout * col^T, then dcol = W^T * dout scattered back to dx.
  gemm_rm(false, true, oc, ic * 9, static_cast<int>(plane), T{1}, dy, static_cast<int>(plane),
          col.data(), static_cast<int>(plane), T{1}, dw, ic * 9);
  gemm_rm(true, false, ic * 9, static_cast<int>(plane), oc, T{1}, l.weights.data(), ic * 9, dy,
          static_cast<int>(plane), T{0}, col.data(), static_cast<int>(plane));
  col2im3x3_add(col.data(), ic, h, w, dx);
}

}  // namespace detail

template <typename T>
Tensor<T> forward_pass(const Network<T>& net, const Tensor<T>& input, Cache<T>* cache = nullptr) {
  if (!(input.shape == net.input_shape()))
    throw std::invalid_argument("forward_pass: input shape mismatch");
  if (cache) {
    cache->acts.clear();
    cache->acts.reserve(net.layers.size() + 1);
    cache->acts.push_back(input);
  }
  Tensor<T> cur = input;
  for (const auto& l : net.layers) {
    Tensor<T> next(l.out);
    switch (l.op) {
      case Op::Dense: {
        const std::size_t in_n = l.in.size(), out_n = l.out.size();
        for (std::size_t o = 0; o < out_n; ++o) {
          const T* wr = l.weights.data() + o * in_n;
          T acc = l.bias[o];
          for (std::size_t i = 0; i < in_n; ++i) acc += wr[i] * cur.v[i];
          next.v[o] = acc;
        }
        break;
      }
      case Op::Conv3x3:
        detail::conv3x3_forward(l, cur.v.data(), next.v.data());
        break;
      case Op::Upsample2: {
        const int h = l.in.h, w = l.in.w;
        for (int c = 0; c < l.in.c; ++c) {
          const T* xp = cur.plane(c);
          T* yp = next.plane(c);
          for (int y = 0; y < 2 * h; ++y)
            for (int x = 0; x < 2 * w; ++x)
              yp[static_cast<std::size_t>(y) * 2 * w + x] =
                  xp[static_cast<std::size_t>(y / 2) * w + x / 2];
        }
        break;
      }
      case Op::LeakyRelu:
        for (std::size_t i = 0; i < cur.v.size(); ++i)
          next.v[i] = cur.v[i] > T{} ? cur.v[i] : l.leak * cur.v[i];
        break;
      case Op::Relu:
        for (std::size_t i = 0; i < cur.v.size(); ++i) next.v[i] = cur.v[i] > T{} ? cur.v[i] : T{};
        break;
      case Op::Tanh:
        for (std::size_t i = 0; i < cur.v.size(); ++i) next.v[i] = std::tanh(cur.v[i]);
        break;
    }
    cur = std::move(next);
    if (cache) cache->acts.push_back(cur);
  }
  return cur;
}

// Exact reverse-mode gradients. param_grad accumulates (flat layout matching
// get_params); the return value is the gradient with respect to the input.
template <typename T>
Tensor<T> backward_pass(const Network<T>& net, const Cache<T>& cache, const Tensor<T>& dout,
                        std::vector<T>& param_grad) {
  if (cache.acts.size() != net.layers.size() + 1)
    throw std::invalid_argument("backward_pass: forward cache missing or stale");
  if (!(dout.shape == net.output_shape()))
    throw std::invalid_argument("backward_pass: output gradient shape mismatch");
  if (param_grad.size() != net.param_count()) param_grad.assign(net.param_count(), T{});

  // Flat offsets of each layer's parameter block.
  std::vector<std::size_t> offset(net.layers.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    offset[i] = k;
    k += net.layers[i].n_params();
  }

  Tensor<T> grad = dout;
  for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
    const auto& l = net.layers[li];
    const Tensor<T>& x = cache.acts[li];
    const Tensor<T>& y = cache.acts[li + 1];
    Tensor<T> dx(l.in);
    T* dw = param_grad.data() + offset[li];
    T* db = dw + l.weights.size();
    switch (l.op) {
      case Op::Dense: {
        const std::size_t in_n = l.in.size(), out_n = l.out.size();
        for (std::size_t o = 0; o < out_n; ++o) {
          const T g = grad.v[o];
          db[o] += g;
          const T* wr = l.weights.data() + o * in_n;
          T* dwr = dw + o * in_n;
          for (std::size_t i = 0; i < in_n; ++i) {
            dwr[i] += g * x.v[i];
            dx.v[i] += wr[i] * g;
          }
        }
        break;
      }
      case Op::Conv3x3:
        detail::conv3x3_backward(l, x.v.data(), grad.v.data(), dx.v.data(), dw, db);
        break;
      case Op::Upsample2: {
        const int h = l.in.h, w = l.in.w;
        for (int c = 0; c < l.in.c; ++c) {
          const T* gp = grad.plane(c);
          T* dxp = dx.plane(c);
          for (int yy = 0; yy < 2 * h; ++yy)
            for (int xx = 0; xx < 2 * w; ++xx)
              dxp[static_cast<std::size_t>(yy / 2) * w + xx / 2] +=
                  gp[static_cast<std::size_t>(yy) * 2 * w + xx];
        }
        break;
      }
      case Op::LeakyRelu:
        for (std::size_t i = 0; i < dx.v.size(); ++i)
          dx.v[i] = grad.v[i] * (x.v[i] > T{} ? T{1} : l.leak);
        break;
      case Op::Relu:
        for (std::size_t i = 0; i < dx.v.size(); ++i)
          dx.v[i] = x.v[i] > T{} ? grad.v[i] : T{};
        break;
      case Op::Tanh:
        for (std::size_t i = 0; i < dx.v.size(); ++i)
          dx.v[i] = grad.v[i] * (T{1} - y.v[i] * y.v[i]);
        break;
    }
    grad = std::move(dx);
  }
  return grad;
}

template <typename T>
struct AdamState {
  std::vector<T> m, v;
  std::int64_t t = 0;
};

// Standard Adam with bias correction; the update itself runs in double.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: param/grad size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), T{});
    state.v.assign(params.size(), T{});
    state.t = 0;
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    const double m = beta1 * static_cast<double>(state.m[i]) + (1.0 - beta1) * g;
    const double v = beta2 * static_cast<double>(state.v[i]) + (1.0 - beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    params[i] -= static_cast<T>(lr * (m / c1) / (std::sqrt(v / c2) + eps));
  }
}

}  // namespace spiralir::nn
