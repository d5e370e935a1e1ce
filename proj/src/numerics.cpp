#include "hawkdove/numerics.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace hawkdove::numerics {

std::int64_t shape_size(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace {

template <typename T>
void require_shape(const std::vector<int>& actual, const std::vector<int>& expected,
                   const char* what) {
  if (actual != expected)
    throw ShapeError(std::string(what) + ": expected " + shape_str(expected) + ", got " +
                     shape_str(actual));
}

int conv_out(int in, int kernel, int stride) { return (in - kernel) / stride + 1; }

// C(M,N) += A(M,K) * B(K,N); all row-major. The n-loop is innermost so the
// compiler vectorizes the contiguous axis.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, int m_dim, int k_dim, int n_dim) {
  for (int m = 0; m < m_dim; ++m) {
    T* crow = c + static_cast<std::size_t>(m) * n_dim;
    const T* arow = a + static_cast<std::size_t>(m) * k_dim;
    for (int k = 0; k < k_dim; ++k) {
      const T av = arow[k];
      const T* brow = b + static_cast<std::size_t>(k) * n_dim;
      for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

// C(M,N) += A(M,K) * B(N,K)^T.
template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, int m_dim, int k_dim, int n_dim) {
  for (int m = 0; m < m_dim; ++m) {
    const T* arow = a + static_cast<std::size_t>(m) * k_dim;
    T* crow = c + static_cast<std::size_t>(m) * n_dim;
    for (int n = 0; n < n_dim; ++n) {
      const T* brow = b + static_cast<std::size_t>(n) * k_dim;
      T acc = T(0);
      for (int k = 0; k < k_dim; ++k) acc += arow[k] * brow[k];
      crow[n] += acc;
    }
  }
}

// C(M,N) += A(K,M)^T * B(K,N).
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, int m_dim, int k_dim, int n_dim) {
  for (int k = 0; k < k_dim; ++k) {
    const T* arow = a + static_cast<std::size_t>(k) * m_dim;
    const T* brow = b + static_cast<std::size_t>(k) * n_dim;
    for (int m = 0; m < m_dim; ++m) {
      const T av = arow[m];
      T* crow = c + static_cast<std::size_t>(m) * n_dim;
      for (int n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
    }
  }
}

// Unrolls one sample's (C,H,W) block into (C*K*K, Ho*Wo) patch columns.
template <typename T>
void im2col(const T* x, int channels, int h, int w, int kernel, int stride, T* cols) {
  const int ho = conv_out(h, kernel, stride);
  const int wo = conv_out(w, kernel, stride);
  T* out = cols;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        const T* plane = x + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          const T* row = plane + static_cast<std::size_t>(oy * stride + ky) * w + kx;
          for (int ox = 0; ox < wo; ++ox) *out++ = row[ox * stride];
        }
      }
}

// Scatter-add of patch-column gradients back onto the input block.
template <typename T>
void col2im_acc(const T* cols, int channels, int h, int w, int kernel, int stride, T* dx) {
  const int ho = conv_out(h, kernel, stride);
  const int wo = conv_out(w, kernel, stride);
  const T* in = cols;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        T* plane = dx + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          T* row = plane + static_cast<std::size_t>(oy * stride + ky) * w + kx;
          for (int ox = 0; ox < wo; ++ox) row[ox * stride] += *in++;
        }
      }
}

template <typename T>
std::vector<int> layer_output_shape(const LayerSpec& layer, const std::vector<int>& in) {
  switch (layer.kind) {
    case LayerKind::kConv2D: {
      const auto& cv = layer.conv;
      return {in[0], cv.out_ch, conv_out(in[2], cv.kernel, cv.stride),
              conv_out(in[3], cv.kernel, cv.stride)};
    }
    case LayerKind::kReLU: return in;
    case LayerKind::kFlatten: {
      int flat = 1;
      for (std::size_t i = 1; i < in.size(); ++i) flat *= in[i];
      return {in[0], flat};
    }
    case LayerKind::kDense: return {in[0], layer.dense.out_dim};
  }
  return in;
}

}  // namespace

template <typename T>
QNetwork<T> make_q_network(std::array<int, 3> input_shape, int num_actions) {
  const auto [c, h, w] = input_shape;
  if (c < 1 || h < 5 || w < 5)
    throw ShapeError("q-network input must be at least (1,5,5), got (" + std::to_string(c) + "," +
                     std::to_string(h) + "," + std::to_string(w) + ")");
  QNetwork<T> net;
  net.input_shape = input_shape;
  net.num_actions = num_actions;

  auto add_conv = [&net](int in_ch, int out_ch, int kernel, int stride) {
    LayerSpec l;
    l.kind = LayerKind::kConv2D;
    l.conv = {in_ch, out_ch, kernel, stride};
    net.layers.push_back(l);
    net.weights.emplace_back(std::vector<int>{out_ch, in_ch, kernel, kernel});
    net.biases.emplace_back(std::vector<int>{out_ch});
  };
  auto add_plain = [&net](LayerKind kind) {
    LayerSpec l;
    l.kind = kind;
    net.layers.push_back(l);
    net.weights.emplace_back();
    net.biases.emplace_back();
  };
  auto add_dense = [&net](int in_dim, int out_dim) {
    LayerSpec l;
    l.kind = LayerKind::kDense;
    l.dense = {in_dim, out_dim};
    net.layers.push_back(l);
    net.weights.emplace_back(std::vector<int>{out_dim, in_dim});
    net.biases.emplace_back(std::vector<int>{out_dim});
  };

  add_conv(c, 8, 3, 1);
  add_plain(LayerKind::kReLU);
  const int h1 = conv_out(h, 3, 1), w1 = conv_out(w, 3, 1);
  add_conv(8, 16, 3, 2);
  add_plain(LayerKind::kReLU);
  const int h2 = conv_out(h1, 3, 2), w2 = conv_out(w1, 3, 2);
  if (h2 < 1 || w2 < 1) throw ShapeError("input too small for the convolutional stack");
  add_plain(LayerKind::kFlatten);
  add_dense(16 * h2 * w2, 128);
  add_plain(LayerKind::kReLU);
  add_dense(128, num_actions);
  return net;
}

template <typename T>
void he_uniform_init(QNetwork<T>& net, Rng& rng) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.weights[i].empty()) continue;
    int fan_in = 0;
    if (net.layers[i].kind == LayerKind::kConv2D) {
      const auto& cv = net.layers[i].conv;
      fan_in = cv.in_ch * cv.kernel * cv.kernel;
    } else {
      fan_in = net.layers[i].dense.in_dim;
    }
    const double limit = std::sqrt(6.0 / fan_in);
    for (auto& v : net.weights[i].data) v = static_cast<T>(rng.uniform(-limit, limit));
    for (auto& v : net.biases[i].data) v = T(0);
  }
}

template <typename T>
std::int64_t param_count(const QNetwork<T>& net) {
  std::int64_t n = 0;
  for (const auto& w : net.weights) n += w.size();
  for (const auto& b : net.biases) n += b.size();
  return n;
}

template <typename T>
Tensor<T> forward(const QNetwork<T>& net, const Tensor<T>& batch, ForwardCache<T>* cache) {
  if (batch.shape.size() != 4 || batch.shape[1] != net.input_shape[0] ||
      batch.shape[2] != net.input_shape[1] || batch.shape[3] != net.input_shape[2])
    throw ShapeError("forward: expected (N," + std::to_string(net.input_shape[0]) + "," +
                     std::to_string(net.input_shape[1]) + "," +
                     std::to_string(net.input_shape[2]) + "), got " + shape_str(batch.shape));

  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(batch);
  }
  Tensor<T> cur = batch;
  std::vector<T> cols;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& layer = net.layers[li];
    Tensor<T> out(layer_output_shape<T>(layer, cur.shape));
    switch (layer.kind) {
      case LayerKind::kConv2D: {
        const auto& cv = layer.conv;
        const int n = cur.shape[0], h = cur.shape[2], w = cur.shape[3];
        const int spatial = out.shape[2] * out.shape[3];
        const int patch = cv.in_ch * cv.kernel * cv.kernel;
        cols.resize(static_cast<std::size_t>(patch) * spatial);
        for (int s = 0; s < n; ++s) {
          const T* x = cur.data.data() + static_cast<std::size_t>(s) * cv.in_ch * h * w;
          T* y = out.data.data() + static_cast<std::size_t>(s) * cv.out_ch * spatial;
          im2col(x, cv.in_ch, h, w, cv.kernel, cv.stride, cols.data());
          for (int f = 0; f < cv.out_ch; ++f) {
            const T bias = net.biases[li].data[f];
            T* row = y + static_cast<std::size_t>(f) * spatial;
            for (int p = 0; p < spatial; ++p) row[p] = bias;
          }
          gemm_acc(net.weights[li].data.data(), cols.data(), y, cv.out_ch, patch, spatial);
        }
        break;
      }
      case LayerKind::kReLU:
        for (std::int64_t i = 0; i < cur.size(); ++i)
          out.data[i] = cur.data[i] > T(0) ? cur.data[i] : T(0);
        break;
      case LayerKind::kFlatten: out.data = cur.data; break;
      case LayerKind::kDense: {
        const auto& d = layer.dense;
        if (cur.shape.size() != 2 || cur.shape[1] != d.in_dim)
          throw ShapeError("dense: expected (N," + std::to_string(d.in_dim) + "), got " +
                           shape_str(cur.shape));
        const int n = cur.shape[0];
        for (int s = 0; s < n; ++s)
          std::memcpy(out.data.data() + static_cast<std::size_t>(s) * d.out_dim,
                      net.biases[li].data.data(), sizeof(T) * d.out_dim);
        gemm_nt_acc(cur.data.data(), net.weights[li].data.data(), out.data.data(), n, d.in_dim,
                    d.out_dim);
        break;
      }
    }
    cur = std::move(out);
    if (cache) cache->activations.push_back(cur);
  }
  return cur;
}

template <typename T>
T backward(const QNetwork<T>& net, const ForwardCache<T>& cache, const std::vector<int>& actions,
           const std::vector<T>& targets, Gradients<T>& grads) {
  const Tensor<T>& q = cache.activations.back();
  const int n = q.shape[0];
  const int num_actions = q.shape[1];
  if (static_cast<int>(actions.size()) != n || static_cast<int>(targets.size()) != n)
    throw ShapeError("backward: batch of " + std::to_string(n) + " needs matching actions/targets");

  grads.weights.assign(net.weights.size(), {});
  grads.biases.assign(net.biases.size(), {});
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    if (!net.weights[i].empty()) {
      grads.weights[i] = Tensor<T>(net.weights[i].shape);
      grads.biases[i] = Tensor<T>(net.biases[i].shape);
    }
  }

  // L = mean_n (q[n, a_n] - y_n)^2
  T loss = T(0);
  Tensor<T> delta(q.shape);
  for (int s = 0; s < n; ++s) {
    const int a = actions[s];
    if (a < 0 || a >= num_actions)
      throw ShapeError("backward: action index " + std::to_string(a) + " out of range");
    const T residual = q.data[static_cast<std::size_t>(s) * num_actions + a] - targets[s];
    if (!std::isfinite(static_cast<double>(residual)))
      throw NumericError("non-finite TD residual at batch index " + std::to_string(s));
    loss += residual * residual;
    delta.data[static_cast<std::size_t>(s) * num_actions + a] = T(2) * residual / T(n);
  }
  loss /= T(n);

  Tensor<T> grad = std::move(delta);
  std::vector<T> cols, dcols;
  for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
    const LayerSpec& layer = net.layers[li];
    const Tensor<T>& input = cache.activations[li];
    const Tensor<T>& output = cache.activations[li + 1];
    Tensor<T> grad_in(input.shape);
    switch (layer.kind) {
      case LayerKind::kConv2D: {
        const auto& cv = layer.conv;
        const int nb = input.shape[0], h = input.shape[2], w = input.shape[3];
        const int spatial = output.shape[2] * output.shape[3];
        const int patch = cv.in_ch * cv.kernel * cv.kernel;
        cols.resize(static_cast<std::size_t>(patch) * spatial);
        dcols.resize(cols.size());
        for (int s = 0; s < nb; ++s) {
          const T* x = input.data.data() + static_cast<std::size_t>(s) * cv.in_ch * h * w;
          const T* dy = grad.data.data() + static_cast<std::size_t>(s) * cv.out_ch * spatial;
          im2col(x, cv.in_ch, h, w, cv.kernel, cv.stride, cols.data());
          // dW += dY * cols^T, db += row sums of dY
          gemm_nt_acc(dy, cols.data(), grads.weights[li].data.data(), cv.out_ch, spatial, patch);
          for (int f = 0; f < cv.out_ch; ++f) {
            T acc = T(0);
            const T* row = dy + static_cast<std::size_t>(f) * spatial;
            for (int p = 0; p < spatial; ++p) acc += row[p];
            grads.biases[li].data[f] += acc;
          }
          // dX = col2im(W^T * dY)
          std::fill(dcols.begin(), dcols.end(), T(0));
          gemm_tn_acc(net.weights[li].data.data(), dy, dcols.data(), patch, cv.out_ch, spatial);
          col2im_acc(dcols.data(), cv.in_ch, h, w, cv.kernel, cv.stride,
                     grad_in.data.data() + static_cast<std::size_t>(s) * cv.in_ch * h * w);
        }
        break;
      }
      case LayerKind::kReLU:
        for (std::int64_t i = 0; i < grad.size(); ++i)
          grad_in.data[i] = output.data[i] > T(0) ? grad.data[i] : T(0);
        break;
      case LayerKind::kFlatten: grad_in.data = grad.data; break;
      case LayerKind::kDense: {
        const auto& d = layer.dense;
        const int nb = input.shape[0];
        // dW += dY^T * X, db += column sums, dX = dY * W
        gemm_tn_acc(grad.data.data(), input.data.data(), grads.weights[li].data.data(), d.out_dim,
                    nb, d.in_dim);
        for (int s = 0; s < nb; ++s) {
          const T* row = grad.data.data() + static_cast<std::size_t>(s) * d.out_dim;
          for (int m = 0; m < d.out_dim; ++m) grads.biases[li].data[m] += row[m];
        }
        gemm_acc(grad.data.data(), net.weights[li].data.data(), grad_in.data.data(), nb, d.out_dim,
                 d.in_dim);
        break;
      }
    }
    grad = std::move(grad_in);
  }
  return loss;
}

template <typename T>
Optimizer<T>::Optimizer(Kind kind, T learning_rate, T momentum)
    : kind_(kind), lr_(learning_rate), momentum_(momentum) {
  if (lr_ < T(0)) throw NumericError("learning rate must be non-negative");
  if (momentum_ < T(0) || momentum_ >= T(1)) throw NumericError("momentum must be in [0,1)");
}

template <typename T>
void Optimizer<T>::apply(const std::vector<Tensor<T>*>& params,
                         const std::vector<const Tensor<T>*>& grads) {
  if (params.size() != grads.size())
    throw ShapeError("optimizer: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " grads");
  if (velocity_.empty() && kind_ == Kind::kSgdMomentum) {
    velocity_.reserve(params.size());
    for (const auto* p : params) velocity_.emplace_back(p->shape);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = *grads[i];
    require_shape<T>(g.shape, p.shape, "optimizer");
    if (kind_ == Kind::kSgd) {
      for (std::int64_t j = 0; j < p.size(); ++j) p.data[j] -= lr_ * g.data[j];
    } else {
      require_shape<T>(velocity_[i].shape, p.shape, "optimizer velocity");
      for (std::int64_t j = 0; j < p.size(); ++j) {
        velocity_[i].data[j] = momentum_ * velocity_[i].data[j] + g.data[j];
        p.data[j] -= lr_ * velocity_[i].data[j];
      }
    }
  }
}

template <typename T>
void Optimizer<T>::apply(QNetwork<T>& net, const Gradients<T>& grads) {
  std::vector<Tensor<T>*> params;
  std::vector<const Tensor<T>*> gs;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    if (net.weights[i].empty()) continue;
    params.push_back(&net.weights[i]);
    gs.push_back(&grads.weights[i]);
    params.push_back(&net.biases[i]);
    gs.push_back(&grads.biases[i]);
  }
  apply(params, gs);
}

// --- Checkpoints --------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'H', 'D', 'Q', 'N', 'E', 'T', '\0', '\0'};
constexpr std::uint32_t kSchemaVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
}  // namespace

void save_checkpoint(const QNetwork<float>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kSchemaVersion);
  std::uint32_t count = 0;
  for (const auto& w : net.weights)
    if (!w.empty()) count += 2;
  write_u32(out, count);
  auto write_tensor = [&out](const Tensor<float>& t) {
    write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  };
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    if (net.weights[i].empty()) continue;
    write_tensor(net.weights[i]);
    write_tensor(net.biases[i]);
  }
  if (!out) throw CheckpointError("short write to checkpoint '" + path + "'");
}

void load_checkpoint(QNetwork<float>& net, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw CheckpointError("'" + path + "' is not a parameter checkpoint");
  const std::uint32_t version = read_u32(in);
  if (version != kSchemaVersion)
    throw CheckpointError("checkpoint schema version " + std::to_string(version) +
                          " unsupported (expected " + std::to_string(kSchemaVersion) + ")");
  const std::uint32_t count = read_u32(in);
  std::vector<Tensor<float>*> slots;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    if (net.weights[i].empty()) continue;
    slots.push_back(&net.weights[i]);
    slots.push_back(&net.biases[i]);
  }
  if (count != slots.size())
    throw CheckpointError("checkpoint holds " + std::to_string(count) +
                          " tensors, network needs " + std::to_string(slots.size()));
  for (Tensor<float>* slot : slots) {
    const std::uint32_t rank = read_u32(in);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_u32(in));
    if (!in || shape != slot->shape)
      throw CheckpointError("checkpoint tensor shape " + shape_str(shape) + " does not match " +
                            shape_str(slot->shape));
    in.read(reinterpret_cast<char*>(slot->data.data()),
            static_cast<std::streamsize>(slot->data.size() * sizeof(float)));
  }
  if (!in) throw CheckpointError("truncated checkpoint '" + path + "'");
}

template struct Tensor<float>;
template struct Tensor<double>;
template QNetwork<float> make_q_network<float>(std::array<int, 3>, int);
template QNetwork<double> make_q_network<double>(std::array<int, 3>, int);
template void he_uniform_init<float>(QNetwork<float>&, Rng&);
template void he_uniform_init<double>(QNetwork<double>&, Rng&);
template std::int64_t param_count<float>(const QNetwork<float>&);
template std::int64_t param_count<double>(const QNetwork<double>&);
template Tensor<float> forward<float>(const QNetwork<float>&, const Tensor<float>&,
                                      ForwardCache<float>*);
template Tensor<double> forward<double>(const QNetwork<double>&, const Tensor<double>&,
                                        ForwardCache<double>*);
template float backward<float>(const QNetwork<float>&, const ForwardCache<float>&,
                               const std::vector<int>&, const std::vector<float>&,
                               Gradients<float>&);
template double backward<double>(const QNetwork<double>&, const ForwardCache<double>&,
                                 const std::vector<int>&, const std::vector<double>&,
                                 Gradients<double>&);
template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace hawkdove::numerics
