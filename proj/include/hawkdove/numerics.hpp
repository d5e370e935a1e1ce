#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hawkdove/rng.hpp"

namespace hawkdove::numerics {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::int64_t shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Dense row-major tensor. Training runs on float; gradient checks
// instantiate the same kernels on double for finite-difference headroom.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(shape_size(shape), T(0)) {}

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  bool empty() const { return data.empty(); }
};

struct Conv2DSpec {
  int in_ch = 0, out_ch = 0, kernel = 0, stride = 1;
};
struct DenseSpec {
  int in_dim = 0, out_dim = 0;
};
enum class LayerKind : std::uint8_t { kConv2D, kReLU, kFlatten, kDense };

struct LayerSpec {
  LayerKind kind = LayerKind::kReLU;
  Conv2DSpec conv{};
  DenseSpec dense{};
};

// Feedforward Q-value head: one scalar per action. Layer shapes are chained
// and checked at construction; forward rejects inputs that do not match.
template <typename T>
struct QNetwork {
  std::array<int, 3> input_shape{};  // (C, H, W)
  int num_actions = 0;
  std::vector<LayerSpec> layers;
  std::vector<Tensor<T>> weights;  // empty tensor for non-parametric layers
  std::vector<Tensor<T>> biases;
};

// conv 8@3x3/1 - relu - conv 16@3x3/2 - relu - flatten - dense 128 - relu - dense A
template <typename T>
QNetwork<T> make_q_network(std::array<int, 3> input_shape, int num_actions = 5);

template <typename T>
void he_uniform_init(QNetwork<T>& net, Rng& rng);

template <typename T>
std::int64_t param_count(const QNetwork<T>& net);

template <typename T>
struct ForwardCache {
  // activations[0] is the input batch; activations[i+1] the output of layer i.
  std::vector<Tensor<T>> activations;
};

// Batched forward pass; input (N, C, H, W), output (N, num_actions).
template <typename T>
Tensor<T> forward(const QNetwork<T>& net, const Tensor<T>& batch, ForwardCache<T>* cache = nullptr);

template <typename T>
struct Gradients {
  std::vector<Tensor<T>> weights, biases;
};

// Gradient of the batch-mean squared error between Q(obs)[action] and the
// TD target. Returns the loss; grads take the shapes of the parameters.
// Throws NumericError (with the offending batch index) on non-finite loss.
template <typename T>
T backward(const QNetwork<T>& net, const ForwardCache<T>& cache, const std::vector<int>& actions,
           const std::vector<T>& targets, Gradients<T>& grads);

template <typename T>
class Optimizer {
 public:
  enum class Kind : std::uint8_t { kSgd, kSgdMomentum };

  Optimizer() = default;
  Optimizer(Kind kind, T learning_rate, T momentum = T(0));

  // p <- p - lr * v with v <- momentum * v + g (v = g for plain SGD).
  void apply(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads);
  void apply(QNetwork<T>& net, const Gradients<T>& grads);

  Kind kind() const { return kind_; }
  T learning_rate() const { return lr_; }

 private:
  Kind kind_ = Kind::kSgd;
  T lr_ = T(0);
  T momentum_ = T(0);
  std::vector<Tensor<T>> velocity_;
};

// Versioned binary parameter checkpoint (magic, schema version, tensor count,
// per-tensor shape header + raw little-endian float32 values).
void save_checkpoint(const QNetwork<float>& net, const std::string& path);
// Loads into a structurally identical network; rejects version or shape
// mismatches.
void load_checkpoint(QNetwork<float>& net, const std::string& path);

}  // namespace hawkdove::numerics
