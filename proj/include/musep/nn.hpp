#pragma once

#include "musep/types.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace musep {

/// Architecture hyperparameters: linear early fusion to `fused_dim`, a GRU
/// stack of width `fused_dim` per direction, and a two-layer ReLU head.
struct ModelConfig {
  std::vector<std::size_t> input_dims;  // per-modality widths, concatenation order
  std::size_t fused_dim = 256;
  std::size_t rnn_layers = 1;
  bool rnn_bidirectional = false;
  std::size_t head_hidden = 128;
  std::uint64_t seed = 0;

  std::size_t input_width() const;
  std::size_t directions() const { return rnn_bidirectional ? 2 : 1; }
  std::size_t rnn_output_width() const { return fused_dim * directions(); }

  bool operator==(const ModelConfig&) const = default;
};

/// Config with the default head width (fused_dim / 2).
ModelConfig make_model_config(std::vector<std::size_t> input_dims, std::size_t fused_dim = 256,
                              std::size_t rnn_layers = 1, bool bidirectional = false,
                              std::uint64_t seed = 0);

void validate(const ModelConfig& config);

/// Per-direction GRU parameters, in storage order.
enum class GruParam : std::size_t { Wr, Wz, Wn, Ur, Uz, Un, Br, Bz, Bn };
inline constexpr std::size_t kGruParamCount = 9;

/// All learnable tensors in one documented order:
///   fusion W (N x d), fusion b (1 x d),
///   per GRU layer, forward then backward direction:
///     W_r, W_z, W_n (in x d), U_r, U_z, U_n (d x d), b_r, b_z, b_n (1 x d),
///   head W1 (d_out x h), head b1 (1 x h), head W2 (h x 1), head b2 (1 x 1).
/// Weights multiply from the right: y = x W + b with x a row vector.
using ParamSet = std::vector<Matrix>;

namespace param_index {
inline constexpr std::size_t kFusionW = 0;
inline constexpr std::size_t kFusionB = 1;
std::size_t gru(const ModelConfig& c, std::size_t layer, std::size_t direction, GruParam p);
std::size_t head_w1(const ModelConfig& c);
std::size_t head_b1(const ModelConfig& c);
std::size_t head_w2(const ModelConfig& c);
std::size_t head_b2(const ModelConfig& c);
std::size_t count(const ModelConfig& c);
}  // namespace param_index

std::vector<std::string> param_names(const ModelConfig& config);

struct Model {
  ModelConfig config;
  ParamSet params;
  /// Bumped by every in-place update; a forward cache is only valid for the
  /// revision that produced it.
  std::uint64_t revision = 0;

  std::size_t parameter_count() const;
};

/// Weights uniform in +-1/sqrt(fan_in) from a per-tensor PRNG stream seeded
/// by config.seed; biases zero.
Model init_model(const ModelConfig& config);
/// Same shapes as init_model, every entry zero.
Model zero_model(const ModelConfig& config);
ParamSet zeros_like(const ParamSet& params);

struct DirectionCache {
  Matrix r, z, n, q, h_prev;  // (T*B) x d, rows time-major
};

struct LayerCache {
  Matrix input;
  std::vector<DirectionCache> directions;
};

struct ForwardCache {
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::uint64_t revision = 0;
  ModelConfig config;
  Matrix input;   // (T*B) x N
  Matrix fused;   // (T*B) x d
  std::vector<LayerCache> layers;
  Matrix rnn_out;   // (T*B) x d_out
  Matrix head_pre;  // (T*B) x h
};

struct ForwardResult {
  Matrix predictions;  // T x B
  ForwardCache cache;
};

/// One sequence (T x N); predictions are T x 1.
ForwardResult forward(const Model& model, const Matrix& x);
/// Equal-length sequences processed together; predictions are T x B.
ForwardResult forward_batch(const Model& model, std::span<const Matrix> xs);

struct Gradients {
  ParamSet params;
  Matrix input;  // (T*B) x N, time-major rows
};

/// Exact reverse-mode gradients for a cache produced by forward on the same
/// model revision. `d_predictions` has the shape of the forward predictions.
Gradients backward(const Model& model, const ForwardCache& cache, const Matrix& d_predictions);

}  // namespace musep
