#pragma once

#include <string>
#include <vector>

#include "valpat/common.hpp"

namespace valpat::nn {

/// One named parameter tensor with its gradient accumulator. Vectors are
/// stored as n-by-1 matrices. `decay` marks whether decoupled weight decay
/// applies (biases, normalization parameters and the ITC temperature opt
/// out).
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool decay{true};

  void init_zero(Index rows, Index cols) {
    value = Matrix::Zero(rows, cols);
    grad = Matrix::Zero(rows, cols);
  }
  void init_normal(Index rows, Index cols, Scalar stddev, Rng& rng) {
    value.resize(rows, cols);
    for (Index c = 0; c < cols; ++c)
      for (Index r = 0; r < rows; ++r) value(r, c) = rng.normal(0.0, stddev);
    grad = Matrix::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
  Index size() const { return value.size(); }
};

using ParamList = std::vector<Param*>;

/// Fully connected layer, y = x W^T + b, rows are samples.
struct Linear {
  Param weight;  // out x in
  Param bias;    // out x 1
  bool use_bias{true};

  /// Kaiming when the layer feeds a ReLU family activation, Xavier otherwise.
  void init(Index in_dim, Index out_dim, Rng& rng, const std::string& name, bool kaiming = false,
            bool with_bias = true);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);
  void collect(ParamList& out);

  Matrix x_;  // cached input
};

struct ReLU {
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy) const;
  Matrix mask_;
};

/// Exact GELU (erf form).
struct Gelu {
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy) const;
  Matrix x_;
};

/// Row-wise layer normalization with learned scale/shift.
struct LayerNorm {
  Param gamma;  // dim x 1
  Param beta;   // dim x 1
  Scalar eps{1e-5};

  void init(Index dim, const std::string& name);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);
  void collect(ParamList& out);

  Matrix xhat_;
  Vector inv_std_;
};

/// 2-D convolution over CHW-flattened rows, im2col + GEMM. The spatial
/// input size is bound at forward time.
struct Conv2d {
  int in_channels{0}, out_channels{0}, kernel{3}, stride{1}, padding{0};
  Param weight;  // out_channels x (in_channels * kernel * kernel)
  Param bias;    // out_channels x 1

  void init(int in_c, int out_c, int k, int stride_, int pad, Rng& rng, const std::string& name);
  /// x: B x (in_channels*h*w); returns B x (out_channels*out_h*out_w).
  Matrix forward(const Matrix& x, int h, int w);
  Matrix backward(const Matrix& dy);
  void collect(ParamList& out);

  int out_size(int in, int /*axis*/) const { return (in + 2 * padding - kernel) / stride + 1; }

  int in_h_{0}, in_w_{0}, out_h_{0}, out_w_{0};
  std::vector<Matrix> cols_;  // per-sample im2col cache
};

/// Mean over the spatial grid, per channel.
struct GlobalAvgPool {
  Matrix forward(const Matrix& x, int channels, int h, int w);
  Matrix backward(const Matrix& dy) const;
  int channels_{0}, h_{0}, w_{0};
};

/// Token embedding lookup; rows of the output are (sample, position) pairs
/// stacked sample-major.
struct Embedding {
  Param table;  // vocab x hidden

  void init(Index vocab, Index hidden, Rng& rng, const std::string& name);
  Matrix forward(const IdMatrix& ids);
  void backward(const Matrix& dy);
  void collect(ParamList& out);

  std::vector<int> flat_ids_;
};

/// Multi-head self-attention over fixed-length sequences. Keys beyond a
/// sample's valid length are masked out of every query's softmax, so padding
/// positions can never influence valid positions.
struct MultiHeadAttention {
  int hidden{0}, heads{0}, head_dim{0};
  Linear wq, wk, wv, wo;

  void init(int hidden_dim, int num_heads, Rng& rng, const std::string& name);
  Matrix forward(const Matrix& x, const std::vector<int>& valid_len, int seq_len);
  Matrix backward(const Matrix& dy);
  void collect(ParamList& out);

  int seq_len_{0};
  std::vector<int> valid_len_;
  Matrix q_, k_, v_;
  std::vector<Matrix> probs_;  // per (sample, head), row-softmaxed scores
};

/// Pre-norm transformer block: x + Attn(LN(x)), then x + MLP(LN(x)).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Linear fc1, fc2;
  Gelu act;

  void init(int hidden_dim, int num_heads, int mlp_dim, Rng& rng, const std::string& name);
  Matrix forward(const Matrix& x, const std::vector<int>& valid_len, int seq_len);
  Matrix backward(const Matrix& dy);
  void collect(ParamList& out);
};

/// theta_k <- m * theta_k + (1 - m) * theta_q, elementwise over the zipped
/// parameter lists. Key parameters never receive gradients.
void momentum_update(const ParamList& query, const ParamList& key, Scalar m);

void zero_grads(const ParamList& params);
Scalar global_grad_norm(const ParamList& params);
void clip_global_grad_norm(const ParamList& params, Scalar max_norm);

}  // namespace valpat::nn
