#pragma once

#include <string>
#include <vector>

#include "valpat/common.hpp"
#include "valpat/nn.hpp"

namespace valpat {

struct ImageEncoderConfig {
  int height{64};
  int width{32};
  int in_channels{3};
  std::vector<int> channels{16, 32, 64, 128};  // one strided conv block each
  int kernel{3};
  int stride{2};

  bool operator==(const ImageEncoderConfig&) const = default;
};

/// Strided conv blocks with ReLU, then global average pooling. Feature
/// dimension is the last block's channel count.
struct ImageEncoder {
  ImageEncoderConfig cfg;
  std::vector<nn::Conv2d> convs;
  std::vector<nn::ReLU> relus;
  nn::GlobalAvgPool pool;

  void init(const ImageEncoderConfig& config, Rng& rng, const std::string& name);
  Index feature_dim() const { return cfg.channels.empty() ? 0 : cfg.channels.back(); }

  /// images: B x (in_channels*height*width), CHW rows, finite values.
  Matrix forward(const Matrix& images);
  /// Returns the gradient w.r.t. the input pixels.
  Matrix backward(const Matrix& dfeatures);
  void collect(nn::ParamList& out);
};

struct TextEncoderConfig {
  int layers{2};
  int heads{4};
  int hidden{128};
  int max_length{64};
  int vocab_size{0};  // bound when the tokenizer is built
  int mlp_ratio{4};

  bool operator==(const TextEncoderConfig&) const = default;
};

/// Pre-norm transformer over token ids. Positions after the first eos are
/// treated as padding: they are masked out of attention keys and excluded
/// from the mean pooling, so their content cannot affect the output.
struct TextEncoder {
  TextEncoderConfig cfg;
  nn::Embedding token_embedding;
  nn::Param position_embedding;  // max_length x hidden
  std::vector<nn::TransformerBlock> blocks;
  nn::LayerNorm ln_final;

  void init(const TextEncoderConfig& config, Rng& rng, const std::string& name);
  Index feature_dim() const { return cfg.hidden; }

  /// ids: B x max_length; returns pooled features B x hidden.
  Matrix forward(const IdMatrix& ids);
  /// Accumulates parameter gradients; token ids carry no input gradient.
  void backward(const Matrix& dpooled);
  void collect(nn::ParamList& out);

  static std::vector<int> valid_lengths(const IdMatrix& ids);

  std::vector<int> valid_len_;
  Index batch_{0};
};

/// Maps encoder features to the shared embedding space. hidden_dim == 0
/// gives a single linear map; otherwise one ReLU hidden layer.
struct ProjectionHead {
  nn::Linear fc1;
  nn::ReLU relu;
  nn::Linear fc2;
  bool has_hidden{false};

  void init(Index in_dim, Index hidden_dim, Index out_dim, Rng& rng, const std::string& name,
            bool bias = true);
  Index out_dim() const { return fc2.weight.value.rows(); }
  Matrix forward(const Matrix& features);
  Matrix backward(const Matrix& dembeddings);
  void collect(nn::ParamList& out);
};

/// Rows scaled to unit L2 norm; rejects degenerate (near-zero) rows.
template <class S>
MatrixX<S> l2_normalize_rows(const MatRef<S>& x) {
  MatrixX<S> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const S norm = x.row(r).norm();
    VALPAT_REQUIRE(norm > S(1e-12), "l2_normalize_rows: row ", r, " is numerically zero");
    y.row(r) = x.row(r) / norm;
  }
  return y;
}

/// Backward of row normalization: dx = (dy - y (y . dy)) / |x|.
template <class S>
MatrixX<S> l2_normalize_rows_backward(const MatRef<S>& x, const MatRef<S>& dy) {
  MatrixX<S> dx(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const S norm = x.row(r).norm();
    const VectorX<S> y = x.row(r).transpose() / norm;
    const S proj = y.dot(dy.row(r).transpose());
    dx.row(r) = (dy.row(r) - proj * y.transpose()) / norm;
  }
  return dx;
}

/// Head forward followed by row normalization (the embedding every
/// contrastive stream consumes).
Matrix project_and_normalize(const Matrix& features, ProjectionHead& head);

/// Trainable query model and its momentum-updated key counterpart. Key
/// parameters receive no gradients, only momentum_update writes them.
template <class Model>
struct EncoderPair {
  Model query;
  Model key;
  Scalar momentum{0.999};

  void update_key() {
    nn::ParamList q, k;
    query.collect(q);
    key.collect(k);
    nn::momentum_update(q, k, momentum);
  }

  /// Key starts as an exact copy of the query.
  void sync_key() {
    nn::ParamList q, k;
    query.collect(q);
    key.collect(k);
    VALPAT_REQUIRE(q.size() == k.size(), "EncoderPair: model structures differ");
    for (std::size_t i = 0; i < q.size(); ++i) k[i]->value = q[i]->value;
  }
};

template <class Model>
void momentum_update(EncoderPair<Model>& pair) {
  pair.update_key();
}

/// Image tower: shared trunk with separate heads for the instance-level and
/// the cross-modal stream (their embedding spaces are allowed to differ).
struct ImageModel {
  ImageEncoder trunk;
  ProjectionHead head_ssl;
  ProjectionHead head_itc;

  void init(const ImageEncoderConfig& config, Index head_hidden, Index embed_dim, Rng& rng,
            const std::string& name);
  void collect(nn::ParamList& out);
};

struct TextModel {
  TextEncoder trunk;
  ProjectionHead head_itc;

  void init(const TextEncoderConfig& config, Index head_hidden, Index embed_dim, Rng& rng,
            const std::string& name);
  void collect(nn::ParamList& out);
};

}  // namespace valpat
