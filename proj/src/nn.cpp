#include "valpat/nn.hpp"

#include <cmath>

namespace valpat::nn {

namespace {
constexpr Scalar kInvSqrt2 = 0.7071067811865475244;
constexpr Scalar kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

// ---------------------------------------------------------------------------
// Linear

void Linear::init(Index in_dim, Index out_dim, Rng& rng, const std::string& name, bool kaiming,
                  bool with_bias) {
  use_bias = with_bias;
  const Scalar stddev = kaiming ? std::sqrt(2.0 / static_cast<Scalar>(in_dim))
                                : std::sqrt(2.0 / static_cast<Scalar>(in_dim + out_dim));
  weight.name = name + ".weight";
  weight.init_normal(out_dim, in_dim, stddev, rng);
  bias.name = name + ".bias";
  bias.decay = false;
  bias.init_zero(use_bias ? out_dim : 0, use_bias ? 1 : 0);
}

Matrix Linear::forward(const Matrix& x) {
  VALPAT_REQUIRE(x.cols() == weight.value.cols(), "Linear ", weight.name, ": input dim ", x.cols(),
                 " != ", weight.value.cols());
  x_ = x;
  Matrix y = x * weight.value.transpose();
  if (use_bias) y.rowwise() += bias.value.col(0).transpose();
  return y;
}

Matrix Linear::backward(const Matrix& dy) {
  VALPAT_REQUIRE(dy.rows() == x_.rows() && dy.cols() == weight.value.rows(),
                 "Linear ", weight.name, ": backward shape mismatch");
  weight.grad.noalias() += dy.transpose() * x_;
  if (use_bias) bias.grad.col(0) += dy.colwise().sum().transpose();
  return dy * weight.value;
}

void Linear::collect(ParamList& out) {
  out.push_back(&weight);
  if (use_bias) out.push_back(&bias);
}

// ---------------------------------------------------------------------------
// Activations

Matrix ReLU::forward(const Matrix& x) {
  mask_ = (x.array() > 0.0).cast<Scalar>();
  return x.cwiseProduct(mask_);
}

Matrix ReLU::backward(const Matrix& dy) const { return dy.cwiseProduct(mask_); }

Matrix Gelu::forward(const Matrix& x) {
  x_ = x;
  return x.unaryExpr([](Scalar v) { return v * 0.5 * (1.0 + std::erf(v * kInvSqrt2)); });
}

Matrix Gelu::backward(const Matrix& dy) const {
  // d/dx [x * Phi(x)] = Phi(x) + x * phi(x)
  const Matrix slope = x_.unaryExpr([](Scalar v) {
    const Scalar cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const Scalar pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    return cdf + v * pdf;
  });
  return dy.cwiseProduct(slope);
}

// ---------------------------------------------------------------------------
// LayerNorm

void LayerNorm::init(Index dim, const std::string& name) {
  gamma.name = name + ".gamma";
  gamma.decay = false;
  gamma.value = Matrix::Ones(dim, 1);
  gamma.grad = Matrix::Zero(dim, 1);
  beta.name = name + ".beta";
  beta.decay = false;
  beta.init_zero(dim, 1);
}

Matrix LayerNorm::forward(const Matrix& x) {
  VALPAT_REQUIRE(x.cols() == gamma.value.rows(), "LayerNorm ", gamma.name, ": dim mismatch");
  const Index n = x.cols();
  const Vector mean = x.rowwise().mean();
  Matrix centered = x.colwise() - mean;
  const Vector var = centered.array().square().rowwise().mean();
  inv_std_ = (var.array() + eps).rsqrt();
  xhat_ = centered.array().colwise() * inv_std_.array();
  Matrix y = xhat_.array().rowwise() * gamma.value.col(0).transpose().array();
  y.rowwise() += beta.value.col(0).transpose();
  (void)n;
  return y;
}

Matrix LayerNorm::backward(const Matrix& dy) {
  const Index n = xhat_.cols();
  gamma.grad.col(0) += dy.cwiseProduct(xhat_).colwise().sum().transpose();
  beta.grad.col(0) += dy.colwise().sum().transpose();

  // dxhat scaled by gamma; standard layer-norm backward per row.
  Matrix dxhat = dy.array().rowwise() * gamma.value.col(0).transpose().array();
  const Vector row_mean = dxhat.rowwise().mean();
  const Vector row_mean_xhat = dxhat.cwiseProduct(xhat_).rowwise().mean();
  Matrix dx = dxhat;
  dx.colwise() -= row_mean;
  dx -= (xhat_.array().colwise() * row_mean_xhat.array()).matrix();
  dx = (dx.array().colwise() * inv_std_.array()).matrix();
  (void)n;
  return dx;
}

void LayerNorm::collect(ParamList& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

// ---------------------------------------------------------------------------
// Conv2d

void Conv2d::init(int in_c, int out_c, int k, int stride_, int pad, Rng& rng,
                  const std::string& name) {
  in_channels = in_c;
  out_channels = out_c;
  kernel = k;
  stride = stride_;
  padding = pad;
  const Index fan_in = static_cast<Index>(in_c) * k * k;
  weight.name = name + ".weight";
  weight.init_normal(out_c, fan_in, std::sqrt(2.0 / static_cast<Scalar>(fan_in)), rng);
  bias.name = name + ".bias";
  bias.decay = false;
  bias.init_zero(out_c, 1);
}

Matrix Conv2d::forward(const Matrix& x, int h, int w) {
  VALPAT_REQUIRE(x.cols() == static_cast<Index>(in_channels) * h * w, "Conv2d ", weight.name,
                 ": input of ", x.cols(), " values does not match ", in_channels, "x", h, "x", w);
  in_h_ = h;
  in_w_ = w;
  out_h_ = out_size(h, 0);
  out_w_ = out_size(w, 1);
  VALPAT_REQUIRE(out_h_ > 0 && out_w_ > 0, "Conv2d ", weight.name, ": output collapsed to zero");

  const Index batch = x.rows();
  const Index patch = static_cast<Index>(in_channels) * kernel * kernel;
  const Index spatial = static_cast<Index>(out_h_) * out_w_;
  cols_.assign(static_cast<std::size_t>(batch), Matrix());
  Matrix y(batch, static_cast<Index>(out_channels) * spatial);

  for (Index b = 0; b < batch; ++b) {
    Matrix cols = Matrix::Zero(patch, spatial);
    const auto row = x.row(b);
    for (int oy = 0; oy < out_h_; ++oy) {
      for (int ox = 0; ox < out_w_; ++ox) {
        const Index col = static_cast<Index>(oy) * out_w_ + ox;
        for (int c = 0; c < in_channels; ++c) {
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride + ky - padding;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride + kx - padding;
              if (ix < 0 || ix >= w) continue;
              cols((static_cast<Index>(c) * kernel + ky) * kernel + kx, col) =
                  row[(static_cast<Index>(c) * h + iy) * w + ix];
            }
          }
        }
      }
    }
    Matrix out_plane = weight.value * cols;  // out_channels x spatial
    out_plane.colwise() += bias.value.col(0);
    for (int oc = 0; oc < out_channels; ++oc) {
      y.block(b, static_cast<Index>(oc) * spatial, 1, spatial) = out_plane.row(oc);
    }
    cols_[static_cast<std::size_t>(b)] = std::move(cols);
  }
  return y;
}

Matrix Conv2d::backward(const Matrix& dy) {
  const Index batch = static_cast<Index>(cols_.size());
  const Index spatial = static_cast<Index>(out_h_) * out_w_;
  VALPAT_REQUIRE(dy.rows() == batch && dy.cols() == static_cast<Index>(out_channels) * spatial,
                 "Conv2d ", weight.name, ": backward shape mismatch");

  Matrix dx = Matrix::Zero(batch, static_cast<Index>(in_channels) * in_h_ * in_w_);
  for (Index b = 0; b < batch; ++b) {
    Matrix dy_plane(out_channels, spatial);
    for (int oc = 0; oc < out_channels; ++oc) {
      dy_plane.row(oc) = dy.block(b, static_cast<Index>(oc) * spatial, 1, spatial);
    }
    const Matrix& cols = cols_[static_cast<std::size_t>(b)];
    weight.grad.noalias() += dy_plane * cols.transpose();
    bias.grad.col(0) += dy_plane.rowwise().sum();

    const Matrix dcols = weight.value.transpose() * dy_plane;  // patch x spatial
    auto drow = dx.row(b);
    for (int oy = 0; oy < out_h_; ++oy) {
      for (int ox = 0; ox < out_w_; ++ox) {
        const Index col = static_cast<Index>(oy) * out_w_ + ox;
        for (int c = 0; c < in_channels; ++c) {
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride + ky - padding;
            if (iy < 0 || iy >= in_h_) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride + kx - padding;
              if (ix < 0 || ix >= in_w_) continue;
              drow[(static_cast<Index>(c) * in_h_ + iy) * in_w_ + ix] +=
                  dcols((static_cast<Index>(c) * kernel + ky) * kernel + kx, col);
            }
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::collect(ParamList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

Matrix GlobalAvgPool::forward(const Matrix& x, int channels, int h, int w) {
  VALPAT_REQUIRE(x.cols() == static_cast<Index>(channels) * h * w,
                 "GlobalAvgPool: input does not match ", channels, "x", h, "x", w);
  channels_ = channels;
  h_ = h;
  w_ = w;
  const Index spatial = static_cast<Index>(h) * w;
  Matrix y(x.rows(), channels);
  for (int c = 0; c < channels; ++c) {
    y.col(c) = x.middleCols(static_cast<Index>(c) * spatial, spatial).rowwise().mean();
  }
  return y;
}

Matrix GlobalAvgPool::backward(const Matrix& dy) const {
  const Index spatial = static_cast<Index>(h_) * w_;
  Matrix dx(dy.rows(), static_cast<Index>(channels_) * spatial);
  for (int c = 0; c < channels_; ++c) {
    dx.middleCols(static_cast<Index>(c) * spatial, spatial) =
        (dy.col(c) / static_cast<Scalar>(spatial)).replicate(1, spatial);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Embedding

void Embedding::init(Index vocab, Index hidden, Rng& rng, const std::string& name) {
  table.name = name + ".table";
  table.init_normal(vocab, hidden, 0.02, rng);
}

Matrix Embedding::forward(const IdMatrix& ids) {
  const Index rows = ids.rows() * ids.cols();
  flat_ids_.resize(static_cast<std::size_t>(rows));
  Matrix y(rows, table.value.cols());
  Index r = 0;
  for (Index b = 0; b < ids.rows(); ++b) {
    for (Index t = 0; t < ids.cols(); ++t, ++r) {
      const int id = ids(b, t);
      VALPAT_REQUIRE(id >= 0 && id < table.value.rows(), "Embedding: id ", id, " out of range");
      flat_ids_[static_cast<std::size_t>(r)] = id;
      y.row(r) = table.value.row(id);
    }
  }
  return y;
}

void Embedding::backward(const Matrix& dy) {
  VALPAT_REQUIRE(dy.rows() == static_cast<Index>(flat_ids_.size()),
                 "Embedding: backward shape mismatch");
  for (Index r = 0; r < dy.rows(); ++r) {
    table.grad.row(flat_ids_[static_cast<std::size_t>(r)]) += dy.row(r);
  }
}

void Embedding::collect(ParamList& out) { out.push_back(&table); }

// ---------------------------------------------------------------------------
// MultiHeadAttention

void MultiHeadAttention::init(int hidden_dim, int num_heads, Rng& rng, const std::string& name) {
  VALPAT_REQUIRE(hidden_dim % num_heads == 0, "attention: hidden ", hidden_dim,
                 " not divisible by heads ", num_heads);
  hidden = hidden_dim;
  heads = num_heads;
  head_dim = hidden_dim / num_heads;
  wq.init(hidden, hidden, rng, name + ".wq");
  wk.init(hidden, hidden, rng, name + ".wk");
  wv.init(hidden, hidden, rng, name + ".wv");
  wo.init(hidden, hidden, rng, name + ".wo");
}

Matrix MultiHeadAttention::forward(const Matrix& x, const std::vector<int>& valid_len,
                                   int seq_len) {
  const Index batch = x.rows() / seq_len;
  VALPAT_REQUIRE(batch * seq_len == x.rows(), "attention: rows not divisible by sequence length");
  VALPAT_REQUIRE(static_cast<Index>(valid_len.size()) == batch, "attention: valid_len size");
  seq_len_ = seq_len;
  valid_len_ = valid_len;

  q_ = wq.forward(x);
  k_ = wk.forward(x);
  v_ = wv.forward(x);

  const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(head_dim));
  probs_.assign(static_cast<std::size_t>(batch) * heads, Matrix());
  Matrix concat(x.rows(), hidden);

  for (Index b = 0; b < batch; ++b) {
    const int n_valid = valid_len[static_cast<std::size_t>(b)];
    for (int h = 0; h < heads; ++h) {
      const auto qb = q_.block(b * seq_len, static_cast<Index>(h) * head_dim, seq_len, head_dim);
      const auto kb = k_.block(b * seq_len, static_cast<Index>(h) * head_dim, seq_len, head_dim);
      const auto vb = v_.block(b * seq_len, static_cast<Index>(h) * head_dim, seq_len, head_dim);

      Matrix scores = qb * kb.transpose() * scale;
      if (n_valid < seq_len) {
        scores.rightCols(seq_len - n_valid).setConstant(-1e30);
      }
      // Row softmax with max subtraction.
      Matrix probs(seq_len, seq_len);
      for (Index r = 0; r < seq_len; ++r) {
        const Scalar m = scores.row(r).maxCoeff();
        probs.row(r) = (scores.row(r).array() - m).exp();
        probs.row(r) /= probs.row(r).sum();
      }
      concat.block(b * seq_len, static_cast<Index>(h) * head_dim, seq_len, head_dim).noalias() =
          probs * vb;
      probs_[static_cast<std::size_t>(b) * heads + h] = std::move(probs);
    }
  }
  return wo.forward(concat);
}

Matrix MultiHeadAttention::backward(const Matrix& dy) {
  const Index batch = dy.rows() / seq_len_;
  const Matrix dconcat = wo.backward(dy);
  const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(head_dim));

  Matrix dq(q_.rows(), hidden), dk(k_.rows(), hidden), dv(v_.rows(), hidden);
  for (Index b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const Index col0 = static_cast<Index>(h) * head_dim;
      const auto qb = q_.block(b * seq_len_, col0, seq_len_, head_dim);
      const auto kb = k_.block(b * seq_len_, col0, seq_len_, head_dim);
      const auto vb = v_.block(b * seq_len_, col0, seq_len_, head_dim);
      const Matrix& probs = probs_[static_cast<std::size_t>(b) * heads + h];
      const auto dout = dconcat.block(b * seq_len_, col0, seq_len_, head_dim);

      const Matrix dprobs = dout * vb.transpose();
      dv.block(b * seq_len_, col0, seq_len_, head_dim).noalias() = probs.transpose() * dout;

      // softmax backward: ds = p .* (dp - rowsum(dp .* p))
      Matrix dscores = probs.cwiseProduct(dprobs);
      const Vector row_sums = dscores.rowwise().sum();
      dscores = probs.cwiseProduct(dprobs.colwise() - row_sums);

      dq.block(b * seq_len_, col0, seq_len_, head_dim).noalias() = dscores * kb * scale;
      dk.block(b * seq_len_, col0, seq_len_, head_dim).noalias() =
          dscores.transpose() * qb * scale;
    }
  }
  Matrix dx = wq.backward(dq);
  dx += wk.backward(dk);
  dx += wv.backward(dv);
  return dx;
}

void MultiHeadAttention::collect(ParamList& out) {
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
}

// ---------------------------------------------------------------------------
// TransformerBlock

void TransformerBlock::init(int hidden_dim, int num_heads, int mlp_dim, Rng& rng,
                            const std::string& name) {
  ln1.init(hidden_dim, name + ".ln1");
  ln2.init(hidden_dim, name + ".ln2");
  attn.init(hidden_dim, num_heads, rng, name + ".attn");
  fc1.init(hidden_dim, mlp_dim, rng, name + ".fc1", /*kaiming=*/true);
  fc2.init(mlp_dim, hidden_dim, rng, name + ".fc2");
}

Matrix TransformerBlock::forward(const Matrix& x, const std::vector<int>& valid_len, int seq_len) {
  Matrix h = x + attn.forward(ln1.forward(x), valid_len, seq_len);
  return h + fc2.forward(act.forward(fc1.forward(ln2.forward(h))));
}

Matrix TransformerBlock::backward(const Matrix& dy) {
  Matrix dh = dy + ln2.backward(fc1.backward(act.backward(fc2.backward(dy))));
  return dh + ln1.backward(attn.backward(dh));
}

void TransformerBlock::collect(ParamList& out) {
  ln1.collect(out);
  attn.collect(out);
  ln2.collect(out);
  fc1.collect(out);
  fc2.collect(out);
}

// ---------------------------------------------------------------------------
// Parameter utilities

void momentum_update(const ParamList& query, const ParamList& key, Scalar m) {
  VALPAT_REQUIRE(query.size() == key.size(), "momentum_update: parameter lists differ in length (",
                 query.size(), " vs ", key.size(), ")");
  VALPAT_REQUIRE(m >= 0.0 && m <= 1.0, "momentum_update: m must lie in [0,1], got ", m);
  for (std::size_t i = 0; i < query.size(); ++i) {
    const Matrix& q = query[i]->value;
    Matrix& k = key[i]->value;
    VALPAT_REQUIRE(q.rows() == k.rows() && q.cols() == k.cols(),
                   "momentum_update: shape mismatch at ", query[i]->name);
    k = m * k + (1.0 - m) * q;
  }
}

void zero_grads(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

Scalar global_grad_norm(const ParamList& params) {
  Scalar sq = 0.0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void clip_global_grad_norm(const ParamList& params, Scalar max_norm) {
  const Scalar norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  const Scalar factor = max_norm / norm;
  for (Param* p : params) p->grad *= factor;
}

}  // namespace valpat::nn
