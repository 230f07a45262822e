#include "valpat/encoders.hpp"

#include "valpat/tokenizer.hpp"

namespace valpat {

// ---------------------------------------------------------------------------
// ImageEncoder

void ImageEncoder::init(const ImageEncoderConfig& config, Rng& rng, const std::string& name) {
  VALPAT_REQUIRE(!config.channels.empty(), "ImageEncoder: channel list is empty");
  cfg = config;
  convs.clear();
  relus.clear();
  convs.resize(cfg.channels.size());
  relus.resize(cfg.channels.size());
  int in_c = cfg.in_channels;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    convs[i].init(in_c, cfg.channels[i], cfg.kernel, cfg.stride, cfg.kernel / 2, rng,
                  cat(name, ".conv", i));
    in_c = cfg.channels[i];
  }
}

Matrix ImageEncoder::forward(const Matrix& images) {
  VALPAT_REQUIRE(images.allFinite(), "ImageEncoder: non-finite input");
  VALPAT_REQUIRE(images.cols() == static_cast<Index>(cfg.in_channels) * cfg.height * cfg.width,
                 "ImageEncoder: expected ", cfg.in_channels, "x", cfg.height, "x", cfg.width,
                 " rows, got ", images.cols(), " values");
  Matrix x = images;
  int h = cfg.height;
  int w = cfg.width;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    x = relus[i].forward(convs[i].forward(x, h, w));
    h = convs[i].out_h_;
    w = convs[i].out_w_;
  }
  return pool.forward(x, cfg.channels.back(), h, w);
}

Matrix ImageEncoder::backward(const Matrix& dfeatures) {
  Matrix dx = pool.backward(dfeatures);
  for (std::size_t i = convs.size(); i-- > 0;) {
    dx = convs[i].backward(relus[i].backward(dx));
  }
  return dx;
}

void ImageEncoder::collect(nn::ParamList& out) {
  for (auto& conv : convs) conv.collect(out);
}

// ---------------------------------------------------------------------------
// TextEncoder

void TextEncoder::init(const TextEncoderConfig& config, Rng& rng, const std::string& name) {
  VALPAT_REQUIRE(config.vocab_size > 0, "TextEncoder: vocab_size must be bound before init");
  cfg = config;
  token_embedding.init(cfg.vocab_size, cfg.hidden, rng, name + ".tok");
  position_embedding.name = name + ".pos";
  position_embedding.init_normal(cfg.max_length, cfg.hidden, 0.02, rng);
  blocks.clear();
  blocks.resize(static_cast<std::size_t>(cfg.layers));
  for (int i = 0; i < cfg.layers; ++i) {
    blocks[static_cast<std::size_t>(i)].init(cfg.hidden, cfg.heads, cfg.hidden * cfg.mlp_ratio,
                                             rng, cat(name, ".block", i));
  }
  ln_final.init(cfg.hidden, name + ".ln_final");
}

std::vector<int> TextEncoder::valid_lengths(const IdMatrix& ids) {
  std::vector<int> lengths(static_cast<std::size_t>(ids.rows()));
  for (Index b = 0; b < ids.rows(); ++b) {
    int n = static_cast<int>(ids.cols());
    for (Index t = 0; t < ids.cols(); ++t) {
      if (ids(b, t) == Tokenizer::eos_id) {
        n = static_cast<int>(t) + 1;
        break;
      }
    }
    lengths[static_cast<std::size_t>(b)] = n;
  }
  return lengths;
}

Matrix TextEncoder::forward(const IdMatrix& ids) {
  VALPAT_REQUIRE(ids.cols() == cfg.max_length, "TextEncoder: expected sequences of length ",
                 cfg.max_length, ", got ", ids.cols());
  batch_ = ids.rows();
  valid_len_ = valid_lengths(ids);

  Matrix x = token_embedding.forward(ids);  // (B*L) x H
  for (Index b = 0; b < batch_; ++b) {
    x.middleRows(b * cfg.max_length, cfg.max_length) += position_embedding.value;
  }
  for (auto& block : blocks) x = block.forward(x, valid_len_, cfg.max_length);
  x = ln_final.forward(x);

  // Masked mean over the valid prefix.
  Matrix pooled(batch_, cfg.hidden);
  for (Index b = 0; b < batch_; ++b) {
    const int n = valid_len_[static_cast<std::size_t>(b)];
    pooled.row(b) = x.middleRows(b * cfg.max_length, n).colwise().mean();
  }
  return pooled;
}

void TextEncoder::backward(const Matrix& dpooled) {
  VALPAT_REQUIRE(dpooled.rows() == batch_, "TextEncoder: backward batch mismatch");
  Matrix dx = Matrix::Zero(batch_ * cfg.max_length, cfg.hidden);
  for (Index b = 0; b < batch_; ++b) {
    const int n = valid_len_[static_cast<std::size_t>(b)];
    dx.middleRows(b * cfg.max_length, n) =
        (dpooled.row(b) / static_cast<Scalar>(n)).replicate(n, 1);
  }
  dx = ln_final.backward(dx);
  for (std::size_t i = blocks.size(); i-- > 0;) dx = blocks[i].backward(dx);
  for (Index b = 0; b < batch_; ++b) {
    position_embedding.grad += dx.middleRows(b * cfg.max_length, cfg.max_length);
  }
  token_embedding.backward(dx);
}

void TextEncoder::collect(nn::ParamList& out) {
  token_embedding.collect(out);
  out.push_back(&position_embedding);
  for (auto& block : blocks) block.collect(out);
  ln_final.collect(out);
}

// ---------------------------------------------------------------------------
// ProjectionHead

void ProjectionHead::init(Index in_dim, Index hidden_dim, Index out_dim, Rng& rng,
                          const std::string& name, bool bias) {
  has_hidden = hidden_dim > 0;
  if (has_hidden) {
    fc1.init(in_dim, hidden_dim, rng, name + ".fc1", /*kaiming=*/true, bias);
    fc2.init(hidden_dim, out_dim, rng, name + ".fc2", /*kaiming=*/false, bias);
  } else {
    fc2.init(in_dim, out_dim, rng, name + ".fc2", /*kaiming=*/false, bias);
  }
}

Matrix ProjectionHead::forward(const Matrix& features) {
  VALPAT_REQUIRE(features.allFinite(), "ProjectionHead: non-finite input");
  if (has_hidden) return fc2.forward(relu.forward(fc1.forward(features)));
  return fc2.forward(features);
}

Matrix ProjectionHead::backward(const Matrix& dembeddings) {
  if (has_hidden) return fc1.backward(relu.backward(fc2.backward(dembeddings)));
  return fc2.backward(dembeddings);
}

void ProjectionHead::collect(nn::ParamList& out) {
  if (has_hidden) fc1.collect(out);
  fc2.collect(out);
}

Matrix project_and_normalize(const Matrix& features, ProjectionHead& head) {
  const Matrix projected = head.forward(features);
  return l2_normalize_rows<Scalar>(projected);
}

// ---------------------------------------------------------------------------
// Composite models

void ImageModel::init(const ImageEncoderConfig& config, Index head_hidden, Index embed_dim,
                      Rng& rng, const std::string& name) {
  trunk.init(config, rng, name + ".trunk");
  head_ssl.init(trunk.feature_dim(), head_hidden, embed_dim, rng, name + ".head_ssl");
  head_itc.init(trunk.feature_dim(), head_hidden, embed_dim, rng, name + ".head_itc");
}

void ImageModel::collect(nn::ParamList& out) {
  trunk.collect(out);
  head_ssl.collect(out);
  head_itc.collect(out);
}

void TextModel::init(const TextEncoderConfig& config, Index head_hidden, Index embed_dim, Rng& rng,
                     const std::string& name) {
  trunk.init(config, rng, name + ".trunk");
  head_itc.init(trunk.feature_dim(), head_hidden, embed_dim, rng, name + ".head_itc");
}

void TextModel::collect(nn::ParamList& out) {
  trunk.collect(out);
  head_itc.collect(out);
}

}  // namespace valpat
