#include <doctest.h>

#include "oracles.hpp"
#include "valpat/encoders.hpp"
#include "valpat/tokenizer.hpp"

using namespace valpat;

namespace {

/// FD-checks every parameter of a module against the grads accumulated by
/// one backward pass of s = sum(v .* f()): several random directional
/// derivatives per parameter.
void check_param_grads(const nn::ParamList& params, const std::function<Scalar()>& value,
                       Scalar tol = 1e-4, Scalar h = 1e-4) {
  Rng rng(1234);
  for (nn::Param* p : params) {
    INFO("parameter ", p->name);
    for (int probe = 0; probe < 3; ++probe) {
      const Scalar rel = oracle::fd_directional_error(p->value, p->grad, value, rng, h);
      CHECK(rel < tol);
    }
  }
}

ImageEncoderConfig tiny_image_config() {
  ImageEncoderConfig cfg;
  cfg.height = 8;
  cfg.width = 6;
  cfg.in_channels = 3;
  cfg.channels = {4, 6};
  cfg.kernel = 3;
  cfg.stride = 2;
  return cfg;
}

TextEncoderConfig tiny_text_config(int vocab) {
  TextEncoderConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.hidden = 8;
  cfg.max_length = 6;
  cfg.vocab_size = vocab;
  cfg.mlp_ratio = 2;
  return cfg;
}

}  // namespace

TEST_SUITE("encoders") {

TEST_CASE("zero images with a zero final conv give zero features") {
  Rng rng(1);
  ImageEncoder enc;
  enc.init(tiny_image_config(), rng, "enc");
  enc.convs.back().weight.value.setZero();
  enc.convs.back().bias.value.setZero();
  const Matrix images = Matrix::Zero(2, 3 * 8 * 6);
  const Matrix features = enc.forward(images);
  CHECK(features.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicated images give identical feature rows") {
  Rng rng(2);
  ImageEncoder enc;
  enc.init(tiny_image_config(), rng, "enc");
  Matrix images(2, 3 * 8 * 6);
  for (Index c = 0; c < images.cols(); ++c) images(0, c) = rng.uniform();
  images.row(1) = images.row(0);
  const Matrix features = enc.forward(images);
  CHECK((features.row(0) - features.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(features.allFinite());

  // determinism across calls
  const Matrix again = enc.forward(images);
  CHECK((features - again).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("image encoder rejects shape mismatches") {
  Rng rng(3);
  ImageEncoder enc;
  enc.init(tiny_image_config(), rng, "enc");
  CHECK_THROWS_AS(enc.forward(Matrix::Zero(1, 17)), Error);
}

TEST_CASE("image encoder input gradient matches a pixel perturbation of 1e-3") {
  Rng rng(4);
  ImageEncoder enc;
  enc.init(tiny_image_config(), rng, "enc");
  Matrix images(2, 3 * 8 * 6);
  for (Index r = 0; r < images.rows(); ++r)
    for (Index c = 0; c < images.cols(); ++c) images(r, c) = rng.uniform(0.05, 0.95);

  const Matrix v = oracle::random_matrix(2, enc.feature_dim(), rng);
  auto value = [&] { return enc.forward(images).cwiseProduct(v).sum(); };

  nn::ParamList params;
  enc.collect(params);
  nn::zero_grads(params);
  (void)enc.forward(images);
  const Matrix dimages = enc.backward(v);

  const Scalar h = 1e-3;
  Rng pick(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Index r = pick.uniform_int(0, images.rows() - 1);
    const Index c = pick.uniform_int(0, images.cols() - 1);
    const Scalar saved = images(r, c);
    images(r, c) = saved + h;
    const Scalar up = value();
    images(r, c) = saved - h;
    const Scalar down = value();
    images(r, c) = saved;
    const Scalar numeric = (up - down) / (2 * h);
    const Scalar scale = std::max({std::abs(numeric), std::abs(dimages(r, c)), 1e-6});
    CHECK(std::abs(numeric - dimages(r, c)) / scale < 1e-4);
  }
}

TEST_CASE("image encoder parameter gradients match finite differences") {
  Rng rng(6);
  ImageEncoderConfig cfg = tiny_image_config();
  cfg.channels = {3, 4};
  ImageEncoder enc;
  enc.init(cfg, rng, "enc");
  Matrix images(2, 3 * 8 * 6);
  for (Index r = 0; r < images.rows(); ++r)
    for (Index c = 0; c < images.cols(); ++c) images(r, c) = rng.uniform(0.05, 0.95);
  const Matrix v = oracle::random_matrix(2, enc.feature_dim(), rng);

  nn::ParamList params;
  enc.collect(params);
  nn::zero_grads(params);
  (void)enc.forward(images);
  (void)enc.backward(v);
  check_param_grads(params, [&] { return enc.forward(images).cwiseProduct(v).sum(); });
}

TEST_CASE("text encoder: padding region cannot influence the features") {
  Rng rng(7);
  TextEncoder enc;
  enc.init(tiny_text_config(12), rng, "txt");

  IdMatrix ids(2, 6);
  // same valid prefix (bos, 5, 7, eos), junk beyond the eos on row 1
  ids.row(0) << Tokenizer::bos_id, 5, 7, Tokenizer::eos_id, Tokenizer::pad_id, Tokenizer::pad_id;
  ids.row(1) << Tokenizer::bos_id, 5, 7, Tokenizer::eos_id, 9, 11;
  const Matrix features = enc.forward(ids);
  CHECK((features.row(0) - features.row(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("text encoder: duplicated sequences give duplicated rows") {
  Rng rng(8);
  TextEncoder enc;
  enc.init(tiny_text_config(12), rng, "txt");
  IdMatrix ids(2, 6);
  ids.row(0) << Tokenizer::bos_id, 4, 6, 8, Tokenizer::eos_id, Tokenizer::pad_id;
  ids.row(1) = ids.row(0);
  const Matrix features = enc.forward(ids);
  CHECK((features.row(0) - features.row(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("text encoder parameter gradients match finite differences") {
  Rng rng(9);
  TextEncoder enc;
  enc.init(tiny_text_config(10), rng, "txt");
  IdMatrix ids(2, 6);
  ids.row(0) << Tokenizer::bos_id, 4, 6, 8, Tokenizer::eos_id, Tokenizer::pad_id;
  ids.row(1) << Tokenizer::bos_id, 5, Tokenizer::eos_id, Tokenizer::pad_id, Tokenizer::pad_id,
      Tokenizer::pad_id;
  const Matrix v = oracle::random_matrix(2, enc.feature_dim(), rng);

  nn::ParamList params;
  enc.collect(params);
  nn::zero_grads(params);
  (void)enc.forward(ids);
  enc.backward(v);
  check_param_grads(params, [&] { return enc.forward(ids).cwiseProduct(v).sum(); });
}

TEST_CASE("projection heads normalize to the unit sphere") {
  Rng rng(10);
  ProjectionHead head;
  head.init(5, 8, 4, rng, "head");
  const Matrix features = oracle::random_matrix(6, 5, rng);
  const Matrix embeddings = project_and_normalize(features, head);
  for (Index r = 0; r < embeddings.rows(); ++r) {
    CHECK(std::abs(embeddings.row(r).norm() - 1.0) <= 1e-6);
  }
}

TEST_CASE("scaling a feature row leaves the normalized output unchanged (linear head, zero bias)") {
  Rng rng(11);
  ProjectionHead head;
  head.init(5, 0, 4, rng, "head", /*bias=*/false);
  Matrix features = oracle::random_matrix(2, 5, rng);
  features.row(1) = 3.0 * features.row(0);
  const Matrix embeddings = project_and_normalize(features, head);
  CHECK((embeddings.row(0) - embeddings.row(1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalization of (3,4) gives (0.6,0.8)") {
  Matrix x(1, 2);
  x << 3.0, 4.0;
  const Matrix y = l2_normalize_rows<Scalar>(x);
  CHECK(y(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(y(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("zero rows cannot be normalized") {
  Matrix x = Matrix::Zero(1, 3);
  CHECK_THROWS_AS((void)l2_normalize_rows<Scalar>(x), Error);
}

TEST_CASE("normalization backward matches finite differences") {
  Rng rng(12);
  Matrix x = oracle::random_matrix(3, 5, rng);
  const Matrix v = oracle::random_matrix(3, 5, rng);
  const Matrix dx = l2_normalize_rows_backward<Scalar>(x, v);
  const Scalar rel = oracle::fd_relative_error(
      x, dx, [&] { return l2_normalize_rows<Scalar>(x).cwiseProduct(v).sum(); });
  CHECK(rel < 1e-4);
}

TEST_CASE("projection head backward matches finite differences") {
  Rng rng(13);
  ProjectionHead head;
  head.init(4, 6, 3, rng, "head");
  Matrix features = oracle::random_matrix(3, 4, rng);
  const Matrix v = oracle::random_matrix(3, 3, rng);

  nn::ParamList params;
  head.collect(params);
  nn::zero_grads(params);
  (void)head.forward(features);
  const Matrix dfeat = head.backward(v);

  auto value = [&] { return head.forward(features).cwiseProduct(v).sum(); };
  check_param_grads(params, value);
  CHECK(oracle::fd_relative_error(features, dfeat, value) < 1e-4);
}

TEST_CASE("momentum update endpoints and direct arithmetic") {
  Rng rng(14);
  nn::Param q, k;
  q.init_normal(3, 2, 1.0, rng);
  k.init_normal(3, 2, 1.0, rng);
  const Matrix k0 = k.value;

  SUBCASE("m=1 leaves the key unchanged") {
    nn::momentum_update({&q}, {&k}, 1.0);
    CHECK((k.value - k0).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("m=0 copies the query") {
    nn::momentum_update({&q}, {&k}, 0.0);
    CHECK((k.value - q.value).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("theta_k=0, theta_q=1, m=0.9 gives 0.1") {
    q.value.setOnes();
    k.value.setZero();
    nn::momentum_update({&q}, {&k}, 0.9);
    CHECK((k.value.array() - 0.1).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("momentum updates contract geometrically toward a frozen query") {
  Rng rng(15);
  for (const Scalar m : {0.0, 0.9, 0.999, 1.0}) {
    nn::Param q, k;
    q.init_normal(4, 3, 1.0, rng);
    k.init_normal(4, 3, 1.0, rng);
    const Matrix gap0 = k.value - q.value;
    const int steps = 25;
    for (int t = 0; t < steps; ++t) nn::momentum_update({&q}, {&k}, m);
    const Matrix expected_gap = std::pow(m, steps) * gap0;
    CHECK(((k.value - q.value) - expected_gap).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("encoder pair: key starts as an exact copy and shapes always match") {
  Rng rng(16);
  EncoderPair<ImageModel> pair;
  pair.query.init(tiny_image_config(), 0, 4, rng, "image.q");
  pair.key.init(tiny_image_config(), 0, 4, rng, "image.k");
  pair.sync_key();

  nn::ParamList q, k;
  pair.query.collect(q);
  pair.key.collect(k);
  REQUIRE(q.size() == k.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK((q[i]->value - k[i]->value).cwiseAbs().maxCoeff() == 0.0);
  }

  pair.momentum = 0.5;
  q[0]->value.array() += 1.0;
  momentum_update(pair);
  CHECK((k[0]->value - (q[0]->value.array() - 0.5).matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

}  // TEST_SUITE
