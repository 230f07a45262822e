#include <doctest.h>

#include "oracles.hpp"
#include "valpat/augment.hpp"
#include "valpat/optim.hpp"
#include "valpat/schedule.hpp"

using namespace valpat;

TEST_SUITE("schedule") {

TEST_CASE("warmup starts at min_lr and reaches base_lr") {
  // 7 warmup epochs of 10 steps, 140 epochs total
  const std::uint64_t spe = 10, epochs = 140, warmup = 7;
  CHECK(lr_at_step<Scalar>(0, spe, epochs, warmup, 1e-3, 1e-6) == 1e-6);
  CHECK(lr_at_step<Scalar>(70, spe, epochs, warmup, 1e-3, 1e-6) == 1e-3);
  // midpoint of the decay phase: halfway between warmup end and final step
  const std::uint64_t last = epochs * spe - 1;
  const std::uint64_t mid = (70 + last) / 2;
  const Scalar expected = 1e-3 - (1e-3 - 1e-6) * static_cast<Scalar>(mid - 70) /
                                     static_cast<Scalar>(last - 70);
  CHECK(lr_at_step<Scalar>(mid, spe, epochs, warmup, 1e-3, 1e-6) ==
        doctest::Approx(expected).epsilon(1e-15));
  CHECK(expected == doctest::Approx((1e-3 + 1e-6) / 2).epsilon(2e-3));
  CHECK(lr_at_step<Scalar>(last, spe, epochs, warmup, 1e-3, 1e-6) ==
        doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("schedule is piecewise monotone") {
  // 5 warmup epochs x 4 steps: the peak sits at step 20
  Scalar prev = lr_at_step<Scalar>(0, 4, 20, 5, 1e-2, 1e-5);
  for (std::uint64_t step = 1; step <= 20; ++step) {
    const Scalar lr = lr_at_step<Scalar>(step, 4, 20, 5, 1e-2, 1e-5);
    CHECK(lr >= prev);  // warmup
    prev = lr;
  }
  for (std::uint64_t step = 21; step < 80; ++step) {
    const Scalar lr = lr_at_step<Scalar>(step, 4, 20, 5, 1e-2, 1e-5);
    CHECK(lr <= prev);  // decay
    prev = lr;
  }
}

}  // TEST_SUITE

TEST_SUITE("optim") {

TEST_CASE("one AdamW step matches the hand-computed update") {
  nn::Param p;
  p.name = "w";
  p.value = Matrix::Constant(1, 1, 2.0);
  p.grad = Matrix::Constant(1, 1, 0.5);

  AdamW opt;
  opt.attach({&p});
  const Scalar lr = 0.1, wd = 0.1;
  opt.step({&p}, lr, wd);

  // t=1: m_hat = g, v_hat = g^2, adaptive step = lr * g/(|g|+eps),
  // then decoupled decay on the updated value.
  const Scalar adaptive = 0.1 * 0.5 / (0.5 + 1e-8);
  const Scalar after_adaptive = 2.0 - adaptive;
  const Scalar expected = after_adaptive - lr * wd * after_adaptive;
  CHECK(p.value(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("decay=false parameters skip weight decay") {
  nn::Param p;
  p.name = "bias";
  p.decay = false;
  p.value = Matrix::Constant(1, 1, 2.0);
  p.grad = Matrix::Zero(1, 1);

  AdamW opt;
  opt.attach({&p});
  opt.step({&p}, 0.1, 0.5);
  CHECK(p.value(0, 0) == 2.0);  // zero grad, no decay: unchanged
}

TEST_CASE("AdamW minimizes a quadratic") {
  nn::Param p;
  p.name = "x";
  p.value = Matrix::Constant(1, 1, 5.0);
  p.grad = Matrix::Zero(1, 1);
  AdamW opt;
  opt.attach({&p});
  for (int i = 0; i < 400; ++i) {
    p.grad(0, 0) = 2.0 * (p.value(0, 0) - 1.5);  // d/dx (x-1.5)^2
    opt.step({&p}, 0.05, 0.0);
  }
  CHECK(std::abs(p.value(0, 0) - 1.5) < 1e-3);
}

TEST_CASE("global gradient clipping caps the norm") {
  nn::Param a, b;
  a.value = Matrix::Zero(2, 2);
  a.grad = Matrix::Constant(2, 2, 3.0);
  b.value = Matrix::Zero(1, 2);
  b.grad = Matrix::Constant(1, 2, 4.0);
  const Scalar norm = nn::global_grad_norm({&a, &b});
  CHECK(norm == doctest::Approx(std::sqrt(4 * 9.0 + 2 * 16.0)));

  nn::clip_global_grad_norm({&a, &b}, 1.0);
  CHECK(nn::global_grad_norm({&a, &b}) == doctest::Approx(1.0).epsilon(1e-12));

  // already under the cap: untouched
  nn::Param c;
  c.value = Matrix::Zero(1, 1);
  c.grad = Matrix::Constant(1, 1, 0.25);
  nn::clip_global_grad_norm({&c}, 1.0);
  CHECK(c.grad(0, 0) == 0.25);
}

}  // TEST_SUITE

TEST_SUITE("augment") {

TEST_CASE("light policy without a flip is the normalized identity") {
  ImageBuffer img(4, 3, 3);
  Rng fill(1);
  for (Index i = 0; i < img.data.size(); ++i) img.data[i] = fill.uniform();

  AugmentationPolicy policy;
  policy.kind = AugmentationKind::light_itc;
  policy.flip_prob = 0.0;  // force the no-flip outcome
  Rng rng(2);
  const auto views = augment(img, policy, rng);
  REQUIRE(views.size() == 1);
  const ImageBuffer expected = normalize_image(img, policy.mean, policy.stddev);
  CHECK((views[0].data - expected.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flip is an involution") {
  ImageBuffer img(3, 5, 3);
  Rng fill(3);
  for (Index i = 0; i < img.data.size(); ++i) img.data[i] = fill.uniform();
  const ImageBuffer twice = hflip(hflip(img));
  CHECK((twice.data - img.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("heavy policy is deterministic given the generator state") {
  ImageBuffer img(8, 6, 3);
  Rng fill(4);
  for (Index i = 0; i < img.data.size(); ++i) img.data[i] = fill.uniform();

  AugmentationPolicy policy;  // heavy by default
  Rng rng_a(77), rng_b(77);
  const auto views_a = augment(img, policy, rng_a);
  const auto views_b = augment(img, policy, rng_b);
  REQUIRE(views_a.size() == 2);
  REQUIRE(views_b.size() == 2);
  for (int v = 0; v < 2; ++v) {
    CHECK((views_a[static_cast<std::size_t>(v)].data -
           views_b[static_cast<std::size_t>(v)].data)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  // and the two views differ from each other
  CHECK((views_a[0].data - views_a[1].data).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("augment rejects pixels outside [0,1]") {
  ImageBuffer img(2, 2, 3);
  img.data.setConstant(1.5);
  AugmentationPolicy policy;
  Rng rng(5);
  CHECK_THROWS_AS(augment(img, policy, rng), Error);
}

}  // TEST_SUITE
