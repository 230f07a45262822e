#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "test_support.hpp"
#include "valpat/evaluation.hpp"
#include "valpat/synthetic.hpp"
#include "valpat/trainer.hpp"

using namespace valpat;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg = TrainConfig::desk_profile();
  cfg.epochs = 4;
  cfg.batch_size = 4;
  cfg.warmup_epochs = 1;
  cfg.queue_capacity = 16;
  cfg.num_attributes = 8;
  cfg.embed_dim = 16;
  cfg.momentum_m = 0.9;
  cfg.image_encoder = ImageEncoderConfig{16, 8, 3, {4, 8}, 3, 2};
  cfg.text_encoder = TextEncoderConfig{1, 2, 16, 16, 0, 2};
  cfg.tokenizer = TokenizerConfig{16, 512};
  cfg.seed = 11;
  return cfg;
}

struct Fixture {
  testsup::TempDir dir{"trainer"};
  Dataset ds;
  ImageStore images{"."};

  explicit Fixture(int cards = 16, bool with_attributes = true, bool with_captions = true) {
    SyntheticOptions opt;
    opt.num_cards = cards;
    opt.height = 16;
    opt.width = 8;
    opt.seed = 9;
    SyntheticData data = make_pedestrian_cards(opt);
    if (!with_captions) {
      for (auto& sample : data.dataset.samples) sample.caption.reset();
    }
    write_synthetic_dataset(dir.path(), data);
    ds = std::move(data.dataset);
    if (with_attributes && with_captions) {
      mine_dataset_attributes(ds, 8, builtin_lexicon());
    }
    images = ImageStore(dir.path());
  }
};

std::vector<std::uint32_t> first_batch(std::size_t b) {
  std::vector<std::uint32_t> batch(b);
  for (std::size_t i = 0; i < b; ++i) batch[i] = static_cast<std::uint32_t>(i);
  return batch;
}

std::string run_and_log(TrainerState& state, const Dataset& ds, ImageStore& images,
                        std::uint64_t max_steps = 0) {
  std::ostringstream log;
  run_training(state, ds, images, &log, max_steps);
  return log.str();
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("SSL-only step reports zero ITC/MAC and grows only the SSL queue") {
  Fixture fx(16, /*with_attributes=*/false, /*with_captions=*/false);
  TrainConfig cfg = tiny_config();
  cfg.toggles.itc = false;
  cfg.toggles.mac = false;

  TrainerState state = init_trainer(cfg, fx.ds);
  const StepResult r1 = train_step(state, fx.ds, fx.images, first_batch(4));
  CHECK(r1.breakdown.l_i2t == 0.0);
  CHECK(r1.breakdown.l_t2i == 0.0);
  CHECK(r1.breakdown.l_mac_hard == 0.0);
  CHECK(r1.breakdown.l_mac_soft == 0.0);
  CHECK(state.queue_ssl.filled() == 4);
  CHECK(state.queue_itc_img.filled() == 0);
  CHECK(state.queue_itc_txt.filled() == 0);

  // the very first step sees an empty queue: no negatives, zero SSL loss
  CHECK(r1.breakdown.l_ssl == 0.0);
  const StepResult r2 = train_step(state, fx.ds, fx.images, first_batch(4));
  CHECK(r2.breakdown.l_ssl > 0.0);
  CHECK(state.queue_ssl.filled() == 8);
}

TEST_CASE("queue fill follows the FIFO arithmetic across steps") {
  Fixture fx;
  TrainConfig cfg = tiny_config();  // K=16, B=4
  TrainerState state = init_trainer(cfg, fx.ds);
  for (int step = 1; step <= 6; ++step) {
    (void)train_step(state, fx.ds, fx.images, first_batch(4));
    const Index expected = std::min<Index>(4 * step, 16);
    CHECK(state.queue_ssl.filled() == expected);
    CHECK(state.queue_itc_img.filled() == expected);
    CHECK(state.queue_itc_txt.filled() == expected);
  }
}

TEST_CASE("two runs from an identical seed produce identical logs") {
  Fixture fx;
  const TrainConfig cfg = tiny_config();

  TrainerState a = init_trainer(cfg, fx.ds);
  TrainerState b = init_trainer(cfg, fx.ds);
  const std::string log_a = run_and_log(a, fx.ds, fx.images, 8);
  const std::string log_b = run_and_log(b, fx.ds, fx.images, 8);
  CHECK(log_a == log_b);
  CHECK(log_a.find("\"step\":7") != std::string::npos);

  // a different seed diverges
  TrainConfig other = cfg;
  other.seed = 12;
  TrainerState c = init_trainer(other, fx.ds);
  CHECK(run_and_log(c, fx.ds, fx.images, 8) != log_a);
}

TEST_CASE("key parameters never receive gradients") {
  Fixture fx;
  TrainerState state = init_trainer(tiny_config(), fx.ds);
  for (int step = 0; step < 3; ++step) {
    (void)train_step(state, fx.ds, fx.images, first_batch(4));
  }
  for (nn::Param* p : state.key_param_list()) {
    INFO("key parameter ", p->name);
    CHECK(p->grad.cwiseAbs().maxCoeff() == 0.0);
  }
  // and the query towers did receive gradients on the last step
  bool any_step_applied = false;
  for (nn::Param* p : state.trainable_params()) {
    any_step_applied |= p->grad.cwiseAbs().maxCoeff() > 0.0;
  }
  CHECK(any_step_applied);
}

TEST_CASE("tau_prime stays inside its clamp range") {
  Fixture fx;
  TrainConfig cfg = tiny_config();
  cfg.tau_prime_init = 0.011;  // near the lower clamp
  cfg.base_lr = 0.05;          // large steps push it around
  TrainerState state = init_trainer(cfg, fx.ds);
  for (int step = 0; step < 8; ++step) {
    (void)train_step(state, fx.ds, fx.images, first_batch(4));
    CHECK(state.tau_prime_value() >= LossWeights::tau_prime_min);
    CHECK(state.tau_prime_value() <= LossWeights::tau_prime_max);
  }
}

TEST_CASE("MAC enabled without attribute labels is an error") {
  Fixture fx(16, /*with_attributes=*/false, /*with_captions=*/true);
  TrainConfig cfg = tiny_config();
  CHECK_THROWS_WITH_AS(init_trainer(cfg, fx.ds), doctest::Contains("vocabulary"), Error);

  // vocabulary present but a batch without labels still fails inside the step
  Fixture labeled;
  TrainerState state = init_trainer(cfg, labeled.ds);
  Dataset stripped = labeled.ds;
  for (auto& sample : stripped.samples) sample.attributes.reset();
  CHECK_THROWS_WITH_AS((void)train_step(state, stripped, labeled.images, first_batch(4)),
                       doctest::Contains("no attribute labels"), Error);
}

TEST_CASE("caption-less samples are excluded from ITC/MAC but keep SSL running") {
  Fixture fx;
  Dataset mixed = fx.ds;
  mixed.samples[1].caption.reset();  // batch row 1 has no caption
  mixed.samples[1].attributes.reset();
  mixed.samples[1].attribute_indices.reset();

  TrainerState state = init_trainer(tiny_config(), mixed);
  (void)train_step(state, mixed, fx.images, first_batch(4));
  const StepResult r = train_step(state, mixed, fx.images, first_batch(4));
  CHECK(r.breakdown.l_ssl > 0.0);
  CHECK(r.breakdown.l_i2t > 0.0);
  CHECK(r.breakdown.l_mac_hard > 0.0);
  // ITC queues grew by the three captioned rows only
  CHECK(state.queue_ssl.filled() == 8);
  CHECK(state.queue_itc_img.filled() == 6);
}

TEST_CASE("checkpoint round-trip continues bit-identically") {
  Fixture fx;
  const TrainConfig cfg = tiny_config();

  // uninterrupted reference: 6 steps
  TrainerState reference = init_trainer(cfg, fx.ds);
  std::vector<StepResult> ref_results;
  run_training(reference, fx.ds, fx.images, nullptr, 6,
               [&](const TrainerState&, const StepResult& r) { ref_results.push_back(r); });

  // interrupted run: 3 steps, save, load, 3 more
  TrainerState first_half = init_trainer(cfg, fx.ds);
  run_training(first_half, fx.ds, fx.images, nullptr, 3);
  save_checkpoint(first_half, fx.dir.file("mid.ckpt"));

  TrainerState resumed = load_checkpoint(fx.dir.file("mid.ckpt"), cfg);
  resumed.steps_per_epoch = first_half.steps_per_epoch;
  std::vector<StepResult> tail;
  run_training(resumed, fx.ds, fx.images, nullptr, 6,
               [&](const TrainerState&, const StepResult& r) { tail.push_back(r); });

  REQUIRE(ref_results.size() == 6);
  REQUIRE(tail.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const LossBreakdown& expect = ref_results[i + 3].breakdown;
    const LossBreakdown& got = tail[i].breakdown;
    CHECK(expect.l_ssl == got.l_ssl);
    CHECK(expect.l_i2t == got.l_i2t);
    CHECK(expect.l_t2i == got.l_t2i);
    CHECK(expect.l_mac_hard == got.l_mac_hard);
    CHECK(expect.l_mac_soft == got.l_mac_soft);
    CHECK(expect.total == got.total);
  }
}

TEST_CASE("checkpoint version and corruption errors") {
  Fixture fx;
  const TrainConfig cfg = tiny_config();
  TrainerState state = init_trainer(cfg, fx.ds);
  run_training(state, fx.ds, fx.images, nullptr, 2);
  save_checkpoint(state, fx.dir.file("good.ckpt"));

  SUBCASE("bumped format version names both versions") {
    std::string bytes = testsup::read_text(fx.dir.file("good.ckpt"));
    bytes[8] = 9;  // version field follows the 8-byte magic
    testsup::write_text(fx.dir.file("bad.ckpt"), bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(fx.dir.file("bad.ckpt"), cfg),
                         doctest::Contains("version 9"), Error);
    CHECK_THROWS_WITH_AS(load_checkpoint(fx.dir.file("bad.ckpt"), cfg),
                         doctest::Contains("expected 1"), Error);
  }

  SUBCASE("truncated file is a corruption error") {
    const std::string bytes = testsup::read_text(fx.dir.file("good.ckpt"));
    testsup::write_text(fx.dir.file("short.ckpt"), bytes.substr(0, bytes.size() * 2 / 3));
    CHECK_THROWS_WITH_AS(load_checkpoint(fx.dir.file("short.ckpt"), cfg),
                         doctest::Contains("truncated"), Error);
  }

  SUBCASE("different config is rejected") {
    TrainConfig other = cfg;
    other.embed_dim = 32;
    CHECK_THROWS_WITH_AS(load_checkpoint(fx.dir.file("good.ckpt"), other),
                         doctest::Contains("different configuration"), Error);
  }
}

TEST_CASE("embedding extraction is deterministic, unit-norm and order-preserving") {
  Fixture fx;
  TrainerState state = init_trainer(tiny_config(), fx.ds);
  run_training(state, fx.ds, fx.images, nullptr, 2);

  const EmbeddingSet a = embed_dataset(state, fx.ds, fx.images, Modality::image);
  const EmbeddingSet b = embed_dataset(state, fx.ds, fx.images, Modality::image);
  CHECK((a.embeddings - b.embeddings).cwiseAbs().maxCoeff() == 0.0);
  a.validate();

  // duplicated sample -> duplicated row
  Dataset doubled = fx.ds;
  doubled.samples.push_back(doubled.samples[0]);
  const EmbeddingSet c = embed_dataset(state, doubled, fx.images, Modality::image);
  CHECK((c.embeddings.row(0) - c.embeddings.row(c.size() - 1)).cwiseAbs().maxCoeff() == 0.0);

  const EmbeddingSet t = embed_dataset(state, fx.ds, fx.images, Modality::text);
  t.validate();
  CHECK(t.size() == static_cast<Index>(fx.ds.samples.size()));

  // text embedding of a caption-less sample is an error naming the sample
  Dataset broken = fx.ds;
  broken.samples[2].caption.reset();
  CHECK_THROWS_WITH_AS(embed_dataset(state, broken, fx.images, Modality::text),
                       doctest::Contains("sample 2"), Error);
}

TEST_CASE("ssl instance accuracy is computable after training") {
  Fixture fx;
  TrainerState state = init_trainer(tiny_config(), fx.ds);
  run_training(state, fx.ds, fx.images, nullptr, 8);
  const Scalar acc = ssl_instance_accuracy(state, fx.ds, fx.images, 123);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("log records are stable formatted lines") {
  LossBreakdown b;
  b.l_ssl = 1.5;
  b.total = 2.25;
  const std::string line = format_log_record(3, b, 0.07, 1e-4);
  CHECK(line ==
        "{\"step\":3,\"l_ssl\":1.500000000000e+00,\"l_i2t\":0.000000000000e+00,"
        "\"l_t2i\":0.000000000000e+00,\"l_mac_hard\":0.000000000000e+00,"
        "\"l_mac_soft\":0.000000000000e+00,\"total\":2.250000000000e+00,"
        "\"tau_prime\":7.000000000000e-02,\"lr\":1.000000000000e-04}");
}

}  // TEST_SUITE
