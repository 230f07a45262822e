#include "valpat/trainer.hpp"

#include <cstdio>

#include "valpat/augment.hpp"

namespace valpat {

LossWeights TrainerState::loss_weights() const {
  LossWeights lw;
  lw.alpha = cfg.toggles.mac_soft ? cfg.alpha : 0.0;
  lw.beta = cfg.beta;
  lw.gamma = cfg.gamma;
  lw.tau = cfg.tau;
  lw.tau_prime = tau_prime_value();
  return lw;
}

nn::ParamList TrainerState::trainable_params() {
  nn::ParamList params;
  image.query.collect(params);
  text.query.collect(params);
  classifier.collect(params);
  params.push_back(&tau_prime);
  return params;
}

nn::ParamList TrainerState::key_param_list() {
  nn::ParamList params;
  image.key.collect(params);
  text.key.collect(params);
  return params;
}

namespace {

Matrix image_batch_matrix(const std::vector<ImageBuffer>& views) {
  VALPAT_REQUIRE(!views.empty(), "image batch is empty");
  const Index cols = views.front().size();
  Matrix batch(static_cast<Index>(views.size()), cols);
  for (std::size_t i = 0; i < views.size(); ++i) {
    VALPAT_REQUIRE(views[i].size() == cols, "image batch has mixed sizes");
    batch.row(static_cast<Index>(i)) = views[i].data.transpose();
  }
  return batch;
}

void clamp_tau_prime(nn::Param& tau_prime) {
  tau_prime.value(0, 0) =
      std::clamp(tau_prime.value(0, 0), LossWeights::tau_prime_min, LossWeights::tau_prime_max);
}

}  // namespace

TrainerState build_trainer_skeleton(const TrainConfig& cfg, Tokenizer tokenizer,
                                    Vector attribute_weights) {
  cfg.validate();

  TrainerState state{
      .cfg = cfg,
      .queue_ssl = NegativeQueue<Scalar>(static_cast<Index>(cfg.queue_capacity), cfg.embed_dim),
      .queue_itc_img =
          NegativeQueue<Scalar>(static_cast<Index>(cfg.queue_capacity), cfg.embed_dim),
      .queue_itc_txt =
          NegativeQueue<Scalar>(static_cast<Index>(cfg.queue_capacity), cfg.embed_dim),
      .rng = Rng(cfg.seed),
  };
  state.queue_ssl_sources.assign(static_cast<std::size_t>(cfg.queue_capacity), -1);
  state.tokenizer = std::move(tokenizer);
  state.attribute_weights = std::move(attribute_weights);

  TextEncoderConfig text_cfg = cfg.text_encoder;
  text_cfg.vocab_size = state.tokenizer.vocab_size();

  state.image.momentum = cfg.momentum_m;
  state.text.momentum = cfg.momentum_m;
  state.image.query.init(cfg.image_encoder, cfg.head_hidden, cfg.embed_dim, state.rng, "image.q");
  state.image.key.init(cfg.image_encoder, cfg.head_hidden, cfg.embed_dim, state.rng, "image.k");
  state.text.query.init(text_cfg, cfg.head_hidden, cfg.embed_dim, state.rng, "text.q");
  state.text.key.init(text_cfg, cfg.head_hidden, cfg.embed_dim, state.rng, "text.k");
  state.image.sync_key();
  state.text.sync_key();
  state.classifier.init(cfg.num_attributes, cfg.embed_dim, state.rng, "classifier");

  state.tau_prime.name = "tau_prime";
  state.tau_prime.decay = false;
  state.tau_prime.value = Matrix::Constant(1, 1, cfg.tau_prime_init);
  state.tau_prime.grad = Matrix::Zero(1, 1);

  state.optimizer.attach(state.trainable_params());
  return state;
}

TrainerState init_trainer(const TrainConfig& cfg, const Dataset& dataset) {
  cfg.validate();

  std::vector<std::string> captions;
  for (const auto& sample : dataset.samples) {
    if (sample.has_caption()) captions.push_back(*sample.caption);
  }
  if (cfg.toggles.itc || cfg.toggles.mac) {
    VALPAT_REQUIRE(!captions.empty(),
                   "init_trainer: ITC/MAC enabled but the dataset has no captions");
  }
  Tokenizer tokenizer =
      build_tokenizer(captions, cfg.tokenizer.max_length, cfg.tokenizer.max_vocab);

  Vector weights;
  if (cfg.toggles.mac) {
    VALPAT_REQUIRE(dataset.vocabulary.has_value(),
                   "init_trainer: MAC enabled but the dataset has no attribute vocabulary");
    VALPAT_REQUIRE(dataset.vocabulary->size() == cfg.num_attributes,
                   "init_trainer: vocabulary has M=", dataset.vocabulary->size(),
                   " attributes, config expects M=", cfg.num_attributes);
    weights = dataset.vocabulary->weights;
  }

  TrainerState state = build_trainer_skeleton(cfg, std::move(tokenizer), std::move(weights));
  const std::uint64_t n = dataset.samples.size();
  VALPAT_REQUIRE(n >= cfg.batch_size, "init_trainer: dataset of ", n,
                 " samples is smaller than batch_size ", cfg.batch_size);
  state.steps_per_epoch = n / cfg.batch_size;  // last partial batch dropped
  return state;
}

StepResult train_step(TrainerState& state, const Dataset& dataset, ImageStore& images,
                      const std::vector<std::uint32_t>& batch_indices) {
  const TrainConfig& cfg = state.cfg;
  const Index batch = static_cast<Index>(batch_indices.size());
  VALPAT_REQUIRE(batch > 0, "train_step: empty batch");
  VALPAT_REQUIRE(batch <= static_cast<Index>(cfg.queue_capacity),
                 "train_step: batch of ", batch, " exceeds queue capacity ", cfg.queue_capacity);

  const nn::ParamList trainable = state.trainable_params();
  nn::zero_grads(trainable);

  // (1) Augment: two heavy views per image for SSL, one light view for
  // ITC/MAC. The light view feeds both the query and the key tower.
  std::vector<ImageBuffer> heavy1, heavy2, light;
  heavy1.reserve(batch_indices.size());
  heavy2.reserve(batch_indices.size());
  light.reserve(batch_indices.size());
  for (std::uint32_t idx : batch_indices) {
    VALPAT_REQUIRE(idx < dataset.samples.size(), "train_step: sample index ", idx,
                   " out of range");
    const ImageBuffer& img = images.get(dataset.samples[idx].image_ref);
    auto views = augment(img, cfg.heavy_augment, state.rng);
    heavy1.push_back(std::move(views[0]));
    heavy2.push_back(std::move(views[1]));
    light.push_back(std::move(augment(img, cfg.light_augment, state.rng)[0]));
  }

  // Rows (within the batch) that can take part in ITC / MAC.
  std::vector<Index> itc_rows;
  std::vector<Index> mac_positions;  // positions within itc_rows
  for (Index b = 0; b < batch; ++b) {
    const auto& sample = dataset.samples[batch_indices[static_cast<std::size_t>(b)]];
    if (!sample.has_caption()) continue;
    if (sample.attributes.has_value()) mac_positions.push_back(static_cast<Index>(itc_rows.size()));
    itc_rows.push_back(b);
  }
  if ((cfg.toggles.itc || cfg.toggles.mac) && static_cast<Index>(itc_rows.size()) < batch) {
    log_warn("train_step: ", batch - static_cast<Index>(itc_rows.size()),
             " caption-less sample(s) excluded from ITC/MAC");
  }
  if (cfg.toggles.mac) {
    VALPAT_REQUIRE(!mac_positions.empty(),
                   "train_step: MAC enabled but batch has no attribute labels");
  }

  LossBreakdown parts;
  const LossWeights lw = state.loss_weights();

  // (2)-(4) SSL branch: forward, loss against the queue snapshot, backward.
  Matrix ssl_keys;
  if (cfg.toggles.ssl) {
    const Matrix x_query = image_batch_matrix(heavy1);
    const Matrix x_key = image_batch_matrix(heavy2);

    Matrix feat_q = state.image.query.trunk.forward(x_query);
    Matrix pre_q = state.image.query.head_ssl.forward(feat_q);
    Matrix q = l2_normalize_rows<Scalar>(pre_q);

    Matrix feat_k = state.image.key.trunk.forward(x_key);
    ssl_keys = l2_normalize_rows<Scalar>(state.image.key.head_ssl.forward(feat_k));

    const Matrix negatives = state.queue_ssl.snapshot();
    if (negatives.rows() > 0) {
      auto ssl = ssl_contrastive_loss_grad<Scalar>(q, ssl_keys, negatives, lw.tau);
      parts.l_ssl = ssl.value;
      const Matrix dpre = l2_normalize_rows_backward<Scalar>(pre_q, ssl.dq);
      state.image.query.trunk.backward(state.image.query.head_ssl.backward(dpre));
    }
    // An empty queue (the very first step) contributes no loss and no
    // gradient; fictitious random negatives are never fabricated.
  }

  // ITC / MAC branch over the captioned rows.
  const bool need_cross_modal =
      (cfg.toggles.itc || cfg.toggles.mac) && !itc_rows.empty();
  Matrix itc_img_keys, itc_txt_keys;
  if (need_cross_modal) {
    std::vector<ImageBuffer> light_sub;
    std::vector<std::string> caption_sub;
    light_sub.reserve(itc_rows.size());
    for (Index b : itc_rows) {
      light_sub.push_back(light[static_cast<std::size_t>(b)]);
      caption_sub.push_back(
          *dataset.samples[batch_indices[static_cast<std::size_t>(b)]].caption);
    }
    const Matrix x_light = image_batch_matrix(light_sub);
    const IdMatrix ids = tokenize_batch(caption_sub, state.tokenizer);

    // Query forwards (gradients flow).
    Matrix feat_img = state.image.query.trunk.forward(x_light);
    Matrix e_img = state.image.query.head_itc.forward(feat_img);  // pre-normalization
    Matrix q_img = l2_normalize_rows<Scalar>(e_img);
    Matrix feat_txt = state.text.query.trunk.forward(ids);
    Matrix e_txt = state.text.query.head_itc.forward(feat_txt);
    Matrix q_txt = l2_normalize_rows<Scalar>(e_txt);

    // Key forwards (gradient constants).
    Matrix e_img_key, e_txt_key;
    const bool need_keys = cfg.toggles.itc || (cfg.toggles.mac && lw.alpha > 0.0);
    if (need_keys) {
      e_img_key = state.image.key.head_itc.forward(state.image.key.trunk.forward(x_light));
      e_txt_key = state.text.key.head_itc.forward(state.text.key.trunk.forward(ids));
      itc_img_keys = l2_normalize_rows<Scalar>(e_img_key);
      itc_txt_keys = l2_normalize_rows<Scalar>(e_txt_key);
    }

    Matrix de_img = Matrix::Zero(e_img.rows(), e_img.cols());
    Matrix de_txt = Matrix::Zero(e_txt.rows(), e_txt.cols());

    if (cfg.toggles.itc) {
      const Matrix neg_txt = state.queue_itc_txt.snapshot();
      const Matrix neg_img = state.queue_itc_img.snapshot();
      if (neg_txt.rows() > 0 && neg_img.rows() > 0) {
        auto itc = itc_loss_grad<Scalar>(q_img, itc_txt_keys, q_txt, itc_img_keys, neg_txt,
                                         neg_img, lw.tau_prime);
        parts.l_i2t = itc.value.i2t;
        parts.l_t2i = itc.value.t2i;
        de_img += lw.beta * l2_normalize_rows_backward<Scalar>(e_img, itc.dq_img);
        de_txt += lw.beta * l2_normalize_rows_backward<Scalar>(e_txt, itc.dq_txt);
        state.tau_prime.grad(0, 0) += lw.beta * itc.dtau_prime;
      }
    }

    if (cfg.toggles.mac) {
      const Index n_mac = static_cast<Index>(mac_positions.size());
      Matrix emb_mac(2 * n_mac, e_img.cols());
      Matrix labels(n_mac, cfg.num_attributes);
      for (Index i = 0; i < n_mac; ++i) {
        const Index row = mac_positions[static_cast<std::size_t>(i)];
        emb_mac.row(i) = e_img.row(row);
        emb_mac.row(n_mac + i) = e_txt.row(row);
        const auto& bits =
            *dataset
                 .samples[batch_indices[static_cast<std::size_t>(
                     itc_rows[static_cast<std::size_t>(row)])]]
                 .attributes;
        VALPAT_REQUIRE(bits.size() == cfg.num_attributes,
                       "train_step: attribute vector length mismatch");
        labels.row(i) = bits.cast<Scalar>().transpose();
      }

      const Matrix probs = state.classifier.forward(emb_mac, AttributeClassifier::Branch::query);
      const Matrix p_img = probs.topRows(n_mac);
      const Matrix p_txt = probs.bottomRows(n_mac);

      auto hard = mac_hard_loss_grad<Scalar>(p_img, p_txt, labels, state.attribute_weights);
      parts.l_mac_hard = hard.value;
      Matrix dp_img = cfg.gamma * (1.0 - lw.alpha) * hard.dp_img;
      Matrix dp_txt = cfg.gamma * (1.0 - lw.alpha) * hard.dp_txt;

      if (lw.alpha > 0.0) {
        Matrix emb_mac_key(2 * n_mac, e_img.cols());
        for (Index i = 0; i < n_mac; ++i) {
          const Index row = mac_positions[static_cast<std::size_t>(i)];
          emb_mac_key.row(i) = e_img_key.row(row);
          emb_mac_key.row(n_mac + i) = e_txt_key.row(row);
        }
        const Matrix probs_key =
            state.classifier.forward(emb_mac_key, AttributeClassifier::Branch::key);
        const Matrix yhat_img = probs_key.topRows(n_mac);
        const Matrix yhat_txt = probs_key.bottomRows(n_mac);
        auto soft = mac_soft_loss_grad<Scalar>(p_img, p_txt, yhat_img, yhat_txt,
                                               state.attribute_weights);
        parts.l_mac_soft = soft.value;
        dp_img += cfg.gamma * lw.alpha * soft.dp_img;
        dp_txt += cfg.gamma * lw.alpha * soft.dp_txt;
      }

      Matrix dprobs(2 * n_mac, cfg.num_attributes);
      dprobs.topRows(n_mac) = dp_img;
      dprobs.bottomRows(n_mac) = dp_txt;
      const Matrix demb = state.classifier.backward(dprobs);
      for (Index i = 0; i < n_mac; ++i) {
        const Index row = mac_positions[static_cast<std::size_t>(i)];
        de_img.row(row) += demb.row(i);
        de_txt.row(row) += demb.row(n_mac + i);
      }
    }

    state.image.query.trunk.backward(state.image.query.head_itc.backward(de_img));
    state.text.query.trunk.backward(state.text.query.head_itc.backward(de_txt));
  }

  LossBreakdown breakdown = total_loss(parts, lw, {cfg.toggles.ssl, cfg.toggles.itc,
                                                   cfg.toggles.mac});

  // (4) Optimizer step on the query parameters, heads, classifier and tau'.
  nn::clip_global_grad_norm(trainable, cfg.grad_clip);
  const Scalar lr = lr_at_step<Scalar>(state.step, state.steps_per_epoch, cfg.epochs,
                                       cfg.warmup_epochs, cfg.base_lr, cfg.min_lr);
  state.optimizer.step(trainable, lr, cfg.weight_decay);
  clamp_tau_prime(state.tau_prime);

  // (5) Momentum-update every key branch.
  momentum_update(state.image);
  momentum_update(state.text);
  state.classifier.momentum_update_key(cfg.momentum_m);

  // (6) Enqueue this step's keys; the losses above only ever saw older ones.
  if (cfg.toggles.ssl) {
    const Index start = state.queue_ssl.write_ptr();
    const Index capacity = state.queue_ssl.capacity();
    state.queue_ssl.enqueue(ssl_keys);
    for (Index r = 0; r < ssl_keys.rows(); ++r) {
      state.queue_ssl_sources[static_cast<std::size_t>((start + r) % capacity)] =
          static_cast<std::int64_t>(batch_indices[static_cast<std::size_t>(r)]);
    }
  }
  if (cfg.toggles.itc && itc_img_keys.rows() > 0) {
    state.queue_itc_img.enqueue(itc_img_keys);
    state.queue_itc_txt.enqueue(itc_txt_keys);
  }

  state.step += 1;
  return {breakdown, lr};
}

std::string format_log_record(std::uint64_t step, const LossBreakdown& b, Scalar tau_prime,
                              Scalar lr) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer,
                "{\"step\":%llu,\"l_ssl\":%.12e,\"l_i2t\":%.12e,\"l_t2i\":%.12e,"
                "\"l_mac_hard\":%.12e,\"l_mac_soft\":%.12e,\"total\":%.12e,"
                "\"tau_prime\":%.12e,\"lr\":%.12e}",
                static_cast<unsigned long long>(step), b.l_ssl, b.l_i2t, b.l_t2i, b.l_mac_hard,
                b.l_mac_soft, b.total, tau_prime, lr);
  return std::string(buffer);
}

void run_training(TrainerState& state, const Dataset& dataset, ImageStore& images,
                  std::ostream* log, std::uint64_t max_steps,
                  const std::function<void(const TrainerState&, const StepResult&)>& on_step) {
  const TrainConfig& cfg = state.cfg;
  const std::uint64_t total_steps = cfg.epochs * state.steps_per_epoch;
  const std::uint64_t stop = max_steps == 0 ? total_steps : std::min(total_steps, max_steps);

  while (state.step < stop) {
    if (state.step % state.steps_per_epoch == 0) {
      state.epoch_perm = state.rng.permutation(dataset.samples.size());
    }
    const std::uint64_t offset = (state.step % state.steps_per_epoch) * cfg.batch_size;
    std::vector<std::uint32_t> batch(state.epoch_perm.begin() + static_cast<std::ptrdiff_t>(offset),
                                     state.epoch_perm.begin() +
                                         static_cast<std::ptrdiff_t>(offset + cfg.batch_size));
    const std::uint64_t step_logged = state.step;
    const StepResult result = train_step(state, dataset, images, batch);
    if (log != nullptr) {
      (*log) << format_log_record(step_logged, result.breakdown, state.tau_prime_value(),
                                  result.lr)
             << '\n';
    }
    if (on_step) on_step(state, result);
  }
}

Scalar ssl_instance_accuracy(TrainerState& state, const Dataset& dataset, ImageStore& images,
                             std::uint64_t eval_seed) {
  VALPAT_REQUIRE(state.queue_ssl.filled() > 0, "ssl_instance_accuracy: SSL queue is empty");
  Rng rng(eval_seed);
  const Index n = static_cast<Index>(dataset.samples.size());

  std::vector<ImageBuffer> view1, view2;
  view1.reserve(static_cast<std::size_t>(n));
  view2.reserve(static_cast<std::size_t>(n));
  for (const auto& sample : dataset.samples) {
    auto views = augment(images.get(sample.image_ref), state.cfg.heavy_augment, rng);
    view1.push_back(std::move(views[0]));
    view2.push_back(std::move(views[1]));
  }
  const Matrix q = l2_normalize_rows<Scalar>(
      state.image.query.head_ssl.forward(state.image.query.trunk.forward(image_batch_matrix(view1))));
  const Matrix k = l2_normalize_rows<Scalar>(
      state.image.key.head_ssl.forward(state.image.key.trunk.forward(image_batch_matrix(view2))));

  // Oldest-first snapshot rows correspond to the same walk over the source
  // ring that the queue itself performs.
  const Matrix negatives = state.queue_ssl.snapshot();
  const Index filled = state.queue_ssl.filled();
  const Index capacity = state.queue_ssl.capacity();
  const Index oldest = (state.queue_ssl.write_ptr() - filled + 2 * capacity) % capacity;

  Index correct = 0;
  for (Index i = 0; i < n; ++i) {
    const Scalar positive = q.row(i).dot(k.row(i));
    bool ok = true;
    for (Index r = 0; r < filled && ok; ++r) {
      const std::int64_t source =
          state.queue_ssl_sources[static_cast<std::size_t>((oldest + r) % capacity)];
      if (source == static_cast<std::int64_t>(i)) continue;  // stale key of the same instance
      ok = q.row(i).dot(negatives.row(r)) < positive;
    }
    correct += ok ? 1 : 0;
  }
  return static_cast<Scalar>(correct) / static_cast<Scalar>(n);
}

}  // namespace valpat
