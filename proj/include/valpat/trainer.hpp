#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "valpat/config.hpp"
#include "valpat/encoders.hpp"
#include "valpat/image_io.hpp"
#include "valpat/losses.hpp"
#include "valpat/manifest.hpp"
#include "valpat/memory.hpp"
#include "valpat/optim.hpp"
#include "valpat/schedule.hpp"
#include "valpat/tokenizer.hpp"

namespace valpat {

/// Full mutable training state: the two momentum encoder pairs, the
/// attribute classifier pair, the three negative queues, optimizer moments,
/// RNG and step bookkeeping. One train_step is the unit of serialization:
/// parameter update, momentum update and queue mutation all happen on this
/// single logical writer.
struct TrainerState {
  TrainConfig cfg;
  Tokenizer tokenizer;
  Vector attribute_weights;  // w_j, length M; empty when MAC is disabled

  EncoderPair<ImageModel> image;
  EncoderPair<TextModel> text;
  AttributeClassifier classifier;
  nn::Param tau_prime;  // 1x1 trainable scalar, clamped after each step

  NegativeQueue<Scalar> queue_ssl;
  NegativeQueue<Scalar> queue_itc_img;
  NegativeQueue<Scalar> queue_itc_txt;
  /// Dataset index that produced each SSL queue slot (diagnostics only).
  std::vector<std::int64_t> queue_ssl_sources;

  AdamW optimizer;
  Rng rng;
  std::uint64_t step{0};
  std::uint64_t steps_per_epoch{1};
  std::vector<std::uint32_t> epoch_perm;

  Scalar tau_prime_value() const { return tau_prime.value(0, 0); }
  LossWeights loss_weights() const;

  /// Fixed order: image.query, text.query, classifier query branch, tau'.
  nn::ParamList trainable_params();
  /// image.key then text.key, same structural order as their query twins.
  nn::ParamList key_param_list();
};

struct StepResult {
  LossBreakdown breakdown;
  Scalar lr{0};
};

/// Fresh state: tokenizer built from the dataset captions, encoders randomly
/// initialized from cfg.seed, key branches synced to the query branches,
/// queues empty.
TrainerState init_trainer(const TrainConfig& cfg, const Dataset& dataset);

/// State with models constructed but no dataset bound; checkpoint loading
/// overwrites every tensor afterwards.
TrainerState build_trainer_skeleton(const TrainConfig& cfg, Tokenizer tokenizer,
                                    Vector attribute_weights);

/// One optimization step over the given sample indices. Order: augment,
/// query/key forwards, losses against queue snapshots, backward + optimizer
/// step + tau' clamp, momentum updates, queue enqueues (so a step's
/// positives are never among its own negatives).
StepResult train_step(TrainerState& state, const Dataset& dataset, ImageStore& images,
                      const std::vector<std::uint32_t>& batch_indices);

/// Deterministic, byte-stable training-log line (one JSON record).
std::string format_log_record(std::uint64_t step, const LossBreakdown& breakdown,
                              Scalar tau_prime, Scalar lr);

/// Epoch-shuffled training loop; writes one log record per step to `log`
/// when non-null. max_steps == 0 runs the full cfg.epochs schedule.
void run_training(TrainerState& state, const Dataset& dataset, ImageStore& images,
                  std::ostream* log, std::uint64_t max_steps = 0,
                  const std::function<void(const TrainerState&, const StepResult&)>& on_step = {});

/// Fraction of dataset samples whose fresh positive key similarity exceeds
/// the similarity to every SSL-queue row that came from a different sample.
Scalar ssl_instance_accuracy(TrainerState& state, const Dataset& dataset, ImageStore& images,
                             std::uint64_t eval_seed);

// ---------------------------------------------------------------------------
// Checkpointing: single binary file, versioned header, then length-prefixed
// named tensors plus queue/optimizer/RNG payloads. Save/load round-trips
// reproduce bit-identical subsequent training given the same data order.

void save_checkpoint(TrainerState& state, const std::string& path);
TrainerState load_checkpoint(const std::string& path, const TrainConfig& cfg);

/// Header introspection without constructing models.
struct CheckpointInfo {
  std::uint32_t format_version{0};
  std::uint64_t config_hash{0};
  std::uint64_t step{0};
  Scalar tau_prime{0};
  std::vector<std::pair<std::string, std::pair<Index, Index>>> tensors;
};
CheckpointInfo inspect_checkpoint(const std::string& path);

}  // namespace valpat
