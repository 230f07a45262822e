#pragma once

#include <cstdint>
#include <string>

#include "valpat/augment.hpp"
#include "valpat/common.hpp"
#include "valpat/encoders.hpp"

namespace valpat {

struct Toggles {
  bool ssl{true};
  bool itc{true};
  bool mac{true};
  bool mac_soft{true};

  bool operator==(const Toggles&) const = default;
};

struct TokenizerConfig {
  int max_length{64};
  int max_vocab{1 << 16};

  bool operator==(const TokenizerConfig&) const = default;
};

/// Full training configuration. Default values mirror the full-scale
/// pre-training recipe; desk_profile() shrinks everything so a run completes
/// in minutes on a CPU.
struct TrainConfig {
  std::uint64_t epochs{140};
  std::uint64_t batch_size{2048};
  Scalar base_lr{1e-3};
  std::uint64_t warmup_epochs{7};
  Scalar min_lr{1e-6};
  Scalar weight_decay{0.1};
  Scalar grad_clip{5.0};

  std::uint64_t queue_capacity{65536};  // K
  Index num_attributes{1359};           // M
  Index embed_dim{128};                 // D
  Index head_hidden{0};                 // 0 = linear projection heads

  Scalar alpha{0.2};
  Scalar beta{0.5};
  Scalar gamma{0.01};
  Scalar tau{0.07};
  Scalar tau_prime_init{0.07};
  Scalar momentum_m{0.999};

  Toggles toggles;
  std::uint64_t seed{0};

  ImageEncoderConfig image_encoder{256, 128, 3, {64, 128, 256, 512}, 3, 2};
  TextEncoderConfig text_encoder{12, 8, 512, 64, 0, 4};
  TokenizerConfig tokenizer;
  AugmentationPolicy heavy_augment{};
  AugmentationPolicy light_augment{AugmentationKind::light_itc};

  static TrainConfig full_scale() { return TrainConfig{}; }
  static TrainConfig desk_profile();

  void validate() const;
  std::uint64_t hash() const;

  bool operator==(const TrainConfig&) const = default;
};

/// Flat "key = value" configuration text with '#' comments; nested sections
/// use dotted keys (encoder.image.*, encoder.text.*, tokenizer.*,
/// augment.*, toggles.*). Unknown keys are an error. Parsing starts from the
/// desk profile so a config file only has to name what it overrides.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config(const std::string& path);
std::string serialize_config(const TrainConfig& config);
void save_config(const std::string& path, const TrainConfig& config);

}  // namespace valpat
