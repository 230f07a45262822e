#pragma once

#include <array>
#include <vector>

#include "valpat/common.hpp"
#include "valpat/image_io.hpp"

namespace valpat {

enum class AugmentationKind { heavy_ssl, light_itc };

/// Two augmentation families: the heavy policy (random resized crop, flip,
/// color jitter, grayscale) feeds the instance-contrast branch with two
/// independent views; the light policy is exactly horizontal flip (p=0.5)
/// plus normalization.
struct AugmentationPolicy {
  AugmentationKind kind{AugmentationKind::heavy_ssl};
  Scalar crop_scale_min{0.4};
  Scalar crop_scale_max{1.0};
  Scalar aspect_jitter{0.25};  // relative aspect deviation for the crop
  Scalar flip_prob{0.5};
  Scalar jitter_prob{0.8};
  Scalar jitter_strength{0.4};
  Scalar grayscale_prob{0.2};
  std::array<Scalar, 3> mean{0.5, 0.5, 0.5};
  std::array<Scalar, 3> stddev{0.5, 0.5, 0.5};

  bool operator==(const AugmentationPolicy&) const = default;
};

ImageBuffer hflip(const ImageBuffer& image);
ImageBuffer normalize_image(const ImageBuffer& image, const std::array<Scalar, 3>& mean,
                            const std::array<Scalar, 3>& stddev);
ImageBuffer resize_bilinear(const ImageBuffer& image, int out_h, int out_w);

/// heavy_ssl returns two independent stochastic views, light_itc one view;
/// all randomness is drawn from rng, so a fixed state reproduces the views.
std::vector<ImageBuffer> augment(const ImageBuffer& image, const AugmentationPolicy& policy,
                                 Rng& rng);

/// Deterministic evaluation preprocessing: normalization only.
ImageBuffer preprocess_eval(const ImageBuffer& image, const AugmentationPolicy& policy);

}  // namespace valpat
