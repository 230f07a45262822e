#include "valpat/augment.hpp"

#include <algorithm>
#include <cmath>

namespace valpat {

ImageBuffer hflip(const ImageBuffer& image) {
  ImageBuffer out(image.height, image.width, image.channels);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
  return out;
}

ImageBuffer normalize_image(const ImageBuffer& image, const std::array<Scalar, 3>& mean,
                            const std::array<Scalar, 3>& stddev) {
  VALPAT_REQUIRE(image.channels <= 3, "normalize_image: more channels than normalization stats");
  ImageBuffer out = image;
  for (int c = 0; c < image.channels; ++c) {
    VALPAT_REQUIRE(stddev[static_cast<std::size_t>(c)] > 0, "normalize_image: stddev must be > 0");
    const Index plane = static_cast<Index>(image.height) * image.width;
    out.data.segment(static_cast<Index>(c) * plane, plane) =
        (image.data.segment(static_cast<Index>(c) * plane, plane).array() -
         mean[static_cast<std::size_t>(c)]) /
        stddev[static_cast<std::size_t>(c)];
  }
  return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& image, int out_h, int out_w) {
  ImageBuffer out(out_h, out_w, image.channels);
  const Scalar sy = out_h > 1 ? static_cast<Scalar>(image.height - 1) / (out_h - 1) : 0.0;
  const Scalar sx = out_w > 1 ? static_cast<Scalar>(image.width - 1) / (out_w - 1) : 0.0;
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < out_h; ++y) {
      const Scalar fy = y * sy;
      const int y0 = static_cast<int>(std::floor(fy));
      const int y1 = std::min(y0 + 1, image.height - 1);
      const Scalar wy = fy - y0;
      for (int x = 0; x < out_w; ++x) {
        const Scalar fx = x * sx;
        const int x0 = static_cast<int>(std::floor(fx));
        const int x1 = std::min(x0 + 1, image.width - 1);
        const Scalar wx = fx - x0;
        out.at(c, y, x) = (1 - wy) * ((1 - wx) * image.at(c, y0, x0) + wx * image.at(c, y0, x1)) +
                          wy * ((1 - wx) * image.at(c, y1, x0) + wx * image.at(c, y1, x1));
      }
    }
  }
  return out;
}

namespace {

ImageBuffer random_resized_crop(const ImageBuffer& image, const AugmentationPolicy& policy,
                                Rng& rng) {
  const Scalar scale = rng.uniform(policy.crop_scale_min, policy.crop_scale_max);
  const Scalar base_aspect = static_cast<Scalar>(image.width) / image.height;
  const Scalar aspect =
      base_aspect * rng.uniform(1.0 - policy.aspect_jitter, 1.0 + policy.aspect_jitter);

  const Scalar area = scale * image.height * image.width;
  int crop_w = std::clamp(static_cast<int>(std::round(std::sqrt(area * aspect))), 1, image.width);
  int crop_h = std::clamp(static_cast<int>(std::round(std::sqrt(area / aspect))), 1, image.height);
  const int y0 = static_cast<int>(rng.uniform_int(0, image.height - crop_h));
  const int x0 = static_cast<int>(rng.uniform_int(0, image.width - crop_w));

  ImageBuffer crop(crop_h, crop_w, image.channels);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < crop_h; ++y)
      for (int x = 0; x < crop_w; ++x) crop.at(c, y, x) = image.at(c, y0 + y, x0 + x);
  return resize_bilinear(crop, image.height, image.width);
}

ImageBuffer color_jitter(const ImageBuffer& image, Scalar strength, Rng& rng) {
  const Scalar brightness = rng.uniform(1.0 - strength, 1.0 + strength);
  const Scalar contrast = rng.uniform(1.0 - strength, 1.0 + strength);
  const Scalar saturation = rng.uniform(1.0 - strength, 1.0 + strength);

  ImageBuffer out = image;
  out.data *= brightness;
  const Scalar mean = out.data.mean();
  out.data = mean + contrast * (out.data.array() - mean);

  if (image.channels == 3) {
    const Index plane = static_cast<Index>(image.height) * image.width;
    Vector gray = (out.data.segment(0, plane) + out.data.segment(plane, plane) +
                   out.data.segment(2 * plane, plane)) /
                  3.0;
    for (int c = 0; c < 3; ++c) {
      auto channel = out.data.segment(static_cast<Index>(c) * plane, plane);
      channel = gray + saturation * (channel - gray);
    }
  }
  out.data = out.data.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

ImageBuffer to_grayscale(const ImageBuffer& image) {
  if (image.channels != 3) return image;
  ImageBuffer out = image;
  const Index plane = static_cast<Index>(image.height) * image.width;
  const Vector gray = (image.data.segment(0, plane) + image.data.segment(plane, plane) +
                       image.data.segment(2 * plane, plane)) /
                      3.0;
  for (int c = 0; c < 3; ++c) out.data.segment(static_cast<Index>(c) * plane, plane) = gray;
  return out;
}

ImageBuffer heavy_view(const ImageBuffer& image, const AugmentationPolicy& policy, Rng& rng) {
  ImageBuffer view = random_resized_crop(image, policy, rng);
  if (rng.bernoulli(policy.flip_prob)) view = hflip(view);
  if (rng.bernoulli(policy.jitter_prob)) view = color_jitter(view, policy.jitter_strength, rng);
  if (rng.bernoulli(policy.grayscale_prob)) view = to_grayscale(view);
  return normalize_image(view, policy.mean, policy.stddev);
}

}  // namespace

std::vector<ImageBuffer> augment(const ImageBuffer& image, const AugmentationPolicy& policy,
                                 Rng& rng) {
  VALPAT_REQUIRE(image.data.size() > 0, "augment: empty image");
  VALPAT_REQUIRE(image.data.minCoeff() >= 0.0 && image.data.maxCoeff() <= 1.0,
                 "augment: pixels outside [0,1]");
  if (policy.kind == AugmentationKind::light_itc) {
    ImageBuffer view = rng.bernoulli(policy.flip_prob) ? hflip(image) : image;
    return {normalize_image(view, policy.mean, policy.stddev)};
  }
  std::vector<ImageBuffer> views;
  views.push_back(heavy_view(image, policy, rng));
  views.push_back(heavy_view(image, policy, rng));
  return views;
}

ImageBuffer preprocess_eval(const ImageBuffer& image, const AugmentationPolicy& policy) {
  return normalize_image(image, policy.mean, policy.stddev);
}

}  // namespace valpat
