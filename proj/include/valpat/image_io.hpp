#pragma once

#include <functional>
#include <string>
#include <unordered_map>

#include "valpat/common.hpp"

namespace valpat {

/// One decoded image, channel-major (CHW), pixel values in [0, 1].
struct ImageBuffer {
  int height{0};
  int width{0};
  int channels{0};
  Vector data;  // channels * height * width entries, CHW order

  ImageBuffer() = default;
  ImageBuffer(int h, int w, int c)
      : height(h), width(w), channels(c), data(Vector::Zero(static_cast<Index>(h) * w * c)) {}

  Scalar& at(int c, int y, int x) {
    return data[(static_cast<Index>(c) * height + y) * width + x];
  }
  Scalar at(int c, int y, int x) const {
    return data[(static_cast<Index>(c) * height + y) * width + x];
  }
  Index size() const { return data.size(); }
};

/// Raw pixel-tensor file (.vimg): "VIMG" magic, u32 version, u32 h/w/c,
/// then h*w*c float32 samples in CHW order. This is the reference image
/// backend; decoders for other formats can be registered on an ImageStore.
void save_image_tensor(const std::string& path, const ImageBuffer& image);
ImageBuffer load_image_tensor(const std::string& path);

/// Resolves manifest image_refs (relative to the manifest directory), decodes
/// them once and caches the result. The decoder used is chosen by file
/// extension; ".vimg" is built in.
class ImageStore {
 public:
  using Decoder = std::function<ImageBuffer(const std::string&)>;

  explicit ImageStore(std::string base_dir = ".");

  void register_decoder(const std::string& extension, Decoder decoder);

  const ImageBuffer& get(const std::string& image_ref);

  std::string resolve(const std::string& image_ref) const;

 private:
  std::string base_dir_;
  std::unordered_map<std::string, Decoder> decoders_;
  std::unordered_map<std::string, ImageBuffer> cache_;
};

}  // namespace valpat
