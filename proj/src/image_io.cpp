#include "valpat/image_io.hpp"

#include <fstream>

#include "valpat/serialize.hpp"

namespace valpat {

namespace {
constexpr char kMagic[4] = {'V', 'I', 'M', 'G'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_image_tensor(const std::string& path, const ImageBuffer& image) {
  VALPAT_REQUIRE(image.height > 0 && image.width > 0 && image.channels > 0,
                 "save_image_tensor: empty image");
  std::ofstream out(path, std::ios::binary);
  VALPAT_REQUIRE(out.good(), "cannot open '", path, "' for writing");
  BinaryWriter w(out);
  w.write_bytes(kMagic, sizeof kMagic);
  w.write_u32(kVersion);
  w.write_u32(static_cast<std::uint32_t>(image.height));
  w.write_u32(static_cast<std::uint32_t>(image.width));
  w.write_u32(static_cast<std::uint32_t>(image.channels));
  for (Index i = 0; i < image.data.size(); ++i) w.write_f32(static_cast<float>(image.data[i]));
}

ImageBuffer load_image_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  VALPAT_REQUIRE(in.good(), "cannot open image tensor '", path, "'");
  BinaryReader r(in, cat("image tensor '", path, "'"));
  char magic[4];
  r.read_bytes(magic, sizeof magic);
  VALPAT_REQUIRE(std::equal(magic, magic + 4, kMagic), "'", path, "' is not an image tensor file");
  const std::uint32_t version = r.read_u32();
  VALPAT_REQUIRE(version == kVersion, "image tensor '", path, "': unsupported version ", version,
                 ", expected ", kVersion);
  const int h = static_cast<int>(r.read_u32());
  const int w = static_cast<int>(r.read_u32());
  const int c = static_cast<int>(r.read_u32());
  VALPAT_REQUIRE(h > 0 && w > 0 && c > 0 && static_cast<std::int64_t>(h) * w * c < (1ll << 30),
                 "image tensor '", path, "': bad dimensions");
  ImageBuffer image(h, w, c);
  for (Index i = 0; i < image.data.size(); ++i) {
    const float v = r.read_f32();
    VALPAT_REQUIRE(v >= 0.0f && v <= 1.0f, "image tensor '", path, "': pixel ", i,
                   " out of [0,1]: ", v);
    image.data[i] = static_cast<Scalar>(v);
  }
  return image;
}

ImageStore::ImageStore(std::string base_dir) : base_dir_(std::move(base_dir)) {
  decoders_[".vimg"] = [](const std::string& path) { return load_image_tensor(path); };
}

void ImageStore::register_decoder(const std::string& extension, Decoder decoder) {
  decoders_[extension] = std::move(decoder);
}

std::string ImageStore::resolve(const std::string& image_ref) const {
  if (!image_ref.empty() && image_ref.front() == '/') return image_ref;
  if (base_dir_.empty() || base_dir_ == ".") return image_ref;
  return base_dir_ + "/" + image_ref;
}

const ImageBuffer& ImageStore::get(const std::string& image_ref) {
  auto found = cache_.find(image_ref);
  if (found != cache_.end()) return found->second;

  const auto dot = image_ref.find_last_of('.');
  VALPAT_REQUIRE(dot != std::string::npos, "image_ref '", image_ref, "' has no extension");
  const std::string ext = image_ref.substr(dot);
  auto decoder = decoders_.find(ext);
  VALPAT_REQUIRE(decoder != decoders_.end(), "no image decoder registered for '", ext, "'");
  ImageBuffer image = decoder->second(resolve(image_ref));
  return cache_.emplace(image_ref, std::move(image)).first->second;
}

}  // namespace valpat
