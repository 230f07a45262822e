#include "valpat/synthetic.hpp"

#include <array>
#include <set>

namespace valpat {

namespace {

struct Color {
  const char* name;
  Scalar r, g, b;
};

constexpr std::array<Color, 8> kPalette = {{
    {"red", 0.90, 0.10, 0.10},
    {"blue", 0.10, 0.15, 0.90},
    {"green", 0.10, 0.70, 0.15},
    {"yellow", 0.95, 0.90, 0.10},
    {"black", 0.05, 0.05, 0.05},
    {"white", 0.95, 0.95, 0.95},
    {"orange", 0.95, 0.55, 0.05},
    {"purple", 0.55, 0.10, 0.75},
}};

constexpr std::array<const char*, 2> kGarments = {"shirt", "jacket"};
constexpr std::array<const char*, 3> kAccessories = {"hat", "bag", "shoes"};

struct CardSpec {
  int gender;           // 0 = man, 1 = woman
  int garment;          // 0 = shirt, 1 = jacket
  int torso_color;
  int legs_color;
  int accessory;        // 0 = hat, 1 = bag, 2 = shoes
  int accessory_color;

  auto key() const {
    return std::tuple(gender, garment, torso_color, legs_color, accessory, accessory_color);
  }
};

void fill_rect(ImageBuffer& img, int y0, int y1, int x0, int x1, const Color& color) {
  y0 = std::max(0, y0);
  x0 = std::max(0, x0);
  y1 = std::min(img.height, y1);
  x1 = std::min(img.width, x1);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      img.at(0, y, x) = color.r;
      img.at(1, y, x) = color.g;
      img.at(2, y, x) = color.b;
    }
  }
}

ImageBuffer render_card(const CardSpec& card, int height, int width) {
  ImageBuffer img(height, width, 3);
  const auto sy = [&](Scalar f) { return static_cast<int>(f * height); };
  const auto sx = [&](Scalar f) { return static_cast<int>(f * width); };

  fill_rect(img, 0, height, 0, width, {"bg", 0.78, 0.78, 0.80});

  const Color skin{"skin", 0.92, 0.76, 0.62};
  const Color hair{"hair", 0.25, 0.15, 0.08};
  fill_rect(img, sy(0.06), sy(0.20), sx(0.38), sx(0.62), skin);
  if (card.gender == 0) {
    fill_rect(img, sy(0.04), sy(0.09), sx(0.38), sx(0.62), hair);
  } else {
    fill_rect(img, sy(0.04), sy(0.30), sx(0.28), sx(0.38), hair);
    fill_rect(img, sy(0.04), sy(0.30), sx(0.62), sx(0.72), hair);
    fill_rect(img, sy(0.04), sy(0.09), sx(0.38), sx(0.62), hair);
  }

  const Color& torso = kPalette[static_cast<std::size_t>(card.torso_color)];
  fill_rect(img, sy(0.22), sy(0.55), sx(0.25), sx(0.75), torso);
  if (card.garment == 1) {  // jacket adds sleeves
    fill_rect(img, sy(0.22), sy(0.52), sx(0.10), sx(0.25), torso);
    fill_rect(img, sy(0.22), sy(0.52), sx(0.75), sx(0.90), torso);
  }

  const Color& legs = kPalette[static_cast<std::size_t>(card.legs_color)];
  fill_rect(img, sy(0.55), sy(0.88), sx(0.30), sx(0.48), legs);
  fill_rect(img, sy(0.55), sy(0.88), sx(0.52), sx(0.70), legs);

  const Color& acc = kPalette[static_cast<std::size_t>(card.accessory_color)];
  switch (card.accessory) {
    case 0:  // hat
      fill_rect(img, sy(0.00), sy(0.06), sx(0.30), sx(0.70), acc);
      break;
    case 1:  // bag
      fill_rect(img, sy(0.40), sy(0.58), sx(0.82), sx(1.00), acc);
      break;
    default:  // shoes
      fill_rect(img, sy(0.88), sy(0.97), sx(0.24), sx(0.48), acc);
      fill_rect(img, sy(0.88), sy(0.97), sx(0.52), sx(0.76), acc);
      break;
  }
  return img;
}

std::string card_caption(const CardSpec& card) {
  const char* who = card.gender == 0 ? "man" : "woman";
  const char* garment = kGarments[static_cast<std::size_t>(card.garment)];
  const char* accessory = kAccessories[static_cast<std::size_t>(card.accessory)];
  const char* torso = kPalette[static_cast<std::size_t>(card.torso_color)].name;
  const char* legs = kPalette[static_cast<std::size_t>(card.legs_color)].name;
  const char* acc = kPalette[static_cast<std::size_t>(card.accessory_color)].name;
  return cat("a ", who, " wearing a ", torso, " ", garment, " and ", legs, " pants and ", acc,
             " ", accessory);
}

}  // namespace

SyntheticData make_pedestrian_cards(const SyntheticOptions& options) {
  VALPAT_REQUIRE(options.num_cards >= 1, "make_pedestrian_cards: need at least one card");
  VALPAT_REQUIRE(options.views_per_card >= 1, "make_pedestrian_cards: views_per_card must be >= 1");
  VALPAT_REQUIRE(options.height >= 16 && options.width >= 8,
                 "make_pedestrian_cards: card size too small to draw");

  Rng rng(options.seed);
  std::set<std::tuple<int, int, int, int, int, int>> used;
  std::vector<CardSpec> cards;
  cards.reserve(static_cast<std::size_t>(options.num_cards));
  while (static_cast<int>(cards.size()) < options.num_cards) {
    CardSpec card{
        static_cast<int>(rng.uniform_int(0, 1)),
        static_cast<int>(rng.uniform_int(0, 1)),
        static_cast<int>(rng.uniform_int(0, 7)),
        static_cast<int>(rng.uniform_int(0, 7)),
        static_cast<int>(rng.uniform_int(0, 2)),
        static_cast<int>(rng.uniform_int(0, 7)),
    };
    if (!used.insert(card.key()).second) continue;
    cards.push_back(card);
  }

  SyntheticData data;
  for (std::size_t c = 0; c < cards.size(); ++c) {
    const ImageBuffer base = render_card(cards[c], options.height, options.width);
    const std::string caption = card_caption(cards[c]);
    for (int v = 0; v < options.views_per_card; ++v) {
      ImageBuffer view = base;
      if (v > 0) {
        // another camera: mirrored and slightly dimmed
        for (int ch = 0; ch < view.channels; ++ch)
          for (int y = 0; y < view.height; ++y)
            for (int x = 0; x < view.width; ++x)
              view.at(ch, y, x) = 0.92 * base.at(ch, y, view.width - 1 - x);
      }
      CaptionedSample sample;
      sample.image_ref = cat("card_", c, "_v", v, ".vimg");
      sample.caption = caption;
      sample.person_id = static_cast<std::int64_t>(c);
      sample.camera_id = v;
      data.dataset.samples.push_back(std::move(sample));
      data.images.push_back(std::move(view));
    }
  }
  return data;
}

std::string write_synthetic_dataset(const std::string& dir, const SyntheticData& data,
                                    const std::string& manifest_name) {
  VALPAT_REQUIRE(data.dataset.samples.size() == data.images.size(),
                 "write_synthetic_dataset: samples/images misaligned");
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    save_image_tensor(dir + "/" + data.dataset.samples[i].image_ref, data.images[i]);
  }
  const std::string manifest_path = dir + "/" + manifest_name;
  save_manifest(manifest_path, data.dataset);
  return manifest_path;
}

}  // namespace valpat
