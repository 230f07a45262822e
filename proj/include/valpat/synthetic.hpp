#pragma once

#include <string>
#include <vector>

#include "valpat/image_io.hpp"
#include "valpat/manifest.hpp"

namespace valpat {

/// Procedural "pedestrian card" generator: colored torso/legs blocks over a
/// plain background with an optional visible accessory, plus a template
/// caption naming exactly what is drawn. The mined vocabulary of such a
/// corpus has 16 distinct noun/adjective tokens (man, woman, shirt, jacket,
/// pants, hat, bag, shoes and eight colors).
struct SyntheticOptions {
  int num_cards{32};
  int height{64};
  int width{32};
  /// Camera views per identity. Views beyond the first are mirrored and
  /// slightly dimmed; every view keeps the card's caption.
  int views_per_card{1};
  std::uint64_t seed{1};
};

struct SyntheticData {
  Dataset dataset;                  // samples in card-major, view-minor order
  std::vector<ImageBuffer> images;  // aligned with dataset.samples
};

/// All cards are pairwise distinct in (gender, garment, torso color, legs
/// color, accessory, accessory color).
SyntheticData make_pedestrian_cards(const SyntheticOptions& options);

/// Writes card_###.vimg files plus a manifest into `dir` (which must exist);
/// returns the manifest path.
std::string write_synthetic_dataset(const std::string& dir, const SyntheticData& data,
                                    const std::string& manifest_name = "manifest.jsonl");

}  // namespace valpat
