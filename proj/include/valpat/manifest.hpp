#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "valpat/common.hpp"
#include "valpat/vocabulary.hpp"

namespace valpat {

/// One image with its caption and mined attribute annotations. Samples
/// without a usable caption are admitted and take part only in the
/// self-supervised objective.
struct CaptionedSample {
  std::string image_ref;
  std::optional<std::string> caption;
  /// Attribute indices as listed in the manifest (sorted, deduplicated).
  std::optional<std::vector<int>> attribute_indices;
  /// Multi-hot expansion of attribute_indices, length M; present only when
  /// the dataset carries a vocabulary.
  std::optional<Eigen::VectorXi> attributes;
  std::optional<std::int64_t> person_id;
  std::optional<std::int64_t> camera_id;

  bool has_caption() const;

  bool operator==(const CaptionedSample& other) const;
};

struct Dataset {
  std::vector<CaptionedSample> samples;
  std::optional<AttributeVocabulary> vocabulary;

  bool operator==(const Dataset& other) const;
};

enum class MetricTask { reid, attributes, text_search };

std::string_view to_string(MetricTask task);

/// Named metric values, each constrained to [0, 1].
struct MetricReport {
  MetricTask task{MetricTask::reid};
  std::map<std::string, Scalar> values;

  void set(const std::string& name, Scalar value);
};

struct Diagnostic {
  std::size_t sample_index{0};
  std::string message;
};

/// Line-delimited manifest: one JSON object per line with keys image_ref
/// (required), caption, attributes (vocabulary indices), person_id,
/// camera_id. Unknown keys are ignored with a warning. When a vocabulary is
/// supplied, attribute index lists are validated against M and expanded to
/// multi-hot vectors.
Dataset load_manifest(const std::string& path);
Dataset load_manifest(const std::string& path, const AttributeVocabulary& vocab);

void save_manifest(const std::string& path, const Dataset& dataset);

/// One diagnostic per invariant violation; empty means the dataset is valid.
std::vector<Diagnostic> validate_dataset(const Dataset& dataset);

/// Builds the top-M attribute vocabulary from the dataset captions and fills
/// in every captioned sample's attribute annotations.
void mine_dataset_attributes(Dataset& dataset, Index m, const TaggerLexicon& lexicon);

}  // namespace valpat
