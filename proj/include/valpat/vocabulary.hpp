#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "valpat/common.hpp"
#include "valpat/tagger.hpp"

namespace valpat {

struct AttributeEntry {
  std::string token;
  PosTag pos{PosTag::noun};  // noun or adjective only
  std::uint64_t frequency{0};

  bool operator==(const AttributeEntry&) const = default;
};

/// The top-M mined attribute tokens, ordered by descending corpus frequency
/// with lexicographic tie-break, plus their imbalance weights.
struct AttributeVocabulary {
  std::vector<AttributeEntry> entries;
  Vector weights;  // length M, all > 0

  Index size() const { return static_cast<Index>(entries.size()); }

  /// -1 when the token is not in the vocabulary.
  int index_of(const std::string& token) const;

  bool operator==(const AttributeVocabulary& other) const {
    return entries == other.entries && weights.size() == other.weights.size() &&
           weights == other.weights;
  }

 private:
  mutable std::unordered_map<std::string, int> index_;
  mutable bool index_built_{false};
};

/// Normalized inverse-square-root prevalence weights:
/// u_j = sqrt(1 / max(r_j, eps)), w_j = clip(u_j / mean(u), lo, hi).
template <class S>
VectorX<S> imbalance_weights(const VectorX<S>& prevalence, S eps = S(1e-4), S lo = S(0.1),
                             S hi = S(10)) {
  VALPAT_REQUIRE(prevalence.size() > 0, "imbalance_weights: empty prevalence vector");
  VectorX<S> raw(prevalence.size());
  for (Index j = 0; j < prevalence.size(); ++j) {
    VALPAT_REQUIRE(prevalence[j] >= S(0) && prevalence[j] <= S(1),
                   "imbalance_weights: prevalence ", j, " out of [0,1]");
    raw[j] = std::sqrt(S(1) / std::max(prevalence[j], eps));
  }
  const S mean = raw.mean();
  return raw.unaryExpr([&](S u) { return std::clamp(u / mean, lo, hi); });
}

/// Mine the vocabulary from tagged captions: nouns/adjectives counted once
/// per occurrence, top-M retained, weights computed from the corpus labels.
AttributeVocabulary build_vocabulary_tagged(const std::vector<std::vector<TaggedToken>>& corpus,
                                            Index m);
AttributeVocabulary build_vocabulary(const std::vector<std::string>& corpus, Index m,
                                     const TaggerLexicon& lexicon);

/// Multi-hot presence vector over the vocabulary (presence, not count).
Eigen::VectorXi label_sample_tagged(const std::vector<TaggedToken>& tagged,
                                    const AttributeVocabulary& vocab);
Eigen::VectorXi label_sample(const std::string& caption, const AttributeVocabulary& vocab,
                             const TaggerLexicon& lexicon);

/// Per-attribute weights from a set of multi-hot label vectors; r_j is the
/// positive prevalence of bit j.
Vector compute_attribute_weights(const std::vector<Eigen::VectorXi>& labels);

/// Line-delimited "token<TAB>pos<TAB>frequency<TAB>weight", in vocabulary
/// order.
void save_vocabulary(const std::string& path, const AttributeVocabulary& vocab);
AttributeVocabulary load_vocabulary(const std::string& path);

}  // namespace valpat
