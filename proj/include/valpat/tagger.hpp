#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "valpat/common.hpp"

namespace valpat {

enum class PosTag {
  noun,
  verb,
  adjective,
  adverb,
  determiner,
  pronoun,
  preposition,
  conjunction,
  numeral,
  other,
};

std::string_view to_string(PosTag tag);
PosTag pos_tag_from_string(std::string_view name);

/// Deterministic lexicon tagger: exact word lookup, then ordered suffix
/// rules, then the default tag. Lookup is total by construction.
struct TaggerLexicon {
  std::unordered_map<std::string, PosTag> word_tags;
  std::vector<std::pair<std::string, PosTag>> suffix_rules;
  PosTag default_tag{PosTag::noun};

  PosTag lookup(const std::string& token) const;
};

/// Lexicon covering the pedestrian-caption vocabulary (clothing, colors,
/// common verbs and function words, inflected forms included).
const TaggerLexicon& builtin_lexicon();

struct TaggedToken {
  std::string token;
  PosTag tag;

  bool operator==(const TaggedToken&) const = default;
};

/// Lowercases, strips leading/trailing punctuation, splits on whitespace and
/// tags every surviving token. Rejects captions that are empty after
/// stripping.
std::vector<TaggedToken> tag_caption(const std::string& caption, const TaggerLexicon& lexicon);

/// Pre-tagged caption files: one line per caption, space-separated
/// "token/tag" pairs. Used to feed output of an external tagger through the
/// same mining pipeline.
std::vector<std::vector<TaggedToken>> load_tagged_captions(const std::string& path);
void save_tagged_captions(const std::string& path,
                          const std::vector<std::vector<TaggedToken>>& captions);

}  // namespace valpat
