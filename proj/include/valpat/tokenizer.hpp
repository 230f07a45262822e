#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "valpat/common.hpp"

namespace valpat {

/// Word-level tokenizer with reserved pad/unk/bos/eos ids. Every encoded
/// sequence has exactly max_length ids.
struct Tokenizer {
  static constexpr int pad_id = 0;
  static constexpr int unk_id = 1;
  static constexpr int bos_id = 2;
  static constexpr int eos_id = 3;
  static constexpr int first_word_id = 4;

  std::unordered_map<std::string, int> vocab;  // word -> id, ids >= first_word_id
  std::vector<std::string> id_to_token;        // aligned with ids >= first_word_id
  int max_length{64};

  /// Total id count including the four reserved ids.
  int vocab_size() const { return first_word_id + static_cast<int>(id_to_token.size()); }
};

/// Builds the word vocabulary from the corpus: lowercase, whitespace-split,
/// ranked by descending frequency with lexicographic tie-break, capped at
/// max_vocab words.
Tokenizer build_tokenizer(const std::vector<std::string>& corpus, int max_length,
                          int max_vocab = 1 << 16);

/// bos + word ids + eos, padded or truncated to exactly max_length; the eos
/// is always the last non-pad id.
std::vector<int> tokenize(const std::string& caption, const Tokenizer& tokenizer);

IdMatrix tokenize_batch(const std::vector<std::string>& captions, const Tokenizer& tokenizer);

/// Line-delimited "token<TAB>id"; reserved ids are written with their
/// symbolic names (<pad>, <unk>, <bos>, <eos>).
void save_tokenizer(const std::string& path, const Tokenizer& tokenizer);
Tokenizer load_tokenizer(const std::string& path, int max_length);

/// Same format as the file serialization, as a string (used by checkpoints).
std::string tokenizer_to_text(const Tokenizer& tokenizer);
Tokenizer tokenizer_from_text(const std::string& text, int max_length);

}  // namespace valpat
