#include "valpat/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace valpat {

namespace {

std::vector<std::string> split_words(const std::string& caption) {
  std::vector<std::string> words;
  std::string word;
  for (char ch : caption) {
    if (std::isspace(static_cast<unsigned char>(ch)) != 0) {
      if (!word.empty()) words.push_back(std::move(word)), word.clear();
    } else {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!word.empty()) words.push_back(std::move(word));
  return words;
}

}  // namespace

Tokenizer build_tokenizer(const std::vector<std::string>& corpus, int max_length, int max_vocab) {
  VALPAT_REQUIRE(max_length >= 3, "build_tokenizer: max_length must fit bos+token+eos, got ",
                 max_length);
  VALPAT_REQUIRE(max_vocab >= 1, "build_tokenizer: max_vocab must be >= 1");

  std::map<std::string, std::uint64_t> counts;
  for (const auto& caption : corpus) {
    for (auto& word : split_words(caption)) counts[word] += 1;
  }

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > max_vocab) ranked.resize(static_cast<std::size_t>(max_vocab));

  Tokenizer tok;
  tok.max_length = max_length;
  tok.id_to_token.reserve(ranked.size());
  for (const auto& [word, freq] : ranked) {
    tok.vocab.emplace(word, tok.vocab_size());
    tok.id_to_token.push_back(word);
  }
  return tok;
}

std::vector<int> tokenize(const std::string& caption, const Tokenizer& tokenizer) {
  const auto words = split_words(caption);
  VALPAT_REQUIRE(!words.empty(), "tokenize: caption is empty");

  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(tokenizer.max_length));
  ids.push_back(Tokenizer::bos_id);
  const std::size_t budget = static_cast<std::size_t>(tokenizer.max_length) - 2;
  for (std::size_t i = 0; i < words.size() && i < budget; ++i) {
    auto found = tokenizer.vocab.find(words[i]);
    ids.push_back(found == tokenizer.vocab.end() ? Tokenizer::unk_id : found->second);
  }
  ids.push_back(Tokenizer::eos_id);
  ids.resize(static_cast<std::size_t>(tokenizer.max_length), Tokenizer::pad_id);
  return ids;
}

IdMatrix tokenize_batch(const std::vector<std::string>& captions, const Tokenizer& tokenizer) {
  IdMatrix ids(static_cast<Index>(captions.size()), tokenizer.max_length);
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto row = tokenize(captions[i], tokenizer);
    for (int j = 0; j < tokenizer.max_length; ++j) ids(static_cast<Index>(i), j) = row[static_cast<std::size_t>(j)];
  }
  return ids;
}

namespace {
constexpr const char* kReservedNames[] = {"<pad>", "<unk>", "<bos>", "<eos>"};
}

std::string tokenizer_to_text(const Tokenizer& tokenizer) {
  std::ostringstream out;
  for (int id = 0; id < Tokenizer::first_word_id; ++id) {
    out << kReservedNames[id] << '\t' << id << '\n';
  }
  for (std::size_t i = 0; i < tokenizer.id_to_token.size(); ++i) {
    out << tokenizer.id_to_token[i] << '\t' << Tokenizer::first_word_id + static_cast<int>(i)
        << '\n';
  }
  return out.str();
}

Tokenizer tokenizer_from_text(const std::string& text, int max_length) {
  std::istringstream in(text);
  Tokenizer tok;
  tok.max_length = max_length;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    VALPAT_REQUIRE(tab != std::string::npos, "tokenizer line ", line_no,
                   ": expected token<TAB>id");
    const std::string token = line.substr(0, tab);
    const int id = std::stoi(line.substr(tab + 1));
    if (id < Tokenizer::first_word_id) {
      VALPAT_REQUIRE(token == kReservedNames[id], "tokenizer line ", line_no, ": reserved id ", id,
                     " must be named ", kReservedNames[id]);
      continue;
    }
    VALPAT_REQUIRE(id == tok.vocab_size(), "tokenizer line ", line_no,
                   ": ids must be dense and ascending (expected ", tok.vocab_size(), ", got ", id,
                   ")");
    tok.vocab.emplace(token, id);
    tok.id_to_token.push_back(token);
  }
  return tok;
}

void save_tokenizer(const std::string& path, const Tokenizer& tokenizer) {
  std::ofstream out(path, std::ios::binary);
  VALPAT_REQUIRE(out.good(), "cannot open '", path, "' for writing");
  out << tokenizer_to_text(tokenizer);
  VALPAT_REQUIRE(out.good(), "write to '", path, "' failed");
}

Tokenizer load_tokenizer(const std::string& path, int max_length) {
  std::ifstream in(path);
  VALPAT_REQUIRE(in.good(), "cannot open tokenizer file '", path, "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return tokenizer_from_text(buffer.str(), max_length);
  } catch (const Error& e) {
    raise("tokenizer file '", path, "': ", e.what());
  }
}

}  // namespace valpat
