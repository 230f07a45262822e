#include "valpat/tagger.hpp"

#include <cctype>
#include <fstream>

namespace valpat {

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::noun: return "noun";
    case PosTag::verb: return "verb";
    case PosTag::adjective: return "adj";
    case PosTag::adverb: return "adv";
    case PosTag::determiner: return "det";
    case PosTag::pronoun: return "pron";
    case PosTag::preposition: return "prep";
    case PosTag::conjunction: return "conj";
    case PosTag::numeral: return "num";
    case PosTag::other: return "other";
  }
  return "other";
}

PosTag pos_tag_from_string(std::string_view name) {
  if (name == "noun") return PosTag::noun;
  if (name == "verb") return PosTag::verb;
  if (name == "adj") return PosTag::adjective;
  if (name == "adv") return PosTag::adverb;
  if (name == "det") return PosTag::determiner;
  if (name == "pron") return PosTag::pronoun;
  if (name == "prep") return PosTag::preposition;
  if (name == "conj") return PosTag::conjunction;
  if (name == "num") return PosTag::numeral;
  if (name == "other") return PosTag::other;
  raise("unknown POS tag '", name, "'");
}

PosTag TaggerLexicon::lookup(const std::string& token) const {
  auto exact = word_tags.find(token);
  if (exact != word_tags.end()) return exact->second;
  for (const auto& [suffix, tag] : suffix_rules) {
    if (token.size() > suffix.size() &&
        token.compare(token.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return tag;
    }
  }
  return default_tag;
}

namespace {

void add_all(TaggerLexicon& lex, PosTag tag, std::initializer_list<const char*> words) {
  for (const char* w : words) lex.word_tags.emplace(w, tag);
}

TaggerLexicon make_builtin_lexicon() {
  TaggerLexicon lex;
  lex.default_tag = PosTag::noun;
  // Ordered fallbacks, checked only after the exact table misses.
  lex.suffix_rules = {
      {"ing", PosTag::verb}, {"ed", PosTag::verb}, {"ly", PosTag::adverb},
      {"est", PosTag::adjective}, {"ish", PosTag::adjective},
  };

  add_all(lex, PosTag::determiner, {"a", "an", "the", "this", "that", "these", "those", "some",
                                    "any", "each", "every", "no", "another", "both"});
  add_all(lex, PosTag::pronoun, {"he", "she", "it", "they", "him", "her", "them", "his", "hers",
                                 "its", "their", "who", "which", "i", "you", "we"});
  add_all(lex, PosTag::preposition,
          {"in", "on", "at", "with", "of", "to", "from", "over", "under", "by", "near", "behind",
           "beside", "between", "through", "down", "up", "into", "across", "around", "along"});
  add_all(lex, PosTag::conjunction, {"and", "or", "but", "while", "as", "nor"});
  add_all(lex, PosTag::numeral, {"one", "two", "three", "four", "five", "six", "seven", "eight",
                                 "nine", "ten", "first", "second", "third"});
  add_all(lex, PosTag::adverb, {"very", "also", "not", "too", "so", "just", "there", "here"});
  add_all(lex, PosTag::other, {"is", "are", "was", "were", "be", "been", "being", "has", "have",
                               "had", "does", "do", "did"});

  add_all(lex, PosTag::verb,
          {"wear", "wears", "wearing", "worn", "carry", "carries", "carrying", "carried", "hold",
           "holds", "holding", "held", "walk", "walks", "walking", "stand", "stands", "standing",
           "sit", "sits", "sitting", "ride", "rides", "riding", "run", "runs", "running", "look",
           "looks", "looking", "facing", "pull", "pulls", "pulling", "push",
           "pushes", "pushing", "dressed", "talk", "talks", "talking", "lean", "leans",
           "leaning", "crosses", "crossing", "go", "goes", "going", "move", "moves",
           "moving", "stepping"});

  add_all(lex, PosTag::adjective,
          {"red",    "blue",   "green",  "yellow",   "black",   "white",   "gray",   "grey",
           "brown",  "orange", "purple", "pink",     "beige",   "khaki",   "tan",    "navy",
           "golden", "silver", "dark",   "light",    "bright",  "pale",    "plaid",  "striped",
           "floral", "plain",  "long",   "short",    "tall",    "small",   "large",  "big",
           "little", "young",  "old",    "middle",   "slim",    "thin",    "heavy",  "casual",
           "formal", "loose",  "tight",  "baggy",    "sleeveless", "sleeved", "collared",
           "hooded", "denim",  "leather","wool",     "cotton",  "checkered", "colorful",
           "high",   "low",    "left",   "right",    "blond",   "blonde",  "curly",  "straight",
           "bald",   "male",   "female", "athletic", "elderly", "teenage"});

  add_all(lex, PosTag::noun,
          {"man",      "woman",    "men",      "women",     "person",   "people",   "boy",
           "girl",     "lady",     "gentleman","child",     "adult",    "pedestrian",
           "shirt",    "shirts",   "t-shirt",  "t-shirts",  "tshirt",   "tee",      "top",
           "tops",     "blouse",   "sweater",  "sweaters",  "hoodie",   "hoodies",  "jacket",
           "jackets",  "coat",     "coats",    "vest",      "vests",    "suit",     "suits",
           "uniform",  "dress",    "dresses",  "skirt",     "skirts",   "pants",    "trousers",
           "jeans",    "shorts",   "leggings", "tights",    "sweatpants",
           "shoes",    "shoe",     "sneakers", "sneaker",   "boots",    "boot",     "sandals",
           "sandal",   "heels",    "slippers", "socks",     "sock",
           "hat",      "hats",     "cap",      "caps",      "helmet",   "hood",     "scarf",
           "glasses",  "sunglasses","mask",    "watch",     "tie",      "belt",     "gloves",
           "bag",      "bags",     "backpack", "backpacks", "handbag",  "handbags", "purse",
           "wallet",   "umbrella", "suitcase", "luggage",   "phone",    "cellphone","bottle",
           "book",     "camera",   "bicycle",  "bike",      "stroller", "dog",      "cart",
           "hair",     "head",     "hand",     "hands",     "arm",      "arms",     "leg",
           "legs",     "foot",     "feet",     "shoulder",  "shoulders","back",     "face",
           "beard",    "ponytail", "bun",      "stripes",   "stripe",   "dots",     "dot",
           "logo",     "pattern",  "color",    "colors",    "side",     "front",    "street",
           "sidewalk", "road",     "ground",   "background","chest",    "direction", "image",
           "picture",  "pair",     "bottom",   "bottoms",   "sleeve",   "sleeves",  "collar",
           "pocket",   "pockets",  "jersey",   "polo",      "cardigan", "outfit",   "clothes",
           "clothing", "shade",    "knee",     "knees",     "waist",    "wrist",    "neck"});

  return lex;
}

bool is_strippable_punct(unsigned char c) { return std::ispunct(c) != 0; }

std::string normalize_token(const std::string& raw) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  while (begin < end && is_strippable_punct(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && is_strippable_punct(static_cast<unsigned char>(raw[end - 1]))) --end;
  std::string token;
  token.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
  }
  return token;
}

}  // namespace

const TaggerLexicon& builtin_lexicon() {
  static const TaggerLexicon lex = make_builtin_lexicon();
  return lex;
}

std::vector<TaggedToken> tag_caption(const std::string& caption, const TaggerLexicon& lexicon) {
  std::vector<TaggedToken> tagged;
  std::string raw;
  auto flush = [&]() {
    if (raw.empty()) return;
    std::string token = normalize_token(raw);
    raw.clear();
    if (token.empty()) return;  // token was punctuation only
    tagged.push_back({token, lexicon.lookup(token)});
  };
  for (char ch : caption) {
    if (std::isspace(static_cast<unsigned char>(ch)) != 0) {
      flush();
    } else {
      raw.push_back(ch);
    }
  }
  flush();
  VALPAT_REQUIRE(!tagged.empty(), "tag_caption: caption is empty");
  return tagged;
}

std::vector<std::vector<TaggedToken>> load_tagged_captions(const std::string& path) {
  std::ifstream in(path);
  VALPAT_REQUIRE(in.good(), "cannot open tagged caption file '", path, "'");
  std::vector<std::vector<TaggedToken>> captions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<TaggedToken> tokens;
    std::istringstream ls(line);
    std::string pair;
    while (ls >> pair) {
      const auto slash = pair.find_last_of('/');
      VALPAT_REQUIRE(slash != std::string::npos && slash > 0 && slash + 1 < pair.size(),
                     "'", path, "' line ", line_no, ": expected token/tag, got '", pair, "'");
      tokens.push_back({pair.substr(0, slash), pos_tag_from_string(pair.substr(slash + 1))});
    }
    captions.push_back(std::move(tokens));
  }
  return captions;
}

void save_tagged_captions(const std::string& path,
                          const std::vector<std::vector<TaggedToken>>& captions) {
  std::ofstream out(path);
  VALPAT_REQUIRE(out.good(), "cannot open '", path, "' for writing");
  for (const auto& caption : captions) {
    for (std::size_t i = 0; i < caption.size(); ++i) {
      if (i > 0) out << ' ';
      out << caption[i].token << '/' << to_string(caption[i].tag);
    }
    out << '\n';
  }
  VALPAT_REQUIRE(out.good(), "write to '", path, "' failed");
}

}  // namespace valpat
