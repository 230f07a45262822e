#include "valpat/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace valpat {

int AttributeVocabulary::index_of(const std::string& token) const {
  if (!index_built_) {
    index_.clear();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      index_.emplace(entries[i].token, static_cast<int>(i));
    }
    index_built_ = true;
  }
  auto found = index_.find(token);
  return found == index_.end() ? -1 : found->second;
}

namespace {

bool is_attribute_tag(PosTag tag) { return tag == PosTag::noun || tag == PosTag::adjective; }

}  // namespace

AttributeVocabulary build_vocabulary_tagged(const std::vector<std::vector<TaggedToken>>& corpus,
                                            Index m) {
  VALPAT_REQUIRE(m >= 1, "build_vocabulary: M must be >= 1, got ", m);
  VALPAT_REQUIRE(!corpus.empty(), "build_vocabulary: empty corpus");

  // std::map keeps candidate iteration deterministic; ties resolve to the
  // lexicographically smaller token.
  std::map<std::string, AttributeEntry> counts;
  for (const auto& caption : corpus) {
    for (const auto& [token, tag] : caption) {
      if (!is_attribute_tag(tag)) continue;
      auto [it, inserted] = counts.try_emplace(token, AttributeEntry{token, tag, 0});
      it->second.frequency += 1;
    }
  }
  VALPAT_REQUIRE(static_cast<Index>(counts.size()) >= m, "build_vocabulary: requested M=", m,
                 " attributes but corpus has only ", counts.size(),
                 " distinct noun/adjective tokens");

  std::vector<AttributeEntry> entries;
  entries.reserve(counts.size());
  for (auto& [token, entry] : counts) entries.push_back(entry);
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.token < b.token;
  });
  entries.resize(static_cast<std::size_t>(m));

  AttributeVocabulary vocab;
  vocab.entries = std::move(entries);

  std::vector<Eigen::VectorXi> labels;
  labels.reserve(corpus.size());
  for (const auto& caption : corpus) labels.push_back(label_sample_tagged(caption, vocab));
  vocab.weights = compute_attribute_weights(labels);
  return vocab;
}

AttributeVocabulary build_vocabulary(const std::vector<std::string>& corpus, Index m,
                                     const TaggerLexicon& lexicon) {
  std::vector<std::vector<TaggedToken>> tagged;
  tagged.reserve(corpus.size());
  for (const auto& caption : corpus) tagged.push_back(tag_caption(caption, lexicon));
  return build_vocabulary_tagged(tagged, m);
}

Eigen::VectorXi label_sample_tagged(const std::vector<TaggedToken>& tagged,
                                    const AttributeVocabulary& vocab) {
  Eigen::VectorXi bits = Eigen::VectorXi::Zero(vocab.size());
  for (const auto& [token, tag] : tagged) {
    if (!is_attribute_tag(tag)) continue;
    const int j = vocab.index_of(token);
    if (j >= 0) bits[j] = 1;
  }
  return bits;
}

Eigen::VectorXi label_sample(const std::string& caption, const AttributeVocabulary& vocab,
                             const TaggerLexicon& lexicon) {
  return label_sample_tagged(tag_caption(caption, lexicon), vocab);
}

Vector compute_attribute_weights(const std::vector<Eigen::VectorXi>& labels) {
  VALPAT_REQUIRE(!labels.empty(), "compute_attribute_weights: no label vectors");
  const Index m = labels.front().size();
  Vector prevalence = Vector::Zero(m);
  for (const auto& bits : labels) {
    VALPAT_REQUIRE(bits.size() == m, "compute_attribute_weights: label length ", bits.size(),
                   " != M=", m);
    for (Index j = 0; j < m; ++j) {
      VALPAT_REQUIRE(bits[j] == 0 || bits[j] == 1,
                     "compute_attribute_weights: label bit not in {0,1}");
      prevalence[j] += bits[j];
    }
  }
  prevalence /= static_cast<Scalar>(labels.size());
  return imbalance_weights<Scalar>(prevalence);
}

void save_vocabulary(const std::string& path, const AttributeVocabulary& vocab) {
  VALPAT_REQUIRE(vocab.weights.size() == vocab.size(),
                 "save_vocabulary: weights/entries length mismatch");
  std::ofstream out(path);
  VALPAT_REQUIRE(out.good(), "cannot open '", path, "' for writing");
  out.precision(17);
  for (Index j = 0; j < vocab.size(); ++j) {
    const auto& e = vocab.entries[static_cast<std::size_t>(j)];
    out << e.token << '\t' << to_string(e.pos) << '\t' << e.frequency << '\t'
        << vocab.weights[j] << '\n';
  }
  VALPAT_REQUIRE(out.good(), "write to '", path, "' failed");
}

AttributeVocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  VALPAT_REQUIRE(in.good(), "cannot open vocabulary file '", path, "'");
  AttributeVocabulary vocab;
  std::vector<Scalar> weights;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    AttributeEntry entry;
    std::string pos_name;
    Scalar weight = 0;
    if (!std::getline(ls, entry.token, '\t') || !std::getline(ls, pos_name, '\t') ||
        !(ls >> entry.frequency >> weight)) {
      raise("vocabulary file '", path, "' line ", line_no, ": malformed entry");
    }
    entry.pos = pos_tag_from_string(pos_name);
    VALPAT_REQUIRE(entry.pos == PosTag::noun || entry.pos == PosTag::adjective, "vocabulary file '",
                   path, "' line ", line_no, ": pos must be noun or adj");
    VALPAT_REQUIRE(weight > 0, "vocabulary file '", path, "' line ", line_no,
                   ": weight must be positive");
    vocab.entries.push_back(std::move(entry));
    weights.push_back(weight);
  }
  VALPAT_REQUIRE(!vocab.entries.empty(), "vocabulary file '", path, "' is empty");
  vocab.weights = Eigen::Map<const Vector>(weights.data(), static_cast<Index>(weights.size()));
  return vocab;
}

}  // namespace valpat
