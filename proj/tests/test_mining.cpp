#include <doctest.h>

#include <map>

#include "test_support.hpp"
#include "valpat/tagger.hpp"
#include "valpat/vocabulary.hpp"

using namespace valpat;

TEST_SUITE("attribute_mining") {

TEST_CASE("tagging the reference sentence") {
  // Cross-checked against a reference statistical tagger:
  // the/DT woman/NN wears/VBZ a/DT red/JJ dress/NN
  const auto tagged = tag_caption("The woman wears a red dress.", builtin_lexicon());
  const std::vector<TaggedToken> expected = {
      {"the", PosTag::determiner}, {"woman", PosTag::noun}, {"wears", PosTag::verb},
      {"a", PosTag::determiner},   {"red", PosTag::adjective}, {"dress", PosTag::noun},
  };
  CHECK(tagged == expected);
}

TEST_CASE("empty caption is rejected") {
  CHECK_THROWS_AS(tag_caption("", builtin_lexicon()), Error);
  CHECK_THROWS_AS(tag_caption("  .  ", builtin_lexicon()), Error);
}

TEST_CASE("case folding is idempotent") {
  const auto tagged = tag_caption("RED Red red", builtin_lexicon());
  REQUIRE(tagged.size() == 3);
  for (const auto& [token, tag] : tagged) {
    CHECK(token == "red");
    CHECK(tag == PosTag::adjective);
  }
}

TEST_CASE("unknown tokens get suffix or default tags") {
  const auto& lex = builtin_lexicon();
  CHECK(lex.lookup("zzglorbing") == PosTag::verb);    // -ing
  CHECK(lex.lookup("zzglorbed") == PosTag::verb);     // -ed
  CHECK(lex.lookup("zzglorbly") == PosTag::adverb);   // -ly
  CHECK(lex.lookup("zzglorb") == PosTag::noun);       // default
}

TEST_CASE("vocabulary counts occurrences and ranks by frequency") {
  // shirt x5, red x3, hat x1, spread over four captions
  const std::vector<std::string> corpus = {
      "shirt shirt shirt", "red shirt", "red shirt", "red hat",
  };
  const auto vocab = build_vocabulary(corpus, 2, builtin_lexicon());
  REQUIRE(vocab.size() == 2);
  CHECK(vocab.entries[0].token == "shirt");
  CHECK(vocab.entries[0].frequency == 5);
  CHECK(vocab.entries[1].token == "red");
  CHECK(vocab.entries[1].frequency == 3);

  // Brute-force counting oracle over the same corpus.
  std::map<std::string, int> counts;
  for (const auto& caption : corpus) {
    for (const auto& [token, tag] : tag_caption(caption, builtin_lexicon())) {
      if (tag == PosTag::noun || tag == PosTag::adjective) counts[token] += 1;
    }
  }
  CHECK(counts["shirt"] == 5);
  CHECK(counts["red"] == 3);
  CHECK(counts["hat"] == 1);
}

TEST_CASE("frequency ties break lexicographically") {
  const std::vector<std::string> corpus = {"zebra shirt", "apple shirt"};
  const auto vocab = build_vocabulary(corpus, 3, builtin_lexicon());
  REQUIRE(vocab.size() == 3);
  CHECK(vocab.entries[0].token == "shirt");  // freq 2
  CHECK(vocab.entries[1].token == "apple");  // freq 1, before zebra
  CHECK(vocab.entries[2].token == "zebra");
}

TEST_CASE("requesting more attributes than the corpus has is an error") {
  CHECK_THROWS_WITH_AS(build_vocabulary({"red shirt"}, 5, builtin_lexicon()),
                       doctest::Contains("only 2"), Error);
}

TEST_CASE("vocabulary is invariant to corpus order") {
  const std::vector<std::string> corpus = {"red shirt", "blue hat", "red pants shirt"};
  std::vector<std::string> shuffled = {"red pants shirt", "red shirt", "blue hat"};
  const auto a = build_vocabulary(corpus, 4, builtin_lexicon());
  const auto b = build_vocabulary(shuffled, 4, builtin_lexicon());
  CHECK(a == b);
}

TEST_CASE("label_sample uses presence semantics") {
  const auto vocab = build_vocabulary({"shirt shirt red", "red"}, 2, builtin_lexicon());
  REQUIRE(vocab.entries[0].token == "red");

  Eigen::VectorXi bits = label_sample("a red shirt and red shoes", vocab, builtin_lexicon());
  CHECK(bits[0] == 1);
  CHECK(bits[1] == 1);

  bits = label_sample("blue pants", vocab, builtin_lexicon());
  CHECK(bits.sum() == 0);
}

TEST_CASE("no stemming: plural forms are distinct tokens") {
  // the reference tagger also tags "shirts" as its own (plural) noun token
  CHECK(builtin_lexicon().lookup("shirts") == PosTag::noun);
  const auto vocab = build_vocabulary({"shirt red", "shirt"}, 2, builtin_lexicon());
  const Eigen::VectorXi bits = label_sample("green shirts", vocab, builtin_lexicon());
  CHECK(bits.sum() == 0);
}

TEST_CASE("label bits are a subset of the caption's nouns/adjectives") {
  const auto vocab =
      build_vocabulary({"red shirt hat", "blue pants shirt", "green shoes"}, 5, builtin_lexicon());
  const std::string caption = "a woman wearing a red shirt and holding a phone";
  const auto tagged = tag_caption(caption, builtin_lexicon());
  const Eigen::VectorXi bits = label_sample(caption, vocab, builtin_lexicon());
  for (Index j = 0; j < bits.size(); ++j) {
    if (bits[j] == 0) continue;
    bool found = false;
    for (const auto& [token, tag] : tagged) {
      found |= token == vocab.entries[static_cast<std::size_t>(j)].token &&
               (tag == PosTag::noun || tag == PosTag::adjective);
    }
    CHECK(found);
  }
}

TEST_CASE("weights: identical prevalence gives unit weights") {
  std::vector<Eigen::VectorXi> labels;
  Eigen::VectorXi row(3);
  row << 1, 1, 1;
  labels.push_back(row);
  row << 0, 0, 0;
  labels.push_back(row);
  const Vector w = compute_attribute_weights(labels);  // all r_j = 0.5
  for (Index j = 0; j < w.size(); ++j) CHECK(w[j] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weights: r=[0.5,0.125] gives pre-clip ratio 2") {
  // direct evaluation of the stated formula
  Vector prevalence(2);
  prevalence << 0.5, 0.125;
  const Vector w = imbalance_weights<Scalar>(prevalence);
  CHECK(w[1] / w[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("weights: an absent attribute hits the upper clip") {
  std::vector<Eigen::VectorXi> labels;
  const Index m = 16;
  for (int i = 0; i < 8; ++i) {
    Eigen::VectorXi row = Eigen::VectorXi::Ones(m);
    row[m - 1] = 0;  // last attribute never present
    labels.push_back(row);
  }
  const Vector w = compute_attribute_weights(labels);
  CHECK(w[m - 1] == doctest::Approx(10.0));
}

TEST_CASE("weights prevalence matches label column means") {
  Rng rng(7);
  std::vector<Eigen::VectorXi> labels;
  const Index m = 5;
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXi row(m);
    for (Index j = 0; j < m; ++j) row[j] = rng.bernoulli(0.3) ? 1 : 0;
    labels.push_back(row);
  }
  Vector prevalence = Vector::Zero(m);
  for (const auto& row : labels) prevalence += row.cast<Scalar>();
  prevalence /= static_cast<Scalar>(labels.size());
  const Vector expected = imbalance_weights<Scalar>(prevalence);
  const Vector actual = compute_attribute_weights(labels);
  CHECK((expected - actual).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("vocabulary serialization round-trips") {
  testsup::TempDir dir("vocab");
  const auto vocab =
      build_vocabulary({"red shirt hat", "blue pants shirt", "red shoes"}, 5, builtin_lexicon());
  save_vocabulary(dir.file("vocab.tsv"), vocab);
  const auto loaded = load_vocabulary(dir.file("vocab.tsv"));
  CHECK(vocab == loaded);
}

TEST_CASE("pre-tagged caption files round-trip and drive the pipeline") {
  testsup::TempDir dir("tagged");
  const std::vector<std::vector<TaggedToken>> tagged = {
      {{"red", PosTag::adjective}, {"shirt", PosTag::noun}},
      {{"blue", PosTag::adjective}, {"pants", PosTag::noun}, {"shirt", PosTag::noun}},
  };
  save_tagged_captions(dir.file("tags.txt"), tagged);
  const auto loaded = load_tagged_captions(dir.file("tags.txt"));
  CHECK(loaded == tagged);

  const auto vocab = build_vocabulary_tagged(loaded, 2);
  CHECK(vocab.entries[0].token == "shirt");
  const Eigen::VectorXi bits = label_sample_tagged(loaded[0], vocab);
  CHECK(bits[0] == 1);  // shirt present
}

}  // TEST_SUITE
