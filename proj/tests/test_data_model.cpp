#include <doctest.h>

#include "test_support.hpp"
#include "valpat/manifest.hpp"

using namespace valpat;

namespace {

AttributeVocabulary toy_vocab(int m) {
  AttributeVocabulary vocab;
  for (int j = 0; j < m; ++j) {
    vocab.entries.push_back({cat("token", j), PosTag::noun, static_cast<std::uint64_t>(m - j)});
  }
  vocab.weights = Vector::Ones(m);
  return vocab;
}

}  // namespace

TEST_SUITE("data_model") {

TEST_CASE("manifest with three valid lines loads in file order") {
  testsup::TempDir dir("manifest");
  testsup::write_text(dir.file("data.jsonl"),
                      R"({"image_ref":"a.vimg","caption":"a red shirt","person_id":1}
{"image_ref":"b.vimg","caption":"blue pants"}
{"image_ref":"c.vimg"}
)");
  const Dataset ds = load_manifest(dir.file("data.jsonl"));
  REQUIRE(ds.samples.size() == 3);
  CHECK(ds.samples[0].image_ref == "a.vimg");
  CHECK(ds.samples[1].image_ref == "b.vimg");
  CHECK(ds.samples[2].image_ref == "c.vimg");
  CHECK(ds.samples[0].person_id == 1);
  CHECK(ds.samples[2].caption.has_value() == false);
  CHECK(ds.samples[2].has_caption() == false);
}

TEST_CASE("attribute index list expands to a multi-hot vector") {
  testsup::TempDir dir("manifest");
  testsup::write_text(dir.file("data.jsonl"),
                      R"({"image_ref":"a.vimg","caption":"x","attributes":[0,2]}
)");
  const Dataset ds = load_manifest(dir.file("data.jsonl"), toy_vocab(4));
  REQUIRE(ds.samples.size() == 1);
  REQUIRE(ds.samples[0].attributes.has_value());
  Eigen::VectorXi expected(4);
  expected << 1, 0, 1, 0;
  CHECK(*ds.samples[0].attributes == expected);
}

TEST_CASE("missing image_ref is an error naming the line") {
  testsup::TempDir dir("manifest");
  testsup::write_text(dir.file("data.jsonl"),
                      R"({"image_ref":"a.vimg","caption":"x"}
{"caption":"no image here"}
)");
  CHECK_THROWS_WITH_AS(load_manifest(dir.file("data.jsonl")),
                       doctest::Contains("missing image_ref at line 2"), Error);
}

TEST_CASE("malformed line is an error naming the line") {
  testsup::TempDir dir("manifest");
  testsup::write_text(dir.file("data.jsonl"), "{\"image_ref\":\"a.vimg\"}\nnot json at all\n");
  CHECK_THROWS_WITH_AS(load_manifest(dir.file("data.jsonl")),
                       doctest::Contains("malformed manifest line 2"), Error);
}

TEST_CASE("attribute index beyond M is an error naming the index") {
  testsup::TempDir dir("manifest");
  testsup::write_text(dir.file("data.jsonl"),
                      R"({"image_ref":"a.vimg","attributes":[5]}
)");
  CHECK_THROWS_WITH_AS(load_manifest(dir.file("data.jsonl"), toy_vocab(4)),
                       doctest::Contains("attribute index 5 out of range"), Error);
}

TEST_CASE("unknown keys are ignored") {
  testsup::TempDir dir("manifest");
  testsup::write_text(dir.file("data.jsonl"),
                      R"({"image_ref":"a.vimg","caption":"x","mystery":42}
)");
  const Dataset ds = load_manifest(dir.file("data.jsonl"));
  REQUIRE(ds.samples.size() == 1);
  CHECK(ds.samples[0].caption == "x");
}

TEST_CASE("round-trip: load, save, load yields an equal dataset") {
  testsup::TempDir dir("manifest");
  testsup::write_text(dir.file("data.jsonl"),
                      R"({"image_ref":"a.vimg","caption":"a red shirt","attributes":[2,0],"person_id":3,"camera_id":1}
{"image_ref":"b.vimg"}
{"image_ref":"c.vimg","caption":"blue pants","attributes":[1]}
)");
  const Dataset first = load_manifest(dir.file("data.jsonl"), toy_vocab(4));
  save_manifest(dir.file("copy.jsonl"), first);
  const Dataset second = load_manifest(dir.file("copy.jsonl"), toy_vocab(4));
  CHECK(first == second);

  // and sample order is stable across repeated loads
  const Dataset again = load_manifest(dir.file("data.jsonl"), toy_vocab(4));
  CHECK(first == again);
}

TEST_CASE("validate_dataset reports invariant violations per sample") {
  Dataset ds;
  ds.vocabulary = toy_vocab(4);

  CaptionedSample good;
  good.image_ref = "a.vimg";
  good.caption = "fine";
  good.attributes = Eigen::VectorXi::Zero(4);
  for (int i = 0; i < 10; ++i) ds.samples.push_back(good);
  CHECK(validate_dataset(ds).empty());

  CaptionedSample five_bits = good;
  five_bits.attributes = Eigen::VectorXi::Zero(5);
  ds.samples.push_back(five_bits);
  auto diags = validate_dataset(ds);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].sample_index == 10);

  CaptionedSample blank = good;
  blank.caption = "   ";
  ds.samples.push_back(blank);
  diags = validate_dataset(ds);
  REQUIRE(diags.size() == 2);
  CHECK(diags[1].sample_index == 11);
  CHECK(diags[1].message.find("caption") != std::string::npos);
}

TEST_CASE("metric report rejects values outside [0,1]") {
  MetricReport report;
  report.set("mAP", 0.5);
  CHECK(report.values.at("mAP") == 0.5);
  CHECK_THROWS_AS(report.set("bad", 1.5), Error);
  CHECK_THROWS_AS(report.set("bad", -0.1), Error);
}

TEST_CASE("mined attributes fill captioned samples") {
  Dataset ds;
  CaptionedSample s1;
  s1.image_ref = "a.vimg";
  s1.caption = "a red shirt and red shoes";
  CaptionedSample s2;
  s2.image_ref = "b.vimg";  // caption-less, stays unlabeled
  ds.samples = {s1, s2};

  mine_dataset_attributes(ds, 3, builtin_lexicon());
  REQUIRE(ds.vocabulary.has_value());
  CHECK(ds.vocabulary->size() == 3);
  REQUIRE(ds.samples[0].attributes.has_value());
  CHECK(ds.samples[0].attributes->sum() == 3);  // red, shirt, shoes
  CHECK(!ds.samples[1].attributes.has_value());
}

}  // TEST_SUITE
