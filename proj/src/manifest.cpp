#include "valpat/manifest.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace valpat {

namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

bool CaptionedSample::has_caption() const { return caption.has_value() && !is_blank(*caption); }

bool CaptionedSample::operator==(const CaptionedSample& other) const {
  auto bits_equal = [](const std::optional<Eigen::VectorXi>& a,
                       const std::optional<Eigen::VectorXi>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a.has_value()) return true;
    return a->size() == b->size() && *a == *b;
  };
  return image_ref == other.image_ref && caption == other.caption &&
         attribute_indices == other.attribute_indices && bits_equal(attributes, other.attributes) &&
         person_id == other.person_id && camera_id == other.camera_id;
}

bool Dataset::operator==(const Dataset& other) const {
  if (vocabulary.has_value() != other.vocabulary.has_value()) return false;
  if (vocabulary.has_value() && !(*vocabulary == *other.vocabulary)) return false;
  return samples == other.samples;
}

std::string_view to_string(MetricTask task) {
  switch (task) {
    case MetricTask::reid: return "reid";
    case MetricTask::attributes: return "attributes";
    case MetricTask::text_search: return "text_search";
  }
  return "?";
}

void MetricReport::set(const std::string& name, Scalar value) {
  VALPAT_REQUIRE(value >= 0.0 && value <= 1.0, "metric '", name, "' out of [0,1]: ", value);
  values[name] = value;
}

namespace {

Dataset load_manifest_impl(const std::string& path, const AttributeVocabulary* vocab) {
  std::ifstream in(path);
  VALPAT_REQUIRE(in.good(), "cannot open manifest '", path, "'");

  Dataset dataset;
  if (vocab != nullptr) dataset.vocabulary = *vocab;

  const Index m = vocab != nullptr ? vocab->size() : 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;

    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    VALPAT_REQUIRE(!record.is_discarded() && record.is_object(), "malformed manifest line ",
                   line_no, " in '", path, "'");

    CaptionedSample sample;
    VALPAT_REQUIRE(record.contains("image_ref") && record["image_ref"].is_string(),
                   "missing image_ref at line ", line_no);
    sample.image_ref = record["image_ref"].get<std::string>();

    for (const auto& [key, value] : record.items()) {
      if (key == "image_ref") continue;
      if (key == "caption") {
        VALPAT_REQUIRE(value.is_string(), "manifest line ", line_no, ": caption must be a string");
        sample.caption = value.get<std::string>();
      } else if (key == "attributes") {
        VALPAT_REQUIRE(value.is_array(), "manifest line ", line_no,
                       ": attributes must be a list of vocabulary indices");
        std::vector<int> indices;
        for (const auto& idx : value) {
          VALPAT_REQUIRE(idx.is_number_integer(), "manifest line ", line_no,
                         ": attribute index must be an integer");
          const int j = idx.get<int>();
          VALPAT_REQUIRE(j >= 0, "manifest line ", line_no, ": negative attribute index ", j);
          if (vocab != nullptr) {
            VALPAT_REQUIRE(j < m, "attribute index ", j, " out of range [0,", m, ") at line ",
                           line_no);
          }
          indices.push_back(j);
        }
        std::sort(indices.begin(), indices.end());
        indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
        sample.attribute_indices = std::move(indices);
      } else if (key == "person_id") {
        VALPAT_REQUIRE(value.is_number_integer(), "manifest line ", line_no,
                       ": person_id must be an integer");
        sample.person_id = value.get<std::int64_t>();
      } else if (key == "camera_id") {
        VALPAT_REQUIRE(value.is_number_integer(), "manifest line ", line_no,
                       ": camera_id must be an integer");
        sample.camera_id = value.get<std::int64_t>();
      } else {
        log_warn("manifest '", path, "' line ", line_no, ": ignoring unknown key '", key, "'");
      }
    }

    if (sample.attribute_indices.has_value() && vocab != nullptr) {
      Eigen::VectorXi bits = Eigen::VectorXi::Zero(m);
      for (int j : *sample.attribute_indices) bits[j] = 1;
      sample.attributes = std::move(bits);
    }
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

}  // namespace

Dataset load_manifest(const std::string& path) { return load_manifest_impl(path, nullptr); }

Dataset load_manifest(const std::string& path, const AttributeVocabulary& vocab) {
  return load_manifest_impl(path, &vocab);
}

void save_manifest(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
  VALPAT_REQUIRE(out.good(), "cannot open '", path, "' for writing");
  for (const auto& sample : dataset.samples) {
    nlohmann::ordered_json record;
    record["image_ref"] = sample.image_ref;
    if (sample.caption.has_value()) record["caption"] = *sample.caption;
    if (sample.attribute_indices.has_value()) record["attributes"] = *sample.attribute_indices;
    if (sample.person_id.has_value()) record["person_id"] = *sample.person_id;
    if (sample.camera_id.has_value()) record["camera_id"] = *sample.camera_id;
    out << record.dump() << '\n';
  }
  VALPAT_REQUIRE(out.good(), "write to '", path, "' failed");
}

void mine_dataset_attributes(Dataset& dataset, Index m, const TaggerLexicon& lexicon) {
  std::vector<std::string> corpus;
  for (const auto& sample : dataset.samples) {
    if (sample.has_caption()) corpus.push_back(*sample.caption);
  }
  VALPAT_REQUIRE(!corpus.empty(), "mine_dataset_attributes: dataset has no captions");
  dataset.vocabulary = build_vocabulary(corpus, m, lexicon);

  for (auto& sample : dataset.samples) {
    if (!sample.has_caption()) continue;
    Eigen::VectorXi bits = label_sample(*sample.caption, *dataset.vocabulary, lexicon);
    std::vector<int> indices;
    for (Index j = 0; j < bits.size(); ++j) {
      if (bits[j] == 1) indices.push_back(static_cast<int>(j));
    }
    sample.attributes = std::move(bits);
    sample.attribute_indices = std::move(indices);
  }
}

std::vector<Diagnostic> validate_dataset(const Dataset& dataset) {
  std::vector<Diagnostic> diagnostics;
  const Index m = dataset.vocabulary.has_value() ? dataset.vocabulary->size() : -1;

  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& sample = dataset.samples[i];
    if (sample.image_ref.empty()) {
      diagnostics.push_back({i, "image_ref is empty"});
    }
    if (sample.caption.has_value() && is_blank(*sample.caption)) {
      diagnostics.push_back({i, "caption is empty after whitespace stripping"});
    }
    if (sample.attributes.has_value()) {
      const auto& bits = *sample.attributes;
      if (m >= 0 && bits.size() != m) {
        diagnostics.push_back(
            {i, cat("attribute vector has ", bits.size(), " entries, vocabulary M=", m)});
      }
      for (Index j = 0; j < bits.size(); ++j) {
        if (bits[j] != 0 && bits[j] != 1) {
          diagnostics.push_back({i, cat("attribute bit ", j, " not in {0,1}: ", bits[j])});
          break;
        }
      }
    }
    if (sample.attribute_indices.has_value() && m >= 0) {
      for (int j : *sample.attribute_indices) {
        if (j < 0 || j >= m) {
          diagnostics.push_back({i, cat("attribute index ", j, " out of range [0,", m, ")")});
        }
      }
    }
  }
  return diagnostics;
}

}  // namespace valpat
