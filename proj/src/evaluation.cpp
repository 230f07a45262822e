#include "valpat/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "valpat/augment.hpp"
#include "valpat/serialize.hpp"

namespace valpat {

void EmbeddingSet::validate() const {
  VALPAT_REQUIRE(static_cast<Index>(ids.size()) == embeddings.rows(),
                 "EmbeddingSet: ids length ", ids.size(), " != N=", embeddings.rows());
  if (camera_ids.has_value()) {
    VALPAT_REQUIRE(static_cast<Index>(camera_ids->size()) == embeddings.rows(),
                   "EmbeddingSet: camera ids length mismatch");
  }
  for (Index r = 0; r < embeddings.rows(); ++r) {
    const Scalar norm = embeddings.row(r).norm();
    VALPAT_REQUIRE(std::abs(norm - 1.0) <= 1e-6, "EmbeddingSet: row ", r,
                   " is not unit-norm (|x| = ", norm, ")");
  }
}

namespace {

constexpr Index kEmbedChunk = 64;

std::vector<std::int64_t> identity_labels(const Dataset& dataset) {
  std::vector<std::int64_t> ids(dataset.samples.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    ids[i] = dataset.samples[i].person_id.value_or(static_cast<std::int64_t>(i));
  }
  return ids;
}

}  // namespace

EmbeddingSet embed_dataset(TrainerState& state, const Dataset& dataset, ImageStore& images,
                           Modality modality) {
  const Index n = static_cast<Index>(dataset.samples.size());
  VALPAT_REQUIRE(n > 0, "embed_dataset: empty dataset");

  EmbeddingSet out;
  out.embeddings.resize(n, state.cfg.embed_dim);
  out.ids = identity_labels(dataset);

  bool all_cameras = true;
  for (const auto& sample : dataset.samples) all_cameras &= sample.camera_id.has_value();
  if (all_cameras) {
    std::vector<std::int64_t> cams(dataset.samples.size());
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      cams[i] = *dataset.samples[i].camera_id;
    }
    out.camera_ids = std::move(cams);
  }

  for (Index begin = 0; begin < n; begin += kEmbedChunk) {
    const Index count = std::min<Index>(kEmbedChunk, n - begin);
    if (modality == Modality::image) {
      Matrix batch(count, static_cast<Index>(state.cfg.image_encoder.in_channels) *
                              state.cfg.image_encoder.height * state.cfg.image_encoder.width);
      for (Index i = 0; i < count; ++i) {
        const auto& sample = dataset.samples[static_cast<std::size_t>(begin + i)];
        const ImageBuffer view =
            preprocess_eval(images.get(sample.image_ref), state.cfg.light_augment);
        batch.row(i) = view.data.transpose();
      }
      out.embeddings.middleRows(begin, count) = l2_normalize_rows<Scalar>(
          state.image.query.head_itc.forward(state.image.query.trunk.forward(batch)));
    } else {
      std::vector<std::string> captions;
      captions.reserve(static_cast<std::size_t>(count));
      for (Index i = 0; i < count; ++i) {
        const auto& sample = dataset.samples[static_cast<std::size_t>(begin + i)];
        VALPAT_REQUIRE(sample.has_caption(), "embed_dataset: sample ", begin + i,
                       " has no caption");
        captions.push_back(*sample.caption);
      }
      const IdMatrix ids = tokenize_batch(captions, state.tokenizer);
      out.embeddings.middleRows(begin, count) = l2_normalize_rows<Scalar>(
          state.text.query.head_itc.forward(state.text.query.trunk.forward(ids)));
    }
  }
  return out;
}

Matrix attribute_probabilities(TrainerState& state, const Dataset& dataset, ImageStore& images,
                               Modality modality) {
  const Index n = static_cast<Index>(dataset.samples.size());
  VALPAT_REQUIRE(n > 0, "attribute_probabilities: empty dataset");
  Matrix probs(n, state.classifier.num_attributes());

  for (Index begin = 0; begin < n; begin += kEmbedChunk) {
    const Index count = std::min<Index>(kEmbedChunk, n - begin);
    Matrix pre_norm;
    if (modality == Modality::image) {
      Matrix batch(count, static_cast<Index>(state.cfg.image_encoder.in_channels) *
                              state.cfg.image_encoder.height * state.cfg.image_encoder.width);
      for (Index i = 0; i < count; ++i) {
        const auto& sample = dataset.samples[static_cast<std::size_t>(begin + i)];
        const ImageBuffer view =
            preprocess_eval(images.get(sample.image_ref), state.cfg.light_augment);
        batch.row(i) = view.data.transpose();
      }
      pre_norm = state.image.query.head_itc.forward(state.image.query.trunk.forward(batch));
    } else {
      std::vector<std::string> captions;
      for (Index i = 0; i < count; ++i) {
        const auto& sample = dataset.samples[static_cast<std::size_t>(begin + i)];
        VALPAT_REQUIRE(sample.has_caption(), "attribute_probabilities: sample ", begin + i,
                       " has no caption");
        captions.push_back(*sample.caption);
      }
      pre_norm = state.text.query.head_itc.forward(
          state.text.query.trunk.forward(tokenize_batch(captions, state.tokenizer)));
    }
    probs.middleRows(begin, count) =
        state.classifier.forward(pre_norm, AttributeClassifier::Branch::query);
  }
  return probs;
}

// ---------------------------------------------------------------------------
// Retrieval metrics

namespace {

/// Gallery order by descending similarity, ties by ascending gallery index.
std::vector<Index> ranked_gallery(const Vector& similarities) {
  std::vector<Index> order(static_cast<std::size_t>(similarities.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (similarities[a] != similarities[b]) return similarities[a] > similarities[b];
    return a < b;
  });
  return order;
}

}  // namespace

CmcResult cmc_map(const EmbeddingSet& queries, const EmbeddingSet& gallery, Index max_rank) {
  queries.validate();
  gallery.validate();
  VALPAT_REQUIRE(queries.embeddings.cols() == gallery.embeddings.cols(),
                 "cmc_map: embedding dimensions differ");
  VALPAT_REQUIRE(max_rank >= 1, "cmc_map: max_rank must be >= 1");
  const bool use_cameras = queries.camera_ids.has_value() && gallery.camera_ids.has_value();

  const Index nq = queries.size();
  const Index ng = gallery.size();
  Vector cmc = Vector::Zero(max_rank);
  Scalar sum_ap = 0;

  for (Index q = 0; q < nq; ++q) {
    const Vector sims = gallery.embeddings * queries.embeddings.row(q).transpose();
    const std::vector<Index> order = ranked_gallery(sims);

    Index rank = 0;          // rank among kept entries, 1-based after increment
    Index relevant_seen = 0;
    Scalar ap = 0;
    Index first_hit = -1;
    for (Index g : order) {
      const bool same_id = gallery.ids[static_cast<std::size_t>(g)] ==
                           queries.ids[static_cast<std::size_t>(q)];
      if (use_cameras) {
        if (same_id && (*gallery.camera_ids)[static_cast<std::size_t>(g)] ==
                           (*queries.camera_ids)[static_cast<std::size_t>(q)]) {
          continue;  // same identity seen by the same camera: filtered out
        }
      } else if (g == q) {
        continue;  // self-match by index
      }
      ++rank;
      if (same_id) {
        ++relevant_seen;
        ap += static_cast<Scalar>(relevant_seen) / static_cast<Scalar>(rank);
        if (first_hit < 0) first_hit = rank;
      }
    }
    VALPAT_REQUIRE(relevant_seen > 0, "cmc_map: query ", q,
                   " has no valid gallery match after filtering");
    sum_ap += ap / static_cast<Scalar>(relevant_seen);
    if (first_hit >= 1 && first_hit <= max_rank) {
      cmc.segment(first_hit - 1, max_rank - first_hit + 1).array() += 1.0;
    }
  }
  (void)ng;
  CmcResult result;
  result.mean_ap = sum_ap / static_cast<Scalar>(nq);
  result.cmc = cmc / static_cast<Scalar>(nq);
  return result;
}

MetricReport attribute_metrics(const MatRef<Scalar>& probabilities, const BitMatrix& labels,
                               Scalar threshold) {
  const Index n = probabilities.rows();
  const Index m = probabilities.cols();
  VALPAT_REQUIRE(labels.rows() == n && labels.cols() == m,
                 "attribute_metrics: probs and labels differ in shape");
  VALPAT_REQUIRE(n > 0 && m > 0, "attribute_metrics: empty input");
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) {
      VALPAT_REQUIRE(probabilities(i, j) >= 0.0 && probabilities(i, j) <= 1.0,
                     "attribute_metrics: probability out of [0,1]");
      VALPAT_REQUIRE(labels(i, j) == 0 || labels(i, j) == 1,
                     "attribute_metrics: label not in {0,1}");
    }

  BitMatrix pred(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) pred(i, j) = probabilities(i, j) >= threshold ? 1 : 0;

  // Label-based mean accuracy; an attribute with no positives (or no
  // negatives) contributes a vacuous rate of 1 on that side.
  Scalar ma = 0;
  for (Index j = 0; j < m; ++j) {
    Index tp = 0, fn = 0, tn = 0, fp = 0;
    for (Index i = 0; i < n; ++i) {
      if (labels(i, j) == 1) {
        (pred(i, j) == 1 ? tp : fn) += 1;
      } else {
        (pred(i, j) == 0 ? tn : fp) += 1;
      }
    }
    const Scalar tpr = tp + fn == 0 ? 1.0 : static_cast<Scalar>(tp) / static_cast<Scalar>(tp + fn);
    const Scalar tnr = tn + fp == 0 ? 1.0 : static_cast<Scalar>(tn) / static_cast<Scalar>(tn + fp);
    ma += 0.5 * (tpr + tnr);
  }
  ma /= static_cast<Scalar>(m);

  // Instance-based accuracy / precision / recall. Empty-set conventions:
  // both sets empty -> all three are 1; exactly one empty -> the undefined
  // ratio is 0.
  Scalar acc = 0, prec = 0, rec = 0;
  for (Index i = 0; i < n; ++i) {
    Index inter = 0, p_size = 0, g_size = 0;
    for (Index j = 0; j < m; ++j) {
      p_size += pred(i, j);
      g_size += labels(i, j);
      inter += pred(i, j) & labels(i, j);
    }
    const Index uni = p_size + g_size - inter;
    if (p_size == 0 && g_size == 0) {
      acc += 1;
      prec += 1;
      rec += 1;
      continue;
    }
    acc += uni == 0 ? 0.0 : static_cast<Scalar>(inter) / static_cast<Scalar>(uni);
    prec += p_size == 0 ? 0.0 : static_cast<Scalar>(inter) / static_cast<Scalar>(p_size);
    rec += g_size == 0 ? 0.0 : static_cast<Scalar>(inter) / static_cast<Scalar>(g_size);
  }
  acc /= static_cast<Scalar>(n);
  prec /= static_cast<Scalar>(n);
  rec /= static_cast<Scalar>(n);
  const Scalar f1 = prec + rec == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);

  MetricReport report;
  report.task = MetricTask::attributes;
  report.set("mA", ma);
  report.set("accuracy", acc);
  report.set("precision", prec);
  report.set("recall", rec);
  report.set("f1", f1);
  return report;
}

std::vector<Scalar> topk_text_search(const EmbeddingSet& text_queries,
                                     const EmbeddingSet& gallery_images,
                                     const std::vector<Index>& ks) {
  text_queries.validate();
  gallery_images.validate();
  VALPAT_REQUIRE(text_queries.embeddings.cols() == gallery_images.embeddings.cols(),
                 "topk_text_search: embedding dimensions differ");
  VALPAT_REQUIRE(!ks.empty(), "topk_text_search: no k values");
  for (Index k : ks) VALPAT_REQUIRE(k >= 1, "topk_text_search: k must be >= 1");

  for (std::size_t q = 0; q < text_queries.ids.size(); ++q) {
    const bool present = std::find(gallery_images.ids.begin(), gallery_images.ids.end(),
                                   text_queries.ids[q]) != gallery_images.ids.end();
    VALPAT_REQUIRE(present, "topk_text_search: query ", q, " (id ", text_queries.ids[q],
                   ") has no match in the gallery");
  }

  const Index nq = text_queries.size();
  std::vector<Scalar> hits(ks.size(), 0.0);
  for (Index q = 0; q < nq; ++q) {
    const Vector sims = gallery_images.embeddings * text_queries.embeddings.row(q).transpose();
    const std::vector<Index> order = ranked_gallery(sims);
    Index first_hit = -1;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (gallery_images.ids[static_cast<std::size_t>(order[r])] ==
          text_queries.ids[static_cast<std::size_t>(q)]) {
        first_hit = static_cast<Index>(r) + 1;
        break;
      }
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (first_hit >= 1 && first_hit <= ks[i]) hits[i] += 1.0;
    }
  }
  for (auto& h : hits) h /= static_cast<Scalar>(nq);
  return hits;
}

// ---------------------------------------------------------------------------
// Embedding file io

namespace {
constexpr char kEmbMagic[4] = {'V', 'E', 'M', 'B'};
constexpr std::uint32_t kEmbVersion = 1;
constexpr std::uint32_t kFlagCameras = 1u << 0;
}  // namespace

void save_embeddings(const std::string& path, const EmbeddingSet& embeddings) {
  embeddings.validate();
  std::ofstream out(path, std::ios::binary);
  VALPAT_REQUIRE(out.good(), "cannot open '", path, "' for writing");
  BinaryWriter w(out);
  w.write_bytes(kEmbMagic, sizeof kEmbMagic);
  w.write_u32(kEmbVersion);
  w.write_u64(static_cast<std::uint64_t>(embeddings.embeddings.rows()));
  w.write_u64(static_cast<std::uint64_t>(embeddings.embeddings.cols()));
  w.write_u32(embeddings.camera_ids.has_value() ? kFlagCameras : 0);
  for (Index r = 0; r < embeddings.embeddings.rows(); ++r)
    for (Index c = 0; c < embeddings.embeddings.cols(); ++c)
      w.write_f64(embeddings.embeddings(r, c));
  for (std::int64_t id : embeddings.ids) w.write_i64(id);
  if (embeddings.camera_ids.has_value()) {
    for (std::int64_t cam : *embeddings.camera_ids) w.write_i64(cam);
  }
}

EmbeddingSet load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  VALPAT_REQUIRE(in.good(), "cannot open embedding file '", path, "'");
  BinaryReader r(in, cat("embedding file '", path, "'"));
  char magic[4];
  r.read_bytes(magic, sizeof magic);
  VALPAT_REQUIRE(std::equal(magic, magic + 4, kEmbMagic), "'", path,
                 "' is not an embedding file");
  const std::uint32_t version = r.read_u32();
  VALPAT_REQUIRE(version == kEmbVersion, "embedding file '", path, "': version ", version,
                 " not supported (expected ", kEmbVersion, ")");
  const auto n = static_cast<Index>(r.read_u64());
  const auto d = static_cast<Index>(r.read_u64());
  const std::uint32_t flags = r.read_u32();
  VALPAT_REQUIRE(n >= 0 && d >= 1 && n * d < (1ll << 34), "embedding file '", path,
                 "': unreasonable dimensions");

  EmbeddingSet set;
  set.embeddings.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < d; ++c) set.embeddings(i, c) = r.read_f64();
  set.ids.resize(static_cast<std::size_t>(n));
  for (auto& id : set.ids) id = r.read_i64();
  if ((flags & kFlagCameras) != 0) {
    std::vector<std::int64_t> cams(static_cast<std::size_t>(n));
    for (auto& cam : cams) cam = r.read_i64();
    set.camera_ids = std::move(cams);
  }
  set.validate();
  return set;
}

std::string format_metric_line(const MetricReport& report) {
  std::string line = cat("{\"task\":\"", to_string(report.task), "\"");
  char buffer[64];
  for (const auto& [name, value] : report.values) {
    std::snprintf(buffer, sizeof buffer, ",\"%s\":%.6f", name.c_str(), value);
    line += buffer;
  }
  line += "}";
  return line;
}

std::string format_metric_table(const MetricReport& report) {
  std::string table = cat("task: ", to_string(report.task), "\n");
  char buffer[96];
  for (const auto& [name, value] : report.values) {
    std::snprintf(buffer, sizeof buffer, "  %-12s %.4f\n", name.c_str(), value);
    table += buffer;
  }
  return table;
}

}  // namespace valpat
