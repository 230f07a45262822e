#pragma once

#include <optional>
#include <string>
#include <vector>

#include "valpat/common.hpp"
#include "valpat/manifest.hpp"
#include "valpat/trainer.hpp"

namespace valpat {

enum class Modality { image, text };

/// Unit-norm embeddings with their identity labels (person_id when present,
/// dataset index otherwise) and optional camera ids.
struct EmbeddingSet {
  Matrix embeddings;  // N x D, rows unit-norm
  std::vector<std::int64_t> ids;
  std::optional<std::vector<std::int64_t>> camera_ids;

  Index size() const { return embeddings.rows(); }
  void validate() const;
};

/// Deterministic embeddings through the query tower (trunk, cross-modal
/// head, normalization) with no-flip preprocessing. Row order matches the
/// dataset.
EmbeddingSet embed_dataset(TrainerState& state, const Dataset& dataset, ImageStore& images,
                           Modality modality);

/// Query-branch attribute probabilities (sigmoid classifier over the
/// pre-normalization projection), N x M, dataset order.
Matrix attribute_probabilities(TrainerState& state, const Dataset& dataset, ImageStore& images,
                               Modality modality);

struct CmcResult {
  Scalar mean_ap{0};
  Vector cmc;  // length max_rank, nondecreasing
};

/// Retrieval metrics: rank gallery by descending cosine similarity (ties
/// broken by ascending gallery index). With camera ids on both sides,
/// gallery entries sharing the query's id AND camera are dropped; without
/// camera ids only the same-index self-match is dropped. AP is the mean of
/// precision at each relevant rank; CMC(k) the fraction of queries with a
/// relevant result in the top k.
CmcResult cmc_map(const EmbeddingSet& queries, const EmbeddingSet& gallery, Index max_rank);

/// Attribute recognition metrics at the given threshold: label-based mA,
/// and instance-based accuracy/precision/recall with F1 computed from the
/// mean precision and mean recall.
MetricReport attribute_metrics(const MatRef<Scalar>& probabilities, const BitMatrix& labels,
                               Scalar threshold = 0.5);

/// Top-k retrieval accuracy for text queries against an image gallery; every
/// query id must occur in the gallery.
std::vector<Scalar> topk_text_search(const EmbeddingSet& text_queries,
                                     const EmbeddingSet& gallery_images,
                                     const std::vector<Index>& ks);

/// Versioned binary embedding file: header (magic, version, N, D, flags),
/// row-major values, ids, then camera ids when flagged.
void save_embeddings(const std::string& path, const EmbeddingSet& embeddings);
EmbeddingSet load_embeddings(const std::string& path);

std::string format_metric_line(const MetricReport& report);
std::string format_metric_table(const MetricReport& report);

}  // namespace valpat
