// Command-line entry point wiring the library into the user-facing
// workflows: attribute mining, vocabulary building, pre-training, embedding
// extraction and the three evaluation protocols.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "valpat/config.hpp"
#include "valpat/evaluation.hpp"
#include "valpat/synthetic.hpp"
#include "valpat/trainer.hpp"

namespace {

using namespace valpat;

std::string dirname_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

std::vector<std::string> captioned_corpus(const Dataset& ds) {
  std::vector<std::string> corpus;
  for (const auto& sample : ds.samples) {
    if (sample.has_caption()) corpus.push_back(*sample.caption);
  }
  VALPAT_REQUIRE(!corpus.empty(), "manifest has no captions");
  return corpus;
}

std::vector<std::vector<TaggedToken>> tagged_corpus(const Dataset& ds,
                                                    const std::string& tagged_path) {
  if (!tagged_path.empty()) {
    auto tagged = load_tagged_captions(tagged_path);
    std::size_t captioned = 0;
    for (const auto& sample : ds.samples) captioned += sample.has_caption() ? 1 : 0;
    VALPAT_REQUIRE(tagged.size() == captioned, "pre-tagged file has ", tagged.size(),
                   " lines but the manifest has ", captioned, " captioned samples");
    return tagged;
  }
  std::vector<std::vector<TaggedToken>> tagged;
  for (const auto& caption : captioned_corpus(ds)) {
    tagged.push_back(tag_caption(caption, builtin_lexicon()));
  }
  return tagged;
}

struct PretrainArgs {
  std::string config_path;
  std::string manifest;
  std::string vocab;
  std::string out;
  std::string log_path;
  std::string resume;
  std::string tokenizer_out;
  std::uint64_t max_steps{0};
  std::int64_t seed{-1};
  bool no_ssl{false}, no_itc{false}, no_mac{false}, mac_hard_only{false};
};

int run_pretrain(const PretrainArgs& args) {
  TrainConfig cfg =
      args.config_path.empty() ? TrainConfig::desk_profile() : load_config(args.config_path);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (args.no_ssl) cfg.toggles.ssl = false;
  if (args.no_itc) cfg.toggles.itc = false;
  if (args.no_mac) cfg.toggles.mac = false;
  if (args.mac_hard_only) cfg.toggles.mac_soft = false;
  cfg.validate();

  std::optional<AttributeVocabulary> vocab;
  if (!args.vocab.empty()) vocab = load_vocabulary(args.vocab);
  VALPAT_REQUIRE(!cfg.toggles.mac || vocab.has_value(),
                 "MAC is enabled: pass --vocab with the mined attribute vocabulary");

  Dataset ds = vocab.has_value() ? load_manifest(args.manifest, *vocab)
                                 : load_manifest(args.manifest);
  ImageStore images(dirname_of(args.manifest));

  TrainerState state = args.resume.empty() ? init_trainer(cfg, ds)
                                           : load_checkpoint(args.resume, cfg);
  if (!args.resume.empty()) {
    const std::uint64_t n = ds.samples.size();
    VALPAT_REQUIRE(n >= cfg.batch_size, "dataset smaller than batch size");
    state.steps_per_epoch = n / cfg.batch_size;
  }

  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!args.log_path.empty()) {
    log_file.open(args.log_path, std::ios::binary);
    VALPAT_REQUIRE(log_file.good(), "cannot open log file '", args.log_path, "'");
    log = &log_file;
  }

  run_training(state, ds, images, log, args.max_steps);
  save_checkpoint(state, args.out);
  if (!args.tokenizer_out.empty()) save_tokenizer(args.tokenizer_out, state.tokenizer);
  std::cerr << "checkpoint written to " << args.out << " after " << state.step << " steps\n";
  return 0;
}

Modality parse_modality(const std::string& name) {
  if (name == "image") return Modality::image;
  if (name == "text") return Modality::text;
  raise("modality must be 'image' or 'text', got '", name, "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal pedestrian representation pre-training toolkit"};
  app.require_subcommand(1);

  // mine-attributes -----------------------------------------------------
  std::string ma_manifest, ma_vocab, ma_out, ma_tagged;
  auto* mine = app.add_subcommand("mine-attributes",
                                  "Label every captioned sample against a vocabulary");
  mine->add_option("--manifest", ma_manifest, "Input manifest (JSON lines)")->required();
  mine->add_option("--vocab", ma_vocab, "Attribute vocabulary TSV")->required();
  mine->add_option("--out", ma_out, "Output manifest with attribute annotations")->required();
  mine->add_option("--tagged", ma_tagged, "Pre-tagged caption file (token/tag pairs)");

  // build-vocab ----------------------------------------------------------
  std::string bv_manifest, bv_out, bv_tagged;
  std::int64_t bv_m = 0;
  auto* build = app.add_subcommand("build-vocab",
                                   "Mine the top-M attribute vocabulary from captions");
  build->add_option("--manifest", bv_manifest, "Input manifest")->required();
  build->add_option("--m", bv_m, "Vocabulary size M")->required();
  build->add_option("--out", bv_out, "Output vocabulary TSV")->required();
  build->add_option("--tagged", bv_tagged, "Pre-tagged caption file");

  // pretrain ---------------------------------------------------------------
  PretrainArgs pa;
  auto* pretrain = app.add_subcommand("pretrain", "Run the pre-training loop");
  pretrain->add_option("--config", pa.config_path, "Config file (desk profile when omitted)");
  pretrain->add_option("--manifest", pa.manifest, "Training manifest")->required();
  pretrain->add_option("--vocab", pa.vocab, "Attribute vocabulary TSV (required for MAC)");
  pretrain->add_option("--out", pa.out, "Checkpoint output path")->required();
  pretrain->add_option("--log", pa.log_path, "Training log destination (default stdout)");
  pretrain->add_option("--resume", pa.resume, "Resume from an existing checkpoint");
  pretrain->add_option("--steps", pa.max_steps, "Stop after this many total steps");
  pretrain->add_option("--seed", pa.seed, "Run seed (overrides the config)");
  pretrain->add_option("--tokenizer-out", pa.tokenizer_out, "Also write the tokenizer TSV here");
  pretrain->add_flag("--no-ssl", pa.no_ssl, "Disable the instance-contrast objective");
  pretrain->add_flag("--no-itc", pa.no_itc, "Disable the image-text contrast objective");
  pretrain->add_flag("--no-mac", pa.no_mac, "Disable the attribute classification objective");
  pretrain->add_flag("--mac-hard-only", pa.mac_hard_only, "Disable the soft attribute labels");

  // embed -----------------------------------------------------------------
  std::string em_config, em_ckpt, em_manifest, em_modality = "image", em_out;
  auto* embed = app.add_subcommand("embed", "Extract query-tower embeddings");
  embed->add_option("--config", em_config, "Config used at pre-training time");
  embed->add_option("--checkpoint", em_ckpt, "Checkpoint file")->required();
  embed->add_option("--manifest", em_manifest, "Samples to embed")->required();
  embed->add_option("--modality", em_modality, "image or text");
  embed->add_option("--out", em_out, "Output embedding file")->required();

  // eval-reid ---------------------------------------------------------------
  std::string er_query, er_gallery;
  std::int64_t er_max_rank = 10;
  auto* reid = app.add_subcommand("eval-reid", "mAP/CMC retrieval evaluation");
  reid->add_option("--query", er_query, "Query embedding file")->required();
  reid->add_option("--gallery", er_gallery, "Gallery embedding file")->required();
  reid->add_option("--max-rank", er_max_rank, "CMC curve length");

  // eval-attributes ---------------------------------------------------------
  std::string ea_config, ea_ckpt, ea_manifest, ea_vocab, ea_modality = "image";
  double ea_threshold = 0.5;
  auto* evattr = app.add_subcommand("eval-attributes", "Attribute recognition metrics");
  evattr->add_option("--config", ea_config, "Config used at pre-training time");
  evattr->add_option("--checkpoint", ea_ckpt, "Checkpoint file")->required();
  evattr->add_option("--manifest", ea_manifest, "Labeled manifest")->required();
  evattr->add_option("--vocab", ea_vocab, "Attribute vocabulary TSV")->required();
  evattr->add_option("--modality", ea_modality, "image or text");
  evattr->add_option("--threshold", ea_threshold, "Binarization threshold");

  // eval-text-search ----------------------------------------------------------
  std::string et_queries, et_gallery, et_ks = "1,5,10";
  auto* evtext = app.add_subcommand("eval-text-search", "Top-K text-to-image retrieval");
  evtext->add_option("--queries", et_queries, "Text query embedding file")->required();
  evtext->add_option("--gallery", et_gallery, "Image gallery embedding file")->required();
  evtext->add_option("--ks", et_ks, "Comma-separated K values");

  // inspect-checkpoint -------------------------------------------------------
  std::string ic_ckpt;
  auto* inspect = app.add_subcommand("inspect-checkpoint", "Print checkpoint header and tensors");
  inspect->add_option("--checkpoint", ic_ckpt, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help() << '\n';
    return 2;
  }

  try {
    if (mine->parsed()) {
      const AttributeVocabulary vocab = load_vocabulary(ma_vocab);
      Dataset ds = load_manifest(ma_manifest);
      const auto tagged = tagged_corpus(ds, ma_tagged);
      std::size_t t = 0;
      for (auto& sample : ds.samples) {
        if (!sample.has_caption()) continue;
        const Eigen::VectorXi bits = label_sample_tagged(tagged[t++], vocab);
        std::vector<int> indices;
        for (Index j = 0; j < bits.size(); ++j) {
          if (bits[j] == 1) indices.push_back(static_cast<int>(j));
        }
        sample.attributes = bits;
        sample.attribute_indices = std::move(indices);
      }
      save_manifest(ma_out, ds);
      std::cerr << "labeled manifest written to " << ma_out << '\n';
    } else if (build->parsed()) {
      const Dataset ds = load_manifest(bv_manifest);
      const auto vocab = build_vocabulary_tagged(tagged_corpus(ds, bv_tagged), bv_m);
      save_vocabulary(bv_out, vocab);
      std::cerr << "vocabulary of " << vocab.size() << " attributes written to " << bv_out
                << '\n';
    } else if (pretrain->parsed()) {
      return run_pretrain(pa);
    } else if (embed->parsed()) {
      const TrainConfig cfg =
          em_config.empty() ? TrainConfig::desk_profile() : load_config(em_config);
      TrainerState state = load_checkpoint(em_ckpt, cfg);
      const Dataset ds = load_manifest(em_manifest);
      ImageStore images(dirname_of(em_manifest));
      const EmbeddingSet set = embed_dataset(state, ds, images, parse_modality(em_modality));
      save_embeddings(em_out, set);
      std::cerr << set.size() << " embeddings written to " << em_out << '\n';
    } else if (reid->parsed()) {
      const EmbeddingSet query = load_embeddings(er_query);
      const EmbeddingSet gallery = load_embeddings(er_gallery);
      const CmcResult result = cmc_map(query, gallery, er_max_rank);
      MetricReport report;
      report.task = MetricTask::reid;
      report.set("mAP", result.mean_ap);
      for (Index k : {Index(1), Index(5), Index(10)}) {
        if (k <= result.cmc.size()) report.set(cat("cmc@", k), result.cmc[k - 1]);
      }
      std::cout << format_metric_line(report) << '\n';
      char line[64];
      std::snprintf(line, sizeof line, "mAP=%.4f", result.mean_ap);
      std::cout << line << '\n';
      for (Index k = 1; k <= result.cmc.size(); ++k) {
        std::snprintf(line, sizeof line, "CMC@%lld=%.4f", static_cast<long long>(k),
                      result.cmc[k - 1]);
        std::cout << line << '\n';
      }
    } else if (evattr->parsed()) {
      const TrainConfig cfg =
          ea_config.empty() ? TrainConfig::desk_profile() : load_config(ea_config);
      TrainerState state = load_checkpoint(ea_ckpt, cfg);
      const AttributeVocabulary vocab = load_vocabulary(ea_vocab);
      const Dataset ds = load_manifest(ea_manifest, vocab);
      ImageStore images(dirname_of(ea_manifest));

      std::vector<Index> labeled;
      for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].attributes.has_value()) labeled.push_back(static_cast<Index>(i));
      }
      VALPAT_REQUIRE(!labeled.empty(), "manifest has no attribute annotations");
      Dataset subset;
      subset.vocabulary = ds.vocabulary;
      for (Index i : labeled) subset.samples.push_back(ds.samples[static_cast<std::size_t>(i)]);

      const Matrix probs =
          attribute_probabilities(state, subset, images, parse_modality(ea_modality));
      BitMatrix labels(static_cast<Index>(subset.samples.size()), vocab.size());
      for (std::size_t i = 0; i < subset.samples.size(); ++i) {
        labels.row(static_cast<Index>(i)) = subset.samples[i].attributes->transpose();
      }
      const MetricReport report = attribute_metrics(probs, labels, ea_threshold);
      std::cout << format_metric_line(report) << '\n';
      std::cout << format_metric_table(report);
    } else if (evtext->parsed()) {
      const EmbeddingSet queries = load_embeddings(et_queries);
      const EmbeddingSet gallery = load_embeddings(et_gallery);
      std::vector<Index> ks;
      std::istringstream ks_stream(et_ks);
      std::string item;
      while (std::getline(ks_stream, item, ',')) ks.push_back(std::stoll(item));
      const auto accuracies = topk_text_search(queries, gallery, ks);
      MetricReport report;
      report.task = MetricTask::text_search;
      for (std::size_t i = 0; i < ks.size(); ++i) {
        report.set(cat("top-", ks[i]), accuracies[i]);
      }
      std::cout << format_metric_line(report) << '\n';
      char line[64];
      for (std::size_t i = 0; i < ks.size(); ++i) {
        std::snprintf(line, sizeof line, "top-%lld=%.4f", static_cast<long long>(ks[i]),
                      accuracies[i]);
        std::cout << line << '\n';
      }
    } else if (inspect->parsed()) {
      const CheckpointInfo info = inspect_checkpoint(ic_ckpt);
      std::cout << "format_version: " << info.format_version << '\n';
      std::cout << "config_hash: " << info.config_hash << '\n';
      std::cout << "step: " << info.step << '\n';
      std::cout << "tau_prime: " << info.tau_prime << '\n';
      std::cout << "tensors: " << info.tensors.size() << '\n';
      for (const auto& [name, shape] : info.tensors) {
        std::cout << "  " << name << "  " << shape.first << "x" << shape.second << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
