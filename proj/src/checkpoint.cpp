#include <fstream>
#include <map>

#include "valpat/serialize.hpp"
#include "valpat/trainer.hpp"

namespace valpat {

namespace {

constexpr char kMagic[8] = {'V', 'P', 'A', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

/// Every tensor the checkpoint carries, in a fixed order: trainable params
/// (query towers, classifier query branch, tau'), key towers, classifier key
/// branch, attribute weights.
std::vector<std::pair<std::string, const Matrix*>> named_tensors(TrainerState& state) {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (const nn::Param* p : state.trainable_params()) out.emplace_back(p->name, &p->value);
  for (const nn::Param* p : state.key_param_list()) out.emplace_back(p->name, &p->value);
  out.emplace_back("classifier.weight_k", &state.classifier.weight_k);
  out.emplace_back("classifier.bias_k", &state.classifier.bias_k);
  out.emplace_back("attribute_weights", nullptr);  // handled specially (vector)
  return out;
}

void write_queue(BinaryWriter& w, const NegativeQueue<Scalar>& queue) {
  w.write_matrix<Scalar>(queue.raw_buffer());
  w.write_u64(static_cast<std::uint64_t>(queue.write_ptr()));
  w.write_u64(static_cast<std::uint64_t>(queue.filled()));
}

void read_queue(BinaryReader& r, NegativeQueue<Scalar>& queue) {
  const Matrix buffer = r.read_matrix<Scalar>();
  const auto write_ptr = static_cast<Index>(r.read_u64());
  const auto filled = static_cast<Index>(r.read_u64());
  queue.restore(buffer, write_ptr, filled);
}

}  // namespace

void save_checkpoint(TrainerState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  VALPAT_REQUIRE(out.good(), "cannot open '", path, "' for writing");
  BinaryWriter w(out);

  w.write_bytes(kMagic, sizeof kMagic);
  w.write_u32(kFormatVersion);
  w.write_u64(state.cfg.hash());
  w.write_u64(state.step);
  w.write_f64(state.tau_prime_value());
  w.write_string(state.rng.state_string());
  w.write_string(tokenizer_to_text(state.tokenizer));

  w.write_u64(state.epoch_perm.size());
  for (std::uint32_t v : state.epoch_perm) w.write_u64(v);

  const auto tensors = named_tensors(state);
  w.write_u64(tensors.size());
  for (const auto& [name, matrix] : tensors) {
    w.write_string(name);
    if (matrix != nullptr) {
      w.write_matrix<Scalar>(*matrix);
    } else {
      Matrix weights = state.attribute_weights;
      if (weights.size() == 0) weights = Matrix::Zero(0, 1);
      w.write_matrix<Scalar>(weights);
    }
  }

  write_queue(w, state.queue_ssl);
  write_queue(w, state.queue_itc_img);
  write_queue(w, state.queue_itc_txt);
  w.write_u64(state.queue_ssl_sources.size());
  for (std::int64_t v : state.queue_ssl_sources) w.write_i64(v);

  w.write_u64(state.optimizer.steps_taken());
  w.write_u64(state.optimizer.moment1().size());
  for (std::size_t i = 0; i < state.optimizer.moment1().size(); ++i) {
    w.write_matrix<Scalar>(state.optimizer.moment1()[i]);
    w.write_matrix<Scalar>(state.optimizer.moment2()[i]);
  }
  VALPAT_REQUIRE(out.good(), "write to '", path, "' failed");
}

namespace {

struct Header {
  std::uint64_t config_hash;
  std::uint64_t step;
  Scalar tau_prime;
  std::string rng_state;
  std::string tokenizer_text;
  std::vector<std::uint32_t> epoch_perm;
};

Header read_header(BinaryReader& r, const std::string& path) {
  char magic[8];
  r.read_bytes(magic, sizeof magic);
  VALPAT_REQUIRE(std::equal(magic, magic + 8, kMagic), "'", path, "' is not a checkpoint file");
  const std::uint32_t version = r.read_u32();
  VALPAT_REQUIRE(version == kFormatVersion, "checkpoint '", path, "': format version ", version,
                 " is not supported (expected ", kFormatVersion, ")");
  Header h;
  h.config_hash = r.read_u64();
  h.step = r.read_u64();
  h.tau_prime = r.read_f64();
  h.rng_state = r.read_string();
  h.tokenizer_text = r.read_string();
  const std::uint64_t perm_size = r.read_u64();
  VALPAT_REQUIRE(perm_size < (1ull << 40), "checkpoint '", path, "': corrupt permutation size");
  h.epoch_perm.resize(perm_size);
  for (auto& v : h.epoch_perm) v = static_cast<std::uint32_t>(r.read_u64());
  return h;
}

}  // namespace

TrainerState load_checkpoint(const std::string& path, const TrainConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  VALPAT_REQUIRE(in.good(), "cannot open checkpoint '", path, "'");
  BinaryReader r(in, cat("checkpoint '", path, "'"));

  const Header header = read_header(r, path);
  VALPAT_REQUIRE(header.config_hash == cfg.hash(), "checkpoint '", path,
                 "' was written with a different configuration (hash ", header.config_hash,
                 " != ", cfg.hash(), "); resuming with a changed config is not supported");

  const std::uint64_t tensor_count = r.read_u64();
  std::map<std::string, Matrix> tensors;
  for (std::uint64_t i = 0; i < tensor_count; ++i) {
    const std::string name = r.read_string();
    tensors[name] = r.read_matrix<Scalar>();
  }

  auto take = [&](const std::string& name) -> Matrix {
    auto found = tensors.find(name);
    VALPAT_REQUIRE(found != tensors.end(), "checkpoint '", path, "': missing tensor '", name,
                   "'");
    return found->second;
  };

  const Matrix stored_weights = take("attribute_weights");
  Vector attribute_weights;
  if (stored_weights.size() > 0) attribute_weights = stored_weights.col(0);

  TrainerState state = build_trainer_skeleton(
      cfg, tokenizer_from_text(header.tokenizer_text, cfg.tokenizer.max_length),
      attribute_weights);

  auto restore_params = [&](const nn::ParamList& params) {
    for (nn::Param* p : params) {
      const Matrix stored = take(p->name);
      VALPAT_REQUIRE(stored.rows() == p->value.rows() && stored.cols() == p->value.cols(),
                     "checkpoint '", path, "': tensor '", p->name, "' has shape ", stored.rows(),
                     "x", stored.cols(), ", model expects ", p->value.rows(), "x",
                     p->value.cols());
      p->value = stored;
    }
  };
  restore_params(state.trainable_params());
  restore_params(state.key_param_list());
  state.classifier.weight_k = take("classifier.weight_k");
  state.classifier.bias_k = take("classifier.bias_k");

  read_queue(r, state.queue_ssl);
  read_queue(r, state.queue_itc_img);
  read_queue(r, state.queue_itc_txt);
  const std::uint64_t source_count = r.read_u64();
  VALPAT_REQUIRE(source_count == state.queue_ssl_sources.size(), "checkpoint '", path,
                 "': queue source ring size mismatch");
  for (auto& v : state.queue_ssl_sources) v = r.read_i64();

  const std::uint64_t opt_t = r.read_u64();
  const std::uint64_t slot_count = r.read_u64();
  const std::size_t expected_slots = state.trainable_params().size();
  VALPAT_REQUIRE(slot_count == expected_slots, "checkpoint '", path, "': optimizer slot count ",
                 slot_count, " != ", expected_slots);
  std::vector<Matrix> m1(slot_count), m2(slot_count);
  for (std::uint64_t i = 0; i < slot_count; ++i) {
    m1[i] = r.read_matrix<Scalar>();
    m2[i] = r.read_matrix<Scalar>();
  }
  state.optimizer.restore(std::move(m1), std::move(m2), opt_t);

  state.step = header.step;
  state.epoch_perm = header.epoch_perm;
  state.rng.restore_state(header.rng_state);
  state.tau_prime.value(0, 0) = header.tau_prime;
  return state;
}

CheckpointInfo inspect_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  VALPAT_REQUIRE(in.good(), "cannot open checkpoint '", path, "'");
  BinaryReader r(in, cat("checkpoint '", path, "'"));

  CheckpointInfo info;
  char magic[8];
  r.read_bytes(magic, sizeof magic);
  VALPAT_REQUIRE(std::equal(magic, magic + 8, kMagic), "'", path, "' is not a checkpoint file");
  info.format_version = r.read_u32();
  VALPAT_REQUIRE(info.format_version == kFormatVersion, "checkpoint '", path,
                 "': format version ", info.format_version, " is not supported (expected ",
                 kFormatVersion, ")");
  info.config_hash = r.read_u64();
  info.step = r.read_u64();
  info.tau_prime = r.read_f64();
  (void)r.read_string();  // rng state
  (void)r.read_string();  // tokenizer
  const std::uint64_t perm_size = r.read_u64();
  for (std::uint64_t i = 0; i < perm_size; ++i) (void)r.read_u64();

  const std::uint64_t tensor_count = r.read_u64();
  for (std::uint64_t i = 0; i < tensor_count; ++i) {
    const std::string name = r.read_string();
    const Matrix m = r.read_matrix<Scalar>();
    info.tensors.emplace_back(name, std::make_pair(m.rows(), m.cols()));
  }
  return info;
}

}  // namespace valpat
