#include "valpat/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace valpat {

TrainConfig TrainConfig::desk_profile() {
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.warmup_epochs = 2;
  cfg.queue_capacity = 256;
  cfg.num_attributes = 16;
  cfg.embed_dim = 128;
  cfg.momentum_m = 0.99;
  cfg.image_encoder = ImageEncoderConfig{64, 32, 3, {16, 32, 64, 128}, 3, 2};
  cfg.text_encoder = TextEncoderConfig{2, 4, 128, 16, 0, 4};
  cfg.tokenizer = TokenizerConfig{16, 4096};
  return cfg;
}

void TrainConfig::validate() const {
  VALPAT_REQUIRE(epochs >= 1, "config: epochs must be >= 1");
  VALPAT_REQUIRE(batch_size >= 1, "config: batch_size must be >= 1");
  VALPAT_REQUIRE(batch_size <= queue_capacity, "config: batch_size (", batch_size,
                 ") must not exceed K (", queue_capacity, ")");
  VALPAT_REQUIRE(base_lr >= min_lr && min_lr > 0.0, "config: need base_lr >= min_lr > 0");
  VALPAT_REQUIRE(warmup_epochs < epochs, "config: warmup_epochs must be < epochs");
  VALPAT_REQUIRE(weight_decay >= 0.0, "config: weight_decay must be >= 0");
  VALPAT_REQUIRE(grad_clip > 0.0, "config: grad_clip must be > 0");
  VALPAT_REQUIRE(num_attributes >= 1, "config: M must be >= 1");
  VALPAT_REQUIRE(embed_dim >= 1, "config: D must be >= 1");
  VALPAT_REQUIRE(alpha >= 0.0 && alpha <= 1.0, "config: alpha must lie in [0,1]");
  VALPAT_REQUIRE(beta >= 0.0 && gamma >= 0.0, "config: beta and gamma must be >= 0");
  VALPAT_REQUIRE(tau > 0.0 && tau_prime_init > 0.0, "config: temperatures must be > 0");
  VALPAT_REQUIRE(momentum_m >= 0.0 && momentum_m <= 1.0, "config: momentum_m must lie in [0,1]");
  VALPAT_REQUIRE(toggles.ssl || toggles.itc || toggles.mac,
                 "config: at least one objective must be enabled");
  VALPAT_REQUIRE(!image_encoder.channels.empty(), "config: image encoder needs conv channels");
  VALPAT_REQUIRE(tokenizer.max_length == text_encoder.max_length,
                 "config: tokenizer.max_length (", tokenizer.max_length,
                 ") must equal encoder.text.max_length (", text_encoder.max_length, ")");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b])) != 0) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])) != 0) --e;
  return s.substr(b, e - b);
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  raise("config: key '", key, "' expects true/false, got '", value, "'");
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
  std::vector<int> out;
  std::istringstream is(value);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    VALPAT_REQUIRE(!item.empty(), "config: key '", key, "' has an empty list element");
    out.push_back(std::stoi(item));
  }
  VALPAT_REQUIRE(!out.empty(), "config: key '", key, "' expects a comma-separated list");
  return out;
}

std::string format_scalar(Scalar v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string format_int_list(const std::vector<int>& values) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) os << ',';
    os << values[i];
  }
  return os.str();
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto set_u64 = [](std::uint64_t TrainConfig::*field) {
      return [field](TrainConfig& c, const std::string& v, const std::string&) {
        c.*field = std::stoull(v);
      };
    };
    auto set_scalar = [](Scalar TrainConfig::*field) {
      return [field](TrainConfig& c, const std::string& v, const std::string&) {
        c.*field = std::stod(v);
      };
    };
    t["epochs"] = set_u64(&TrainConfig::epochs);
    t["batch_size"] = set_u64(&TrainConfig::batch_size);
    t["warmup_epochs"] = set_u64(&TrainConfig::warmup_epochs);
    t["seed"] = set_u64(&TrainConfig::seed);
    t["k"] = set_u64(&TrainConfig::queue_capacity);
    t["base_lr"] = set_scalar(&TrainConfig::base_lr);
    t["min_lr"] = set_scalar(&TrainConfig::min_lr);
    t["weight_decay"] = set_scalar(&TrainConfig::weight_decay);
    t["grad_clip"] = set_scalar(&TrainConfig::grad_clip);
    t["alpha"] = set_scalar(&TrainConfig::alpha);
    t["beta"] = set_scalar(&TrainConfig::beta);
    t["gamma"] = set_scalar(&TrainConfig::gamma);
    t["tau"] = set_scalar(&TrainConfig::tau);
    t["tau_prime_init"] = set_scalar(&TrainConfig::tau_prime_init);
    t["momentum_m"] = set_scalar(&TrainConfig::momentum_m);
    t["m"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.num_attributes = static_cast<Index>(std::stoll(v));
    };
    t["d"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.embed_dim = static_cast<Index>(std::stoll(v));
    };
    t["head_hidden"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.head_hidden = static_cast<Index>(std::stoll(v));
    };
    t["toggles.ssl"] = [](TrainConfig& c, const std::string& v, const std::string& k) {
      c.toggles.ssl = parse_bool(v, k);
    };
    t["toggles.itc"] = [](TrainConfig& c, const std::string& v, const std::string& k) {
      c.toggles.itc = parse_bool(v, k);
    };
    t["toggles.mac"] = [](TrainConfig& c, const std::string& v, const std::string& k) {
      c.toggles.mac = parse_bool(v, k);
    };
    t["toggles.mac_soft"] = [](TrainConfig& c, const std::string& v, const std::string& k) {
      c.toggles.mac_soft = parse_bool(v, k);
    };
    t["encoder.image.height"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.image_encoder.height = std::stoi(v);
    };
    t["encoder.image.width"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.image_encoder.width = std::stoi(v);
    };
    t["encoder.image.channels"] = [](TrainConfig& c, const std::string& v, const std::string& k) {
      c.image_encoder.channels = parse_int_list(v, k);
    };
    t["encoder.image.kernel"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.image_encoder.kernel = std::stoi(v);
    };
    t["encoder.image.stride"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.image_encoder.stride = std::stoi(v);
    };
    t["encoder.text.layers"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.text_encoder.layers = std::stoi(v);
    };
    t["encoder.text.heads"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.text_encoder.heads = std::stoi(v);
    };
    t["encoder.text.hidden"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.text_encoder.hidden = std::stoi(v);
    };
    t["encoder.text.mlp_ratio"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.text_encoder.mlp_ratio = std::stoi(v);
    };
    t["tokenizer.max_length"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.tokenizer.max_length = std::stoi(v);
      c.text_encoder.max_length = c.tokenizer.max_length;
    };
    t["tokenizer.max_vocab"] = [](TrainConfig& c, const std::string& v, const std::string&) {
      c.tokenizer.max_vocab = std::stoi(v);
    };
    auto augment_setter = [](bool heavy, auto field) {
      return [heavy, field](TrainConfig& c, const std::string& v, const std::string&) {
        (heavy ? c.heavy_augment : c.light_augment).*field = std::stod(v);
      };
    };
    t["augment.heavy.crop_scale_min"] =
        augment_setter(true, &AugmentationPolicy::crop_scale_min);
    t["augment.heavy.crop_scale_max"] =
        augment_setter(true, &AugmentationPolicy::crop_scale_max);
    t["augment.heavy.aspect_jitter"] = augment_setter(true, &AugmentationPolicy::aspect_jitter);
    t["augment.heavy.flip_prob"] = augment_setter(true, &AugmentationPolicy::flip_prob);
    t["augment.heavy.jitter_prob"] = augment_setter(true, &AugmentationPolicy::jitter_prob);
    t["augment.heavy.jitter_strength"] =
        augment_setter(true, &AugmentationPolicy::jitter_strength);
    t["augment.heavy.grayscale_prob"] =
        augment_setter(true, &AugmentationPolicy::grayscale_prob);
    t["augment.light.flip_prob"] = augment_setter(false, &AugmentationPolicy::flip_prob);
    auto stat_setter = [](int idx, bool is_mean) {
      return [idx, is_mean](TrainConfig& c, const std::string& v, const std::string&) {
        const Scalar s = std::stod(v);
        for (AugmentationPolicy* p : {&c.heavy_augment, &c.light_augment}) {
          (is_mean ? p->mean : p->stddev)[static_cast<std::size_t>(idx)] = s;
        }
      };
    };
    for (int i = 0; i < 3; ++i) {
      t[cat("augment.mean", i)] = stat_setter(i, true);
      t[cat("augment.std", i)] = stat_setter(i, false);
    }
    return t;
  }();
  return table;
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg = TrainConfig::desk_profile();
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    VALPAT_REQUIRE(eq != std::string::npos, "config line ", line_no, ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const std::string value = trim(line.substr(eq + 1));
    auto setter = setters().find(key);
    VALPAT_REQUIRE(setter != setters().end(), "config line ", line_no, ": unknown key '", key,
                   "'");
    try {
      setter->second(cfg, value, key);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      raise("config line ", line_no, ": cannot parse value '", value, "' for key '", key,
            "': ", e.what());
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  VALPAT_REQUIRE(in.good(), "cannot open config '", path, "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string serialize_config(const TrainConfig& config) {
  std::ostringstream os;
  os << "epochs = " << config.epochs << '\n';
  os << "batch_size = " << config.batch_size << '\n';
  os << "base_lr = " << format_scalar(config.base_lr) << '\n';
  os << "warmup_epochs = " << config.warmup_epochs << '\n';
  os << "min_lr = " << format_scalar(config.min_lr) << '\n';
  os << "weight_decay = " << format_scalar(config.weight_decay) << '\n';
  os << "grad_clip = " << format_scalar(config.grad_clip) << '\n';
  os << "k = " << config.queue_capacity << '\n';
  os << "m = " << config.num_attributes << '\n';
  os << "d = " << config.embed_dim << '\n';
  os << "head_hidden = " << config.head_hidden << '\n';
  os << "alpha = " << format_scalar(config.alpha) << '\n';
  os << "beta = " << format_scalar(config.beta) << '\n';
  os << "gamma = " << format_scalar(config.gamma) << '\n';
  os << "tau = " << format_scalar(config.tau) << '\n';
  os << "tau_prime_init = " << format_scalar(config.tau_prime_init) << '\n';
  os << "momentum_m = " << format_scalar(config.momentum_m) << '\n';
  os << "seed = " << config.seed << '\n';
  os << "toggles.ssl = " << (config.toggles.ssl ? "true" : "false") << '\n';
  os << "toggles.itc = " << (config.toggles.itc ? "true" : "false") << '\n';
  os << "toggles.mac = " << (config.toggles.mac ? "true" : "false") << '\n';
  os << "toggles.mac_soft = " << (config.toggles.mac_soft ? "true" : "false") << '\n';
  os << "encoder.image.height = " << config.image_encoder.height << '\n';
  os << "encoder.image.width = " << config.image_encoder.width << '\n';
  os << "encoder.image.channels = " << format_int_list(config.image_encoder.channels) << '\n';
  os << "encoder.image.kernel = " << config.image_encoder.kernel << '\n';
  os << "encoder.image.stride = " << config.image_encoder.stride << '\n';
  os << "encoder.text.layers = " << config.text_encoder.layers << '\n';
  os << "encoder.text.heads = " << config.text_encoder.heads << '\n';
  os << "encoder.text.hidden = " << config.text_encoder.hidden << '\n';
  os << "encoder.text.mlp_ratio = " << config.text_encoder.mlp_ratio << '\n';
  os << "tokenizer.max_length = " << config.tokenizer.max_length << '\n';
  os << "tokenizer.max_vocab = " << config.tokenizer.max_vocab << '\n';
  os << "augment.heavy.crop_scale_min = " << format_scalar(config.heavy_augment.crop_scale_min)
     << '\n';
  os << "augment.heavy.crop_scale_max = " << format_scalar(config.heavy_augment.crop_scale_max)
     << '\n';
  os << "augment.heavy.aspect_jitter = " << format_scalar(config.heavy_augment.aspect_jitter)
     << '\n';
  os << "augment.heavy.flip_prob = " << format_scalar(config.heavy_augment.flip_prob) << '\n';
  os << "augment.heavy.jitter_prob = " << format_scalar(config.heavy_augment.jitter_prob) << '\n';
  os << "augment.heavy.jitter_strength = " << format_scalar(config.heavy_augment.jitter_strength)
     << '\n';
  os << "augment.heavy.grayscale_prob = " << format_scalar(config.heavy_augment.grayscale_prob)
     << '\n';
  os << "augment.light.flip_prob = " << format_scalar(config.light_augment.flip_prob) << '\n';
  for (int i = 0; i < 3; ++i) {
    os << "augment.mean" << i << " = "
       << format_scalar(config.light_augment.mean[static_cast<std::size_t>(i)]) << '\n';
    os << "augment.std" << i << " = "
       << format_scalar(config.light_augment.stddev[static_cast<std::size_t>(i)]) << '\n';
  }
  return os.str();
}

void save_config(const std::string& path, const TrainConfig& config) {
  std::ofstream out(path, std::ios::binary);
  VALPAT_REQUIRE(out.good(), "cannot open '", path, "' for writing");
  out << serialize_config(config);
  VALPAT_REQUIRE(out.good(), "write to '", path, "' failed");
}

std::uint64_t TrainConfig::hash() const {
  // FNV-1a over the canonical serialization. The seed is excluded: it picks
  // the run, not the model structure, and checkpoints carry the live RNG
  // state anyway.
  TrainConfig canonical = *this;
  canonical.seed = 0;
  const std::string text = serialize_config(canonical);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace valpat
