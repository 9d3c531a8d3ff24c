#include "speechrt/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "speechrt/errors.hpp"

namespace speechrt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

ArithmeticMode parse_mode(const std::string& s) {
  if (s == "deterministic") return ArithmeticMode::deterministic;
  if (s == "fast") return ArithmeticMode::fast;
  throw ConfigError("backbone.arithmetic must be deterministic or fast");
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get(const std::string& key, double fallback) const {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<double>(key, it->second);
}

std::uint64_t KeyValueConfig::get(const std::string& key, std::uint64_t fallback) const {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::uint64_t>(key, it->second);
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::size_t>(key, it->second);
}

int KeyValueConfig::get(const std::string& key, int fallback) const {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<int>(key, it->second);
}

std::vector<std::string> KeyValueConfig::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.contains(k)) out.push_back(k);
  return out;
}

RuntimeConfig RuntimeConfig::from(const KeyValueConfig& kv) {
  RuntimeConfig c;
  // Dimensions shared by several modules are set once.
  const auto width = kv.get_size("model.width", c.backbone.width);
  const auto levels = kv.get_size("model.levels", c.backbone.levels);
  const int vocab = kv.get("model.vocab", c.backbone.vocab);
  const int text_vocab = kv.get("model.text_vocab", c.backbone.text_vocab);

  c.reasoner.width = width;
  c.reasoner.text_vocab = text_vocab;
  c.reasoner.seed = kv.get("reasoner.seed", c.reasoner.seed);

  c.backbone.width = width;
  c.backbone.levels = levels;
  c.backbone.vocab = vocab;
  c.backbone.text_vocab = text_vocab;
  c.backbone.layers = kv.get_size("backbone.layers", c.backbone.layers);
  c.backbone.heads = kv.get_size("backbone.heads", c.backbone.heads);
  c.backbone.mlp_hidden = kv.get_size("backbone.mlp_hidden", c.backbone.mlp_hidden);
  c.backbone.context_limit = kv.get_size("backbone.context_limit", c.backbone.context_limit);
  c.backbone.seed = kv.get("backbone.seed", c.backbone.seed);
  c.backbone.mode = parse_mode(kv.get("backbone.arithmetic", std::string("deterministic")));

  c.refiner.backbone_width = width;
  c.refiner.levels = levels;
  c.refiner.vocab = vocab;
  c.refiner.width = kv.get_size("refiner.width", c.refiner.width);
  c.refiner.layers = kv.get_size("refiner.layers", c.refiner.layers);
  c.refiner.heads = kv.get_size("refiner.heads", c.refiner.heads);
  c.refiner.mlp_hidden = kv.get_size("refiner.mlp_hidden", c.refiner.mlp_hidden);
  c.refiner.seed = kv.get("refiner.seed", c.refiner.seed);

  c.codec.levels = levels;
  c.codec.vocab = vocab;
  c.codec.dim = kv.get_size("codec.dim", c.codec.dim);
  c.codec.frame_hop = kv.get_size("codec.frame_hop", c.codec.frame_hop);
  c.codec.sample_rate = kv.get("codec.sample_rate", c.codec.sample_rate);
  c.codec.tail_gain = kv.get("codec.tail_gain", c.codec.tail_gain);
  c.codec.seed = kv.get("codec.seed", c.codec.seed);
  c.codec.kmeans_iters = kv.get_size("codec.kmeans_iters", c.codec.kmeans_iters);
  c.codec_pool_speakers = kv.get_size("codec.pool_speakers", c.codec_pool_speakers);
  c.codec_pool_frames = kv.get_size("codec.pool_frames", c.codec_pool_frames);
  c.codec_pool_seed = kv.get("codec.pool_seed", c.codec_pool_seed);

  c.train.learning_rate = kv.get("train.learning_rate", c.train.learning_rate);
  c.train.momentum = kv.get("train.momentum", c.train.momentum);
  c.train.clip_norm = kv.get("train.clip_norm", c.train.clip_norm);
  c.train.batch_size = kv.get_size("train.batch_size", c.train.batch_size);
  c.train.frames = kv.get_size("train.frames", c.train.frames);
  c.train.ref_frames = kv.get_size("train.ref_frames", c.train.ref_frames);
  c.train.speakers = kv.get_size("train.speakers", c.train.speakers);
  c.train.seed = kv.get("train.seed", c.train.seed);
  c.train.prefetch = kv.get_size("train.prefetch", c.train.prefetch);

  c.decode_group = kv.get_size("stream.decode_group", c.decode_group);
  c.channel_capacity = kv.get_size("stream.channel_capacity", c.channel_capacity);

  if (auto unknown = kv.unused(); !unknown.empty()) throw ConfigError("unknown key '" + unknown.front() + "'");
  c.validate();
  return c;
}

void RuntimeConfig::validate() const {
  try {
    backbone.validate();
    refiner.validate();
    codec.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (reasoner.width != backbone.width || refiner.backbone_width != backbone.width)
    throw ConfigError("reasoner, backbone and refiner must agree on the hidden width");
  if (refiner.levels != backbone.levels || codec.levels != backbone.levels)
    throw ConfigError("backbone, refiner and codec must agree on the number of levels");
  if (refiner.vocab != backbone.vocab || codec.vocab != backbone.vocab)
    throw ConfigError("backbone, refiner and codec must agree on the codebook size");
  if (reasoner.text_vocab != backbone.text_vocab) throw ConfigError("text vocabulary sizes differ");
  if (decode_group == 0 || channel_capacity == 0) throw ConfigError("stream group and channel capacity must be positive");
  if (train.batch_size == 0 || train.frames == 0) throw ConfigError("batch size and frames must be positive");
}

std::string RuntimeConfig::to_text() const {
  std::ostringstream o;
  o.precision(17);
  o << "model.width = " << backbone.width << "\n"
    << "model.levels = " << backbone.levels << "\n"
    << "model.vocab = " << backbone.vocab << "\n"
    << "model.text_vocab = " << backbone.text_vocab << "\n"
    << "reasoner.seed = " << reasoner.seed << "\n"
    << "backbone.layers = " << backbone.layers << "\n"
    << "backbone.heads = " << backbone.heads << "\n"
    << "backbone.mlp_hidden = " << backbone.mlp_hidden << "\n"
    << "backbone.context_limit = " << backbone.context_limit << "\n"
    << "backbone.seed = " << backbone.seed << "\n"
    << "backbone.arithmetic = " << (backbone.mode == ArithmeticMode::fast ? "fast" : "deterministic") << "\n"
    << "refiner.width = " << refiner.width << "\n"
    << "refiner.layers = " << refiner.layers << "\n"
    << "refiner.heads = " << refiner.heads << "\n"
    << "refiner.mlp_hidden = " << refiner.mlp_hidden << "\n"
    << "refiner.seed = " << refiner.seed << "\n"
    << "codec.dim = " << codec.dim << "\n"
    << "codec.frame_hop = " << codec.frame_hop << "\n"
    << "codec.sample_rate = " << codec.sample_rate << "\n"
    << "codec.tail_gain = " << codec.tail_gain << "\n"
    << "codec.seed = " << codec.seed << "\n"
    << "codec.kmeans_iters = " << codec.kmeans_iters << "\n"
    << "codec.pool_speakers = " << codec_pool_speakers << "\n"
    << "codec.pool_frames = " << codec_pool_frames << "\n"
    << "codec.pool_seed = " << codec_pool_seed << "\n"
    << "train.learning_rate = " << train.learning_rate << "\n"
    << "train.momentum = " << train.momentum << "\n"
    << "train.clip_norm = " << train.clip_norm << "\n"
    << "train.batch_size = " << train.batch_size << "\n"
    << "train.frames = " << train.frames << "\n"
    << "train.ref_frames = " << train.ref_frames << "\n"
    << "train.speakers = " << train.speakers << "\n"
    << "train.seed = " << train.seed << "\n"
    << "train.prefetch = " << train.prefetch << "\n"
    << "stream.decode_group = " << decode_group << "\n"
    << "stream.channel_capacity = " << channel_capacity << "\n";
  return o.str();
}

}  // namespace speechrt
