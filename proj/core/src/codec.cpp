#include "speechrt/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "speechrt/errors.hpp"

namespace speechrt {

void CodecConfig::validate() const {
  if (levels < 1) throw ConfigError("codec needs at least one level");
  if (vocab < 2) throw ConfigError("codebooks need at least 2 entries");
  if (dim < 1) throw ConfigError("codec feature width must be positive");
  if (frame_hop < dim) throw ConfigError("frame hop must be at least the feature width");
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
}

namespace {

// Distinct DCT-IV bin indices, spread roughly geometrically up to 0.7 * hop.
std::vector<std::size_t> basis_bins(std::size_t dim, std::size_t hop) {
  std::vector<std::size_t> bins(dim);
  const double top = 0.7 * static_cast<double>(hop);
  if (dim == 1) return {2 < hop ? 2u : 0u};
  if (top < static_cast<double>(dim + 2)) {
    std::iota(bins.begin(), bins.end(), 0);
    return bins;
  }
  const double growth = std::pow(top / 2.0, 1.0 / static_cast<double>(dim - 1));
  std::size_t prev = 1;
  for (std::size_t k = 0; k < dim; ++k) {
    const auto want = static_cast<std::size_t>(std::lround(2.0 * std::pow(growth, static_cast<double>(k))));
    bins[k] = std::max(prev + 1, want);
    prev = bins[k];
  }
  return bins;
}

double sq_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

RvqCodec::RvqCodec(CodecConfig cfg, std::vector<Codebook> codebooks) : cfg_(cfg), codebooks_(std::move(codebooks)) {
  cfg_.validate();
  if (codebooks_.size() != cfg_.levels) throw ShapeMismatch("codec needs exactly one codebook per level");
  for (std::size_t j = 0; j < codebooks_.size(); ++j) {
    const Matrix& e = codebooks_[j].entries;
    if (e.rows != static_cast<std::size_t>(cfg_.vocab) || e.cols != cfg_.dim)
      throw ShapeMismatch("codebook " + std::to_string(j) + " has the wrong shape");
    if (!all_finite(e.data)) throw ShapeMismatch("codebook " + std::to_string(j) + " has non-finite entries");
    codebooks_[j].level = j;
  }
  const std::size_t hop = cfg_.frame_hop;
  const auto bins = basis_bins(cfg_.dim, hop);
  basis_ = Matrix(cfg_.dim, hop);
  tail_ = Matrix(cfg_.dim, hop);
  const double norm = std::sqrt(2.0 / static_cast<double>(hop));
  const double decay = static_cast<double>(hop) / 6.0;
  for (std::size_t k = 0; k < cfg_.dim; ++k)
    for (std::size_t n = 0; n < hop; ++n) {
      const double b = norm * std::cos(std::numbers::pi / static_cast<double>(hop) * (static_cast<double>(n) + 0.5) *
                                       (static_cast<double>(bins[k]) + 0.5));
      basis_(k, n) = b;
      tail_(k, n) = cfg_.tail_gain * std::exp(-static_cast<double>(n) / decay) * b;
    }
}

int RvqCodec::nearest(std::size_t level, std::span<const double> residual) const {
  const Matrix& e = codebooks_[level].entries;
  const std::size_t candidates = level == 0 ? e.rows - 1 : e.rows;
  std::size_t best = 0;
  double best_d = sq_distance(residual, e.row(0));
  for (std::size_t i = 1; i < candidates; ++i) {
    const double d = sq_distance(residual, e.row(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return static_cast<int>(best);
}

std::vector<AcousticFrame> RvqCodec::encode(const Matrix& features, std::size_t levels) const {
  if (levels < 1 || levels > cfg_.levels) throw LevelOutOfRange("encode depth " + std::to_string(levels));
  if (features.cols != cfg_.dim)
    throw DimensionMismatch("feature width " + std::to_string(features.cols) + " != " + std::to_string(cfg_.dim));
  std::vector<AcousticFrame> frames;
  frames.reserve(features.rows);
  std::vector<double> residual(cfg_.dim);
  for (std::size_t t = 0; t < features.rows; ++t) {
    AcousticFrame f(cfg_.levels);
    const auto x = features.row(t);
    std::copy(x.begin(), x.end(), residual.begin());
    for (std::size_t j = 0; j < levels; ++j) {
      f[j] = nearest(j, residual);
      const auto c = codebooks_[j].entries.row(static_cast<std::size_t>(f[j]));
      for (std::size_t i = 0; i < cfg_.dim; ++i) residual[i] -= c[i];
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

Matrix RvqCodec::decode(std::span<const AcousticFrame> frames, std::size_t levels) const {
  if (levels < 1 || levels > cfg_.levels) throw LevelOutOfRange("decode depth " + std::to_string(levels));
  Matrix out(frames.size(), cfg_.dim);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() < levels) throw DimensionMismatch("frame has fewer levels than requested");
    auto row = out.row(t);
    for (std::size_t j = 0; j < levels; ++j) {
      const int code = frames[t][j];
      if (code < 0 || code >= cfg_.vocab) throw CodeOutOfRange("code " + std::to_string(code) + " at level " + std::to_string(j));
      const auto c = codebooks_[j].entries.row(static_cast<std::size_t>(code));
      for (std::size_t i = 0; i < cfg_.dim; ++i) row[i] += c[i];
    }
  }
  return out;
}

void RvqCodec::synthesize_frame(std::span<const double> current, std::span<const double> previous,
                                std::span<double> out) const {
  const std::size_t hop = cfg_.frame_hop;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < cfg_.dim; ++k) {
    const double a = current[k];
    const double* b = basis_.data.data() + k * hop;
    for (std::size_t n = 0; n < hop; ++n) out[n] += a * b[n];
  }
  if (!previous.empty())
    for (std::size_t k = 0; k < cfg_.dim; ++k) {
      const double a = previous[k];
      const double* b = tail_.data.data() + k * hop;
      for (std::size_t n = 0; n < hop; ++n) out[n] += a * b[n];
    }
  for (double& s : out) s = std::clamp(s, -1.0, 1.0);
}

Waveform RvqCodec::synthesize(const Matrix& features) const {
  if (features.rows == 0) throw EmptyInput("synthesis needs at least one frame");
  if (features.cols != cfg_.dim) throw DimensionMismatch("feature width differs from the codec width");
  Waveform w;
  w.sample_rate = cfg_.sample_rate;
  w.samples.resize(features.rows * cfg_.frame_hop);
  for (std::size_t t = 0; t < features.rows; ++t)
    synthesize_frame(features.row(t), t ? features.row(t - 1) : std::span<const double>{},
                     std::span<double>(w.samples).subspan(t * cfg_.frame_hop, cfg_.frame_hop));
  return w;
}

Matrix RvqCodec::analyze(const Waveform& wave) const {
  const std::size_t hop = cfg_.frame_hop;
  if (wave.samples.size() < hop)
    throw TooShort(std::to_string(wave.samples.size()) + " samples, need at least " + std::to_string(hop));
  const std::size_t L = wave.samples.size() / hop;
  Matrix out(L, cfg_.dim);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t k = 0; k < cfg_.dim; ++k) {
      double s = 0.0;
      for (std::size_t n = 0; n < hop; ++n) s += wave.samples[t * hop + n] * basis_(k, n);
      out(t, k) = s;
    }
  return out;
}

double RvqCodec::reconstruction_mse(const Matrix& features, std::size_t levels) const {
  const Matrix rec = decode(encode(features, levels), levels);
  double s = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double d = rec.data[i] - features.data[i];
    s += d * d;
  }
  return s / static_cast<double>(rec.size());
}

RvqCodec random_codec(const CodecConfig& cfg, double scale) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<Codebook> books;
  for (std::size_t j = 0; j < cfg.levels; ++j)
    books.push_back({j, random_normal(static_cast<std::size_t>(cfg.vocab), cfg.dim, scale / static_cast<double>(j + 1), rng)});
  return RvqCodec(cfg, std::move(books));
}

RvqCodec train_codec(const Matrix& pool, const CodecConfig& cfg) {
  cfg.validate();
  if (pool.rows == 0 || pool.cols != cfg.dim) throw DimensionMismatch("codec training pool has the wrong shape");
  std::mt19937_64 rng(cfg.seed);
  const auto V = static_cast<std::size_t>(cfg.vocab);
  const std::size_t k = V - 1;  // trained entries; index V-1 stays the zero codeword
  const std::size_t n = pool.rows;
  const std::size_t d = cfg.dim;
  Matrix residual = pool;
  std::vector<Codebook> books;
  std::vector<std::size_t> assign(n);

  for (std::size_t level = 0; level < cfg.levels; ++level) {
    Matrix centers(V, d);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::normal_distribution<double> jitter(0.0, 1e-3);
    for (std::size_t c = 0; c < k; ++c) {
      const auto src = residual.row(order[c % n]);
      for (std::size_t i = 0; i < d; ++i) centers(c, i) = src[i] + (c >= n ? jitter(rng) : 0.0);
    }

    for (std::size_t iter = 0; iter < cfg.kmeans_iters; ++iter) {
      for (std::size_t r = 0; r < n; ++r) {
        std::size_t best = 0;
        double best_d = sq_distance(residual.row(r), centers.row(0));
        for (std::size_t c = 1; c < k; ++c) {
          const double dist = sq_distance(residual.row(r), centers.row(c));
          if (dist < best_d) {
            best_d = dist;
            best = c;
          }
        }
        assign[r] = best;
      }
      Matrix sums(k, d);
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t r = 0; r < n; ++r) {
        ++counts[assign[r]];
        for (std::size_t i = 0; i < d; ++i) sums(assign[r], i) += residual(r, i);
      }
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) {
          const auto src = residual.row(pick(rng));
          for (std::size_t i = 0; i < d; ++i) centers(c, i) = src[i] + jitter(rng);
          continue;
        }
        for (std::size_t i = 0; i < d; ++i) centers(c, i) = sums(c, i) / static_cast<double>(counts[c]);
      }
    }
    books.push_back({level, centers});

    // Residuals for the next level follow the encoder's selection rule exactly.
    for (std::size_t r = 0; r < n; ++r) {
      std::size_t best = 0;
      double best_d = sq_distance(residual.row(r), centers.row(0));
      const std::size_t candidates = level == 0 ? V - 1 : V;
      for (std::size_t c = 1; c < candidates; ++c) {
        const double dist = sq_distance(residual.row(r), centers.row(c));
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      for (std::size_t i = 0; i < d; ++i) residual(r, i) -= centers(best, i);
    }
  }
  return RvqCodec(cfg, std::move(books));
}

StreamingCodecDecoder::StreamingCodecDecoder(const RvqCodec& codec, std::size_t group)
    : codec_(codec), group_(group ? group : 1) {
  pending_.reserve(group_);
}

Waveform StreamingCodecDecoder::emit() {
  const Matrix features = codec_.decode(pending_, codec_.levels());
  const std::size_t hop = codec_.config().frame_hop;
  Waveform w;
  w.sample_rate = codec_.config().sample_rate;
  w.samples.resize(features.rows * hop);
  for (std::size_t t = 0; t < features.rows; ++t) {
    codec_.synthesize_frame(features.row(t), previous_, std::span<double>(w.samples).subspan(t * hop, hop));
    previous_.assign(features.row(t).begin(), features.row(t).end());
  }
  pending_.clear();
  return w;
}

std::optional<Waveform> StreamingCodecDecoder::push(const AcousticFrame& frame) {
  pending_.push_back(frame);
  if (pending_.size() < group_) return std::nullopt;
  return emit();
}

std::optional<Waveform> StreamingCodecDecoder::flush() {
  if (pending_.empty()) return std::nullopt;
  return emit();
}

std::vector<Waveform> codec_decode_batched(std::span<const AcousticFrame> frames, const RvqCodec& codec,
                                           std::size_t group) {
  StreamingCodecDecoder dec(codec, group);
  std::vector<Waveform> chunks;
  for (const auto& f : frames)
    if (auto w = dec.push(f)) chunks.push_back(std::move(*w));
  if (auto w = dec.flush()) chunks.push_back(std::move(*w));
  return chunks;
}

}  // namespace speechrt
