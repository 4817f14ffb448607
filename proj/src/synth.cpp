#include "kwslab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kws {

namespace {

constexpr double kRidgeWidthBins = 1.2;
constexpr int kMelBins = 64;

struct Ridge {
  Index first = 0;  // frame
  Index count = 0;
  double bin_start = 0.0;
  double bin_end = 0.0;
  double amplitude = 0.0;  // linear energy
};

void render(RowMatrix<double>& energy, const Ridge& r) {
  for (Index k = 0; k < r.count; ++k) {
    const Index t = r.first + k;
    if (t < 0 || t >= energy.rows()) continue;
    const double frac = r.count > 1 ? double(k) / double(r.count - 1) : 0.0;
    const double centre = r.bin_start + (r.bin_end - r.bin_start) * frac;
    const double taper = std::min({1.0, double(k + 1) / 2.0, double(r.count - k) / 2.0});
    for (int m = 0; m < kMelBins; ++m) {
      const double z = (m - centre) / kRidgeWidthBins;
      if (std::abs(z) > 5.0) continue;
      energy(t, m) += r.amplitude * taper * std::exp(-0.5 * z * z);
    }
  }
}

/// Renders glyph segments [first_seg, last_seg] of a keyword of `length` frames.
void render_glyph(RowMatrix<double>& energy, Rng& rng, Index start, Index length, double bin_offset,
                  double amplitude, int first_seg, int last_seg) {
  const auto& ridges = keyword_glyph();
  const auto& seg_of = keyword_glyph_segments();
  std::vector<double> seg_gain(3);
  for (auto& g : seg_gain) g = rng.uniform(0.8, 1.2);
  for (std::size_t i = 0; i < ridges.size(); ++i) {
    const int seg = seg_of[i];
    if (seg < first_seg || seg > last_seg) continue;
    const auto& s = ridges[i];
    const Index a = start + Index(std::lround(s.t0 * double(length)));
    const Index b = start + Index(std::lround(s.t1 * double(length)));
    render(energy, {a, b - a, s.bin_start + bin_offset, s.bin_end + bin_offset, amplitude * seg_gain[std::size_t(seg)]});
  }
}

/// Correlated log-energy background with spectral tilt and a slow loudness drift.
RowMatrix<double> background(Rng& rng, Index frames, double level) {
  const double tilt = rng.uniform(0.5, 2.5);
  const double sigma = rng.uniform(0.6, 1.0);
  std::vector<double> colour(kMelBins);
  for (auto& c : colour) c = rng.normal(0.0, 0.3);

  RowMatrix<double> white(frames, kMelBins);
  for (Index t = 0; t < frames; ++t)
    for (int m = 0; m < kMelBins; ++m) white(t, m) = rng.normal();
  // AR(1) along time, unit stationary variance.
  const double rho = 0.7, innov = std::sqrt(1.0 - rho * rho);
  for (Index t = 1; t < frames; ++t) white.row(t) = rho * white.row(t - 1) + innov * white.row(t);
  // [1 2 1] along frequency, rescaled to unit variance.
  RowMatrix<double> smooth(frames, kMelBins);
  for (Index t = 0; t < frames; ++t)
    for (int m = 0; m < kMelBins; ++m) {
      const double l = white(t, std::max(m - 1, 0)), c = white(t, m), r = white(t, std::min(m + 1, kMelBins - 1));
      smooth(t, m) = (l + 2.0 * c + r) / std::sqrt(6.0);
    }

  RowMatrix<double> bg(frames, kMelBins);
  double drift = 0.0;
  for (Index t = 0; t < frames; ++t) {
    drift = 0.97 * drift + 0.3 * std::sqrt(1.0 - 0.97 * 0.97) * rng.normal();
    for (int m = 0; m < kMelBins; ++m)
      bg(t, m) = level - tilt * double(m) / (kMelBins - 1) + colour[std::size_t(m)] + drift + sigma * smooth(t, m);
  }
  return bg;
}

Index ms_to_frames(double ms) { return Index(std::lround(ms / 10.0)); }

}  // namespace

const std::vector<GlyphSegment>& keyword_glyph() {
  static const std::vector<GlyphSegment> glyph = {
      {0.00, 0.30, 10.0, 22.0},  // rising chirp
      {0.30, 0.65, 32.0, 32.0},  // flat pair
      {0.30, 0.65, 44.0, 44.0},
      {0.65, 1.00, 56.0, 40.0},  // falling chirp, ends at the endpoint
  };
  return glyph;
}

const std::vector<int>& keyword_glyph_segments() {
  static const std::vector<int> seg = {0, 1, 1, 2};
  return seg;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::eval: return "eval";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "eval") return Split::eval;
  throw ConfigError("unknown split '" + name + "'");
}

void CorpusConfig::validate() const {
  auto check = [](const Range& r, const char* what) {
    if (!(r.lo > 0.0) || !(r.hi >= r.lo)) throw ConfigError(std::string("empty or non-positive range: ") + what);
  };
  check(utterance_len_ms, "utterance_len_ms");
  check(keyword_len_ms, "keyword_len_ms");
  if (!(snr_db.hi >= snr_db.lo)) throw ConfigError("empty range: snr_db");
  if (n_pos < 0 || n_neg < 0) throw ConfigError("example counts must be non-negative");
  if (jitter_ms < 0.0 || padding_ms < 0.0) throw ConfigError("jitter_ms and padding_ms must be non-negative");
  if (keyword_len_ms.lo < 40.0) throw ConfigError("keyword_len_ms must be at least 40 ms");
  if (utterance_len_ms.lo < keyword_len_ms.hi + 760.0)
    throw ConfigError("infeasible geometry: keyword up to " + std::to_string(keyword_len_ms.hi) +
                      " ms does not fit a " + std::to_string(utterance_len_ms.lo) +
                      " ms utterance with a 760 ms margin");
}

Index frames_for_duration_ms(double ms) {
  const auto samples = Index(std::lround(ms * 16.0));
  return lfbe_frame_count(samples);
}

Example gen_utterance(Rng& rng, Label label, const CorpusConfig& cfg, const std::string& id) {
  cfg.validate();
  Example ex;
  ex.id = id;
  ex.label = label;

  const Index frames = frames_for_duration_ms(rng.uniform(cfg.utterance_len_ms.lo, cfg.utterance_len_ms.hi));
  const double level = rng.uniform(-0.75, 2.25);  // background log-energy centred near zero
  const RowMatrix<double> bg = background(rng, frames, level);
  RowMatrix<double> energy = RowMatrix<double>::Zero(frames, kMelBins);
  auto amplitude_for = [&](double snr_db) { return std::exp(level) * std::pow(10.0, snr_db / 10.0); };

  const int clutter = int(rng.uniform_int(0, 2));
  for (int i = 0; i < clutter; ++i) {
    const Index len = rng.uniform_int(10, 30);
    const Index at = rng.uniform_int(0, std::max<Index>(0, frames - len));
    const double b0 = rng.uniform(4.0, 59.0);
    const double b1 = std::clamp(b0 + rng.uniform(-16.0, 16.0), 2.0, 61.0);
    render(energy, {at, len, b0, b1, amplitude_for(rng.uniform(0.0, 15.0))});
  }

  ex.snr_db = rng.uniform(cfg.snr_db.lo, cfg.snr_db.hi);
  const double bin_offset = rng.uniform(-2.0, 2.0);
  const Index length = std::max<Index>(4, ms_to_frames(rng.uniform(cfg.keyword_len_ms.lo, cfg.keyword_len_ms.hi)));
  const Index margin = 38;
  const Index start = rng.uniform_int(margin, std::max(margin, frames - length - margin));

  if (label == Label::keyword) {
    render_glyph(energy, rng, start, length, bin_offset, amplitude_for(ex.snr_db), 0, 2);
    ex.keyword_start = start;
    ex.endpoint_frame = start + length - 1;

    const Index jitter = ms_to_frames(cfg.jitter_ms);
    const Index pad = ms_to_frames(cfg.padding_ms);
    const Index j_start = rng.uniform_int(-jitter, jitter);
    const Index j_end = rng.uniform_int(-jitter, jitter);
    ex.est_endpoint = std::clamp<Index>(ex.endpoint_frame + j_end, 0, frames - 1);
    Index lo = std::min(start + j_start - pad, start - 1);
    Index hi = std::max(ex.endpoint_frame + j_end + pad, ex.endpoint_frame + 1);
    lo = std::max<Index>(lo, 0);
    hi = std::min<Index>(hi, frames - 1);
    // Widen to a full model window, evenly on both sides where room allows.
    const Index window = 76;
    while (hi - lo + 1 < window && (lo > 0 || hi < frames - 1)) {
      if (lo > 0) --lo;
      if (hi - lo + 1 < window && hi < frames - 1) ++hi;
    }
    ex.rough_start = lo;
    ex.rough_end = hi;
  } else {
    const double u = rng.uniform();
    if (u < 0.35)
      render_glyph(energy, rng, start, length, bin_offset, amplitude_for(ex.snr_db), 0, 1);
    else if (u < 0.5)
      render_glyph(energy, rng, start, length, bin_offset, amplitude_for(ex.snr_db), 0, 0);
    ex.rough_start = 0;
    ex.rough_end = frames - 1;
  }

  ex.features.frames.resize(frames, kMelBins);
  for (Index t = 0; t < frames; ++t)
    for (int m = 0; m < kMelBins; ++m)
      ex.features.frames(t, m) = float(std::log(std::exp(bg(t, m)) + energy(t, m)));
  return ex;
}

}  // namespace kws
