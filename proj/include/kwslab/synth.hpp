#pragma once

// Synthetic keyword corpus generated directly in LFBE space.
//
// Background is tilted, temporally correlated log-energy noise. The keyword
// is a fixed three-segment glyph (rising chirp, flat harmonic pair, falling
// chirp) whose last frame is the exact endpoint. Negatives may contain the
// first one or two segments on their own, so a detector that fires before
// the third segment pays in false accepts.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kwslab/features.hpp"
#include "kwslab/losses.hpp"
#include "kwslab/random.hpp"

namespace kws {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

struct CorpusConfig {
  int n_pos = 1250;
  int n_neg = 1250;
  Range utterance_len_ms{1500.0, 3000.0};
  Range keyword_len_ms{400.0, 700.0};
  Range snr_db{5.0, 20.0};
  double jitter_ms = 100.0;   // rough bounds move by U(-jitter, +jitter)
  double padding_ms = 200.0;  // then widen by this much on each side
  std::uint64_t seed = 7;

  bool operator==(const CorpusConfig&) const = default;

  /// Throws ConfigError for empty ranges or when the keyword cannot fit in the
  /// shortest utterance with a 760 ms margin.
  void validate() const;
};

enum class Split { train, dev, eval };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct Example {
  std::string id;
  Label label = Label::non_keyword;
  Split split = Split::train;
  FeatureMatrix features;
  Index keyword_start = -1;  // first keyword frame, positives only
  Index endpoint_frame = -1; // last keyword frame, positives only
  Index est_endpoint = -1;   // endpoint plus alignment jitter, positives only
  Index rough_start = 0;     // inclusive frame range used for training crops
  Index rough_end = 0;
  double snr_db = 0.0;

  Index frames() const { return features.frames.rows(); }
  Index rough_length() const { return rough_end - rough_start + 1; }
};

/// One segment of the keyword glyph in normalised time.
struct GlyphSegment {
  double t0 = 0.0;  // fraction of keyword length
  double t1 = 0.0;
  double bin_start = 0.0;
  double bin_end = 0.0;
};

/// The keyword family: ridges (several per segment are allowed).
const std::vector<GlyphSegment>& keyword_glyph();

/// Index of the glyph segment each ridge belongs to (0, 1 or 2).
const std::vector<int>& keyword_glyph_segments();

/// Frames in an utterance of the given duration (16 kHz, 25/10 ms framing).
Index frames_for_duration_ms(double ms);

/// Generates one example from `rng`.
Example gen_utterance(Rng& rng, Label label, const CorpusConfig& cfg, const std::string& id = "");

struct CorpusSummary {
  std::map<Split, int> split_sizes;
  std::uint64_t manifest_checksum = 0;
};

/// Writes manifest.txt and features.bin into `out_dir`.
CorpusSummary build_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir);

/// Examples of one split in manifest order.
std::vector<Example> load_dataset(const std::filesystem::path& dir, Split split);

/// FNV-1a of the manifest bytes; identifies a corpus.
std::uint64_t dataset_checksum(const std::filesystem::path& dir);

/// Split assignment by id hash: floor(0.8 n) train, floor(0.1 n) dev, rest eval.
std::map<std::string, Split> assign_splits(const std::vector<std::string>& ids, std::uint64_t seed);

}  // namespace kws
