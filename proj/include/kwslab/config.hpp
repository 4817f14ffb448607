#pragma once

// INI configuration files.
//
// corpus.cfg
//   [corpus] n_pos n_neg utterance_min_ms utterance_max_ms keyword_min_ms
//            keyword_max_ms snr_min_db snr_max_db jitter_ms padding_ms seed
//
// train.cfg
//   [train] seed epochs batch_size posterior_stride record_wall_time
//   [adam]  lr beta1 beta2 epsilon
//   [loss]  type (xe_aligned|max_pool|latency_mp|max_latency)
//           dist (bernoulli:<b>|constant:<k>|poisson:<lambda>)  f
//   [arch]  input_frames input_dims conv_channels conv_kernels conv_strides
//           pool fc dropout_rate conv_dropout   (lists comma separated, shapes as HxW)
//   [eval]  frr debounce_ms
//
// Missing keys keep their defaults; unknown keys are errors. Overrides are
// "section.key=value" strings applied on top of the file.

#include <filesystem>
#include <string>
#include <vector>

#include "kwslab/evaluator.hpp"
#include "kwslab/synth.hpp"
#include "kwslab/trainer.hpp"

namespace kws {

struct RunConfig {
  TrainConfig train;
  EvalConfig eval;  // eval.stride follows train.posterior_stride
};

CorpusConfig parse_corpus_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides = {});

CorpusConfig load_corpus_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Canonical text for a config: every key, fixed order, round-trip precision.
/// Parsing the text yields an equal config.
std::string corpus_config_text(const CorpusConfig& cfg);
std::string run_config_text(const RunConfig& cfg);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace kws
