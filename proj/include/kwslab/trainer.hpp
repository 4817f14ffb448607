#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kwslab/adam.hpp"
#include "kwslab/losses.hpp"
#include "kwslab/model.hpp"
#include "kwslab/synth.hpp"

namespace kws {

enum class LossKind { xe_aligned, max_pool, latency_mp, max_latency };

const char* loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::max_pool;
  ShiftDistribution dist;            // latency_mp
  MaxLatencyConfig max_latency;      // max_latency
};

struct TrainConfig {
  LossConfig loss;
  AdamHyper adam;
  int batch_size = 32;
  int epochs = 15;
  std::uint64_t seed = 1;
  Index posterior_stride = 10;
  ArchConfig arch;  // arch.dropout_rate is the training dropout rate
  bool record_wall_time = false;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_acc = 0.0;
  std::int64_t wall_ms = 0;
  int skipped = 0;  // degenerate max-latency masks
  int floored = 0;  // -log floor hits
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<EpochMetrics> metrics;
  std::vector<std::string> consumed_ids;  // example order across all epochs
};

/// Called after every epoch with the updated parameters.
using EpochCallback = std::function<void(const EpochMetrics&, const ModelParams<float>&)>;

/// Frame range of the crop the detector sees during training: the rough
/// segment for positives, the whole utterance for negatives.
struct Crop {
  Index first = 0;
  Index count = 0;
};
Crop training_crop(const Example& ex);

/// Row whose window ends closest to the estimated endpoint (earliest on ties).
Index aligned_row(const PosteriorTrack<float>& track, Index est_endpoint, int frame_shift_ms);
Index aligned_row(const PosteriorTrack<double>& track, Index est_endpoint, int frame_shift_ms);

template <typename Scalar>
struct ExampleOutcome {
  Scalar loss = 0;
  bool skipped = false;
  bool floored = false;
  Index frame = 0;
};

/// Loss for one example under `loss`, with gradients (scaled by
/// `grad_scale`) accumulated into `grads` when non-null.
template <typename Scalar>
ExampleOutcome<Scalar> example_loss(const ModelParams<Scalar>& params, const Example& ex, const LossConfig& loss,
                                    Index stride, Mode mode, Rng& dropout_rng, Rng& beta_rng,
                                    std::vector<Tensor<Scalar>>* grads, Scalar grad_scale = Scalar(1));

/// Seeds for the per-example random streams (dropout masks, loss shifts),
/// keyed by (seed, example id, epoch) so results do not depend on batch layout.
std::uint64_t dropout_seed(std::uint64_t seed, const std::string& id, int epoch);
std::uint64_t shift_seed(std::uint64_t seed, const std::string& id, int epoch);

/// Shuffled example order for an epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

struct DevMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Eval-mode max-pooling loss and accuracy (max keyword posterior >= 0.5)
/// over whole utterances.
DevMetrics dev_metrics(const ModelParams<float>& params, const std::vector<Example>& dev, Index stride);

/// Initial parameters for a config; identical for every loss variant.
ModelParams<float> initial_params(const TrainConfig& cfg);

TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const EpochCallback& on_epoch = {});

}  // namespace kws
