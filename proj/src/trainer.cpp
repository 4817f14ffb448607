#include "kwslab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace kws {

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::xe_aligned: return "xe_aligned";
    case LossKind::max_pool: return "max_pool";
    case LossKind::latency_mp: return "latency_mp";
    case LossKind::max_latency: return "max_latency";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "xe_aligned") return LossKind::xe_aligned;
  if (name == "max_pool") return LossKind::max_pool;
  if (name == "latency_mp") return LossKind::latency_mp;
  if (name == "max_latency") return LossKind::max_latency;
  throw ConfigError("unknown loss '" + name + "' (expected xe_aligned, max_pool, latency_mp or max_latency)");
}

void TrainConfig::validate() const {
  if (!(adam.lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ConfigError("Adam betas must be in [0,1)");
  if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (posterior_stride < 1) throw ConfigError("posterior_stride must be >= 1");
  if (loss.max_latency.f < 0) throw ConfigError("max-latency f must be >= 0");
  arch.validate();
}

Crop training_crop(const Example& ex) {
  if (ex.label == Label::keyword) return {ex.rough_start, ex.rough_length()};
  return {0, ex.frames()};
}

namespace {

template <typename Scalar>
Index aligned_row_impl(const PosteriorTrack<Scalar>& track, Index est_endpoint, int frame_shift_ms) {
  const std::int64_t target = std::int64_t(est_endpoint) * frame_shift_ms;
  Index best = 0;
  for (Index i = 1; i < track.rows(); ++i)
    if (std::llabs(track.frame_times_ms[std::size_t(i)] - target) <
        std::llabs(track.frame_times_ms[std::size_t(best)] - target))
      best = i;
  return best;
}

}  // namespace

Index aligned_row(const PosteriorTrack<float>& track, Index est_endpoint, int frame_shift_ms) {
  return aligned_row_impl(track, est_endpoint, frame_shift_ms);
}
Index aligned_row(const PosteriorTrack<double>& track, Index est_endpoint, int frame_shift_ms) {
  return aligned_row_impl(track, est_endpoint, frame_shift_ms);
}

template <typename Scalar>
ExampleOutcome<Scalar> example_loss(const ModelParams<Scalar>& params, const Example& ex, const LossConfig& loss,
                                    Index stride, Mode mode, Rng& dropout_rng, Rng& beta_rng,
                                    std::vector<Tensor<Scalar>>* grads, Scalar grad_scale) {
  const Crop crop = training_crop(ex);
  TrackGraph<Scalar> graph(params, ex.features, stride, mode, dropout_rng, grads, crop.first, crop.count);
  const auto& track = graph.track();
  const int shift = ex.features.frame_shift_ms;

  LossResult<Scalar> r;
  switch (loss.kind) {
    case LossKind::max_pool:
      r = max_pooling_xe_loss(ex.label, track);
      break;
    case LossKind::latency_mp:
      r = latency_controlled_loss(ex.label, track, loss.dist, beta_rng);
      break;
    case LossKind::xe_aligned:
      // Negatives have no alignment; they keep the hardest frame.
      r = ex.label == Label::keyword ? aligned_xe_loss(ex.label, track, aligned_row(track, ex.est_endpoint, shift))
                                     : max_pooling_xe_loss(ex.label, track);
      break;
    case LossKind::max_latency:
      if (ex.label == Label::keyword) {
        PosteriorTrack<Scalar> masked;
        try {
          masked = max_latency_mask(track, ex.est_endpoint, loss.max_latency, shift);
        } catch (const DegenerateMask&) {
          return {Scalar(0), true, false, 0};
        }
        r = max_pooling_xe_loss(ex.label, masked);
        RowMatrix<Scalar> full = RowMatrix<Scalar>::Zero(track.rows(), track.classes());
        full.topRows(masked.rows()) = r.grad;
        r.grad = std::move(full);
      } else {
        r = max_pooling_xe_loss(ex.label, track);
      }
      break;
  }
  if (grads) {
    r.grad *= grad_scale;
    graph.backward(r.grad);
  }
  return {r.value, false, r.floored, r.frame};
}

template ExampleOutcome<float> example_loss(const ModelParams<float>&, const Example&, const LossConfig&, Index, Mode,
                                            Rng&, Rng&, std::vector<Tensor<float>>*, float);
template ExampleOutcome<double> example_loss(const ModelParams<double>&, const Example&, const LossConfig&, Index,
                                             Mode, Rng&, Rng&, std::vector<Tensor<double>>*, double);

std::uint64_t dropout_seed(std::uint64_t seed, const std::string& id, int epoch) {
  return derive_seed(seed, 0xd0d0ULL, fnv1a(id), std::uint64_t(epoch));
}

std::uint64_t shift_seed(std::uint64_t seed, const std::string& id, int epoch) {
  return derive_seed(seed, 0xbe7aULL, fnv1a(id), std::uint64_t(epoch));
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x5407ULL, std::uint64_t(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[std::size_t(rng.uniform_int(0, std::int64_t(i - 1)))]);
  return order;
}

DevMetrics dev_metrics(const ModelParams<float>& params, const std::vector<Example>& dev, Index stride) {
  DevMetrics m;
  if (dev.empty()) return m;
  Rng unused(0);
  int correct = 0;
  double total = 0.0;
  for (const auto& ex : dev) {
    const auto track = posterior_track(params, ex.features, stride, Mode::eval, unused);
    total += double(max_pooling_xe_loss(ex.label, track).value);
    const bool fired = track.probs.col(1).maxCoeff() >= 0.5f;
    correct += fired == (ex.label == Label::keyword);
  }
  m.loss = total / double(dev.size());
  m.accuracy = double(correct) / double(dev.size());
  return m;
}

ModelParams<float> initial_params(const TrainConfig& cfg) {
  return ModelParams<double>::init(cfg.arch, cfg.seed).cast<float>();
}

TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  TrainResult result;
  result.params = initial_params(cfg);
  auto& params = result.params;
  auto state = AdamState<float>::init(params);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = epoch_order(train_set.size(), cfg.seed, epoch);
    EpochMetrics em;
    em.epoch = epoch;
    double loss_sum = 0.0;
    int used = 0, positives = 0, masked_positives = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + std::size_t(cfg.batch_size));
      auto grads = zero_gradients(params);
      int batch_used = 0;
      for (std::size_t k = begin; k < end; ++k) {
        const Example& ex = train_set[order[k]];
        result.consumed_ids.push_back(ex.id);
        Rng drop(dropout_seed(cfg.seed, ex.id, epoch));
        Rng shift(shift_seed(cfg.seed, ex.id, epoch));
        const auto out = example_loss(params, ex, cfg.loss, cfg.posterior_stride, Mode::train, drop, shift, &grads);
        if (ex.label == Label::keyword) ++positives;
        if (out.skipped) {
          ++em.skipped;
          if (ex.label == Label::keyword) ++masked_positives;
          continue;
        }
        em.floored += out.floored;
        loss_sum += double(out.loss);
        ++batch_used;
      }
      used += batch_used;
      if (batch_used == 0) continue;
      for (auto& g : grads) g.data /= float(batch_used);
      adam_step(params, grads, state, cfg.adam);
    }
    if (positives > 0 && masked_positives == positives)
      throw ConfigError("max-latency mask removed every positive example; increase f");

    em.train_loss = used ? loss_sum / used : 0.0;
    const auto dev = dev_metrics(params, dev_set, cfg.posterior_stride);
    em.dev_loss = dev.loss;
    em.dev_acc = dev.accuracy;
    if (cfg.record_wall_time)
      em.wall_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(em);
    if (on_epoch) on_epoch(em, params);
  }
  return result;
}

}  // namespace kws
