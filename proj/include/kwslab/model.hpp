#pragma once

// Binary keyword detector: five convolutions (max-pool after the first,
// time-strided second) followed by three fully connected layers, applied to
// 76-frame LFBE windows.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kwslab/autodiff.hpp"
#include "kwslab/features.hpp"
#include "kwslab/random.hpp"
#include "kwslab/tensor.hpp"

namespace kws {

enum class Mode { train, eval };

struct ConvSpec {
  Index out_channels = 0;
  Index kernel_h = 3;
  Index kernel_w = 3;
  Index stride_h = 1;
  Index stride_w = 1;
  bool operator==(const ConvSpec&) const = default;
};

/// Layer table of the detector. Defaults are the small-footprint plan used
/// throughout the project; every entry can be overridden from a config file.
struct ArchConfig {
  Index input_frames = 76;
  Index input_dims = 64;
  std::vector<ConvSpec> conv = {
      {32, 5, 5, 1, 1}, {32, 3, 3, 3, 1}, {64, 3, 3, 1, 1}, {64, 3, 3, 1, 1}, {64, 3, 3, 1, 1}};
  Index pool_h = 2;
  Index pool_w = 2;
  std::vector<Index> fc = {128, 64, 2};
  double dropout_rate = 0.3;  // fully connected hidden layers
  bool conv_dropout = false;  // also drop convolution outputs

  bool operator==(const ArchConfig&) const = default;

  /// Throws ConfigError unless the layers chain for a 1 x frames x dims input
  /// and the last layer has two outputs.
  void validate() const;

  /// [C,H,W] after each convolution block (post-pool for the first).
  std::vector<Shape> activation_shapes() const;

  /// Shapes in storage order: (kernels, bias) per conv, then (weights, bias) per fc.
  std::vector<Shape> parameter_shapes() const;
  std::vector<std::string> parameter_names() const;
  Index parameter_count() const;
};

template <typename Scalar>
struct ModelParams {
  ArchConfig arch;
  std::vector<Tensor<Scalar>> tensors;

  static ModelParams zeros(const ArchConfig& arch) {
    arch.validate();
    ModelParams p;
    p.arch = arch;
    for (const auto& s : arch.parameter_shapes()) p.tensors.emplace_back(s);
    return p;
  }

  /// Fan-in scaled uniform weights, zero biases.
  static ModelParams init(const ArchConfig& arch, std::uint64_t seed) {
    ModelParams p = zeros(arch);
    Rng rng(derive_seed(seed, 0x1417ULL));
    for (std::size_t i = 0; i < p.tensors.size(); i += 2) {
      auto& w = p.tensors[i];
      const Index fan_in = w.size() / w.dim(0);
      const double limit = std::sqrt(6.0 / double(fan_in));
      for (Index j = 0; j < w.size(); ++j) w.data[j] = Scalar(rng.uniform(-limit, limit));
    }
    return p;
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    out.arch = arch;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<Other>());
    return out;
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
};

/// Gradient accumulators shaped like a parameter set.
template <typename Scalar>
std::vector<Tensor<Scalar>> zero_gradients(const ModelParams<Scalar>& params) {
  std::vector<Tensor<Scalar>> grads;
  for (const auto& t : params.tensors) grads.emplace_back(t.shape);
  return grads;
}

/// Per-utterance sequence of class posteriors, one row per window.
template <typename Scalar>
struct PosteriorTrack {
  RowMatrix<Scalar> probs;                  // (T+1) x K; column 0 non-keyword, 1 keyword
  std::vector<std::int64_t> frame_times_ms;  // time of each window's last frame

  Index rows() const { return probs.rows(); }
  Index classes() const { return probs.cols(); }
};

/// Forward graph of one window: logits and softmax posteriors.
template <typename Scalar>
struct WindowGraph {
  ad::Var<Scalar> logits;
  ad::Var<Scalar> probs;
};

/// Records the detector on `tape` for one [1,frames,dims] window. Gradients
/// reach `grad_sinks` (when given) after a backward pass on this tape.
template <typename Scalar>
WindowGraph<Scalar> build_forward(ad::Tape<Scalar>& tape, const ModelParams<Scalar>& params,
                                  ad::Var<Scalar> window, Mode mode, Rng& rng,
                                  std::vector<Tensor<Scalar>>* grad_sinks = nullptr) {
  const auto& arch = params.arch;
  if (window.shape() != Shape{1, arch.input_frames, arch.input_dims})
    throw DimensionError("model window must be [1," + std::to_string(arch.input_frames) + "," +
                         std::to_string(arch.input_dims) + "], got " + shape_string(window.shape()));
  std::vector<ad::Var<Scalar>> p;
  p.reserve(params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    p.push_back(tape.parameter(params.tensors[i], grad_sinks ? &(*grad_sinks)[i] : nullptr));

  const bool training = mode == Mode::train;
  ad::Var<Scalar> h = window;
  for (std::size_t l = 0; l < arch.conv.size(); ++l) {
    const auto& c = arch.conv[l];
    h = ad::relu(ad::conv2d(h, p[2 * l], p[2 * l + 1], ad::Stride{c.stride_h, c.stride_w}));
    if (l == 0) h = ad::max_pool2d(h, arch.pool_h, arch.pool_w);
    if (arch.conv_dropout) h = ad::dropout(h, arch.dropout_rate, rng, training);
  }
  const std::size_t base = 2 * arch.conv.size();
  for (std::size_t l = 0; l < arch.fc.size(); ++l) {
    h = ad::affine(h, p[base + 2 * l], p[base + 2 * l + 1]);
    if (l + 1 < arch.fc.size()) h = ad::dropout(ad::relu(h), arch.dropout_rate, rng, training);
  }
  return {h, ad::softmax(h)};
}

/// Copies feature rows [first, first+frames) into a [1,frames,dims] tensor.
template <typename Scalar>
Tensor<Scalar> window_tensor(const FeatureMatrix& features, Index first, Index frames) {
  const Index dims = features.frames.cols();
  Tensor<Scalar> t({1, frames, dims});
  t.matrix(frames, dims) = features.frames.middleRows(first, frames).template cast<Scalar>();
  return t;
}

/// Posterior pair (p0, p1) for a single window. Train mode draws dropout masks from `rng`.
template <typename Scalar>
std::pair<Scalar, Scalar> model_forward(const ModelParams<Scalar>& params, const FeatureMatrix& window,
                                        Mode mode, Rng& rng) {
  if (window.frames.rows() != params.arch.input_frames || window.frames.cols() != params.arch.input_dims)
    throw DimensionError("model_forward: window must be " + std::to_string(params.arch.input_frames) + "x" +
                         std::to_string(params.arch.input_dims) + ", got " +
                         std::to_string(window.frames.rows()) + "x" + std::to_string(window.frames.cols()));
  ad::Tape<Scalar> tape;
  auto x = tape.constant(window_tensor<Scalar>(window, 0, params.arch.input_frames));
  auto g = build_forward(tape, params, x, mode, rng);
  const auto& p = g.probs.value().data;
  return {p[0], p[1]};
}

/// Number of windows for an utterance of `frames` rows; zero when too short.
inline Index track_length(Index frames, Index window, Index stride) {
  if (stride < 1) throw ConfigError("posterior stride must be >= 1");
  if (frames < window) return 0;
  return (frames - window) / stride + 1;
}

/// Window graphs for a whole utterance, kept alive so that selected rows can
/// be back-propagated after the loss has looked at every posterior.
template <typename Scalar>
class TrackGraph {
 public:
  TrackGraph(const ModelParams<Scalar>& params, const FeatureMatrix& features, Index stride, Mode mode,
             Rng& rng, std::vector<Tensor<Scalar>>* grad_sinks = nullptr, Index first_frame = 0,
             Index frame_count = -1) {
    const Index frames = frame_count < 0 ? features.frames.rows() - first_frame : frame_count;
    const Index win = params.arch.input_frames;
    const Index rows = track_length(frames, win, stride);
    if (rows == 0)
      throw ContractViolation("utterance too short: " + std::to_string(frames) + " frames < window of " +
                              std::to_string(win));
    track_.probs.resize(rows, params.arch.fc.back());
    track_.frame_times_ms.resize(rows);
    tapes_.reserve(rows);
    for (Index i = 0; i < rows; ++i) {
      const Index start = first_frame + i * stride;
      tapes_.push_back(std::make_unique<ad::Tape<Scalar>>());
      auto& tape = *tapes_.back();
      auto x = tape.constant(window_tensor<Scalar>(features, start, win));
      probs_.push_back(build_forward(tape, params, x, mode, rng, grad_sinks).probs);
      track_.probs.row(i) = probs_.back().value().data.transpose();
      track_.frame_times_ms[i] = (start + win - 1) * features.frame_shift_ms;
    }
  }

  const PosteriorTrack<Scalar>& track() const { return track_; }

  /// Pushes dLoss/dprobs into the parameter gradient sinks. Rows whose
  /// gradient is exactly zero are skipped.
  void backward(const RowMatrix<Scalar>& grad_probs) {
    if (grad_probs.rows() != track_.rows() || grad_probs.cols() != track_.classes())
      throw DimensionError("track gradient shape mismatch");
    for (Index i = 0; i < grad_probs.rows(); ++i) {
      if ((grad_probs.row(i).array() == Scalar(0)).all()) continue;
      Tensor<Scalar> seed({grad_probs.cols()}, grad_probs.row(i).transpose());
      tapes_[std::size_t(i)]->backward(probs_[std::size_t(i)], seed);
    }
  }

 private:
  std::vector<std::unique_ptr<ad::Tape<Scalar>>> tapes_;
  std::vector<ad::Var<Scalar>> probs_;
  PosteriorTrack<Scalar> track_;
};

/// Slides the detector over `features` with the given stride. Row i covers
/// frames [i*stride, i*stride+76).
template <typename Scalar>
PosteriorTrack<Scalar> posterior_track(const ModelParams<Scalar>& params, const FeatureMatrix& features,
                                       Index stride, Mode mode, Rng& rng) {
  if (features.frames.rows() < params.arch.input_frames)
    throw ContractViolation("utterance too short: " + std::to_string(features.frames.rows()) +
                            " frames < window of " + std::to_string(params.arch.input_frames));
  const Index rows = track_length(features.frames.rows(), params.arch.input_frames, stride);
  PosteriorTrack<Scalar> track;
  track.probs.resize(rows, params.arch.fc.back());
  track.frame_times_ms.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    ad::Tape<Scalar> tape;
    auto x = tape.constant(window_tensor<Scalar>(features, i * stride, params.arch.input_frames));
    track.probs.row(i) = build_forward(tape, params, x, mode, rng).probs.value().data.transpose();
    track.frame_times_ms[i] = (i * stride + params.arch.input_frames - 1) * features.frame_shift_ms;
  }
  return track;
}

}  // namespace kws
