#pragma once

#include <vector>

#include "kwslab/model.hpp"
#include "kwslab/random.hpp"
#include "kwslab/synth.hpp"

namespace kws::test {

/// Same layer structure as the default detector with few channels, so that
/// finite differences over whole utterances stay cheap.
inline ArchConfig tiny_arch() {
  ArchConfig a;
  a.conv = {{2, 5, 5, 1, 1}, {2, 3, 3, 3, 1}, {3, 3, 3, 1, 1}, {3, 3, 3, 1, 1}, {3, 3, 3, 1, 1}};
  a.fc = {6, 4, 2};
  return a;
}

/// Initialised parameters with small positive biases so that every relu
/// stays active and the posterior track has no exact ties.
inline ModelParams<double> lively_params(const ArchConfig& arch, std::uint64_t seed) {
  auto p = ModelParams<double>::init(arch, seed);
  Rng rng(seed ^ 0xb1a5);
  const auto shapes = arch.parameter_shapes();
  for (std::size_t i = 1; i < shapes.size(); i += 2)
    for (Index j = 0; j < p.tensors[i].size(); ++j) p.tensors[i].data[j] = rng.uniform(0.05, 0.3);
  return p;
}

/// LFBE-shaped random features: values in a typical log-energy range.
inline FeatureMatrix random_features(Rng& rng, Index frames, Index dims = 64) {
  FeatureMatrix f;
  f.frames.resize(frames, dims);
  for (Index i = 0; i < f.frames.size(); ++i) f.frames.data()[i] = float(rng.normal(0.0, 1.5));
  return f;
}

template <typename Scalar>
Tensor<Scalar> random_tensor(Rng& rng, Shape shape, double sd = 1.0) {
  Tensor<Scalar> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.data[i] = Scalar(rng.normal(0.0, sd));
  return t;
}

/// Random posterior track with rows on the simplex.
template <typename Scalar>
PosteriorTrack<Scalar> random_track(Rng& rng, Index rows) {
  PosteriorTrack<Scalar> t;
  t.probs.resize(rows, 2);
  t.frame_times_ms.resize(std::size_t(rows));
  for (Index i = 0; i < rows; ++i) {
    const Scalar p1 = Scalar(rng.uniform(0.001, 0.999));
    t.probs(i, 0) = Scalar(1) - p1;
    t.probs(i, 1) = p1;
    t.frame_times_ms[std::size_t(i)] = (75 + 10 * i) * 10;
  }
  return t;
}

}  // namespace kws::test
