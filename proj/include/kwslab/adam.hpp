#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kwslab/errors.hpp"
#include "kwslab/model.hpp"

namespace kws {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;
  std::int64_t step = 0;

  static AdamState init(const ModelParams<Scalar>& params) {
    AdamState s;
    s.m = zero_gradients(params);
    s.v = zero_gradients(params);
    return s;
  }
};

/// One bias-corrected Adam update. A non-finite gradient aborts the step
/// before anything is modified.
template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const std::vector<Tensor<Scalar>>& grads, AdamState<Scalar>& state,
               const AdamHyper& hyper) {
  if (grads.size() != params.tensors.size() || state.m.size() != params.tensors.size() ||
      state.v.size() != params.tensors.size())
    throw DimensionError("adam_step: parameter/gradient/moment counts differ");
  const auto names = params.arch.parameter_names();
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape != params.tensors[i].shape || state.m[i].shape != params.tensors[i].shape)
      throw DimensionError("adam_step: shape mismatch for " + names[i]);
    if (!grads[i].data.allFinite()) throw NumericError("non-finite gradient for parameter " + names[i]);
  }

  ++state.step;
  const auto t = double(state.step);
  const Scalar b1 = Scalar(hyper.beta1), b2 = Scalar(hyper.beta2);
  const Scalar c1 = Scalar(1.0 / (1.0 - std::pow(hyper.beta1, t)));
  const Scalar c2 = Scalar(1.0 / (1.0 - std::pow(hyper.beta2, t)));
  const Scalar lr = Scalar(hyper.lr), eps = Scalar(hyper.epsilon);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto g = grads[i].data.array();
    auto m = state.m[i].data.array();
    auto v = state.v[i].data.array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    params.tensors[i].data.array() -= lr * (m * c1) / ((v * c2).sqrt() + eps);
  }
}

}  // namespace kws
