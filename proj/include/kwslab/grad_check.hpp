#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "kwslab/autodiff.hpp"

namespace kws::ad {

/// Relative error used by every gradient check in the project.
template <typename Scalar>
Scalar relative_error(Scalar analytic, Scalar numeric) {
  return std::abs(analytic - numeric) / std::max(Scalar(1), std::abs(analytic));
}

/// Compares the tape gradient of `f` at `x` with central differences.
///
/// `f(tape, x)` must build a scalar node from the variable `x`. When
/// `coordinates` is empty every coordinate is checked. Returns the maximum
/// relative error |analytic - numeric| / max(1, |analytic|).
template <typename Scalar, typename F>
Scalar grad_check(F&& f, const Tensor<Scalar>& x, Scalar eps = Scalar(1e-4),
                  const std::vector<Index>& coordinates = {}) {
  if (!(eps > Scalar(0))) throw ContractViolation("grad_check: eps must be positive");
  Tensor<Scalar> analytic;
  {
    Tape<Scalar> tape;
    auto xv = tape.variable(x);
    auto root = f(tape, xv);
    tape.backward(root);
    analytic = tape.grad(xv);
  }
  auto evaluate = [&](const Tensor<Scalar>& point) {
    Tape<Scalar> tape;
    auto xv = tape.constant(point);
    return f(tape, xv).value().data[0];
  };
  std::vector<Index> coords = coordinates;
  if (coords.empty())
    for (Index i = 0; i < x.size(); ++i) coords.push_back(i);

  Scalar worst = 0;
  Tensor<Scalar> probe = x;
  for (Index i : coords) {
    const Scalar orig = probe.data[i];
    probe.data[i] = orig + eps;
    const Scalar up = evaluate(probe);
    probe.data[i] = orig - eps;
    const Scalar down = evaluate(probe);
    probe.data[i] = orig;
    const Scalar numeric = (up - down) / (Scalar(2) * eps);
    worst = std::max(worst, relative_error(analytic.data[i], numeric));
  }
  return worst;
}

}  // namespace kws::ad
