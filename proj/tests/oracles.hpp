#pragma once

// Independent reference computations shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <vector>

#include "kwslab/tensor.hpp"

namespace kws::test {

/// Reference log-mel energies of one frame: O(N^2) DFT and a filterbank
/// built from the mel formula directly.
inline std::vector<double> reference_lfbe_frame(const std::vector<float>& samples, Index start) {
  const int N = 400, F = 512, M = 64;
  std::vector<double> x(F, 0.0);
  for (int n = 0; n < N; ++n)
    x[std::size_t(n)] = samples[std::size_t(start + n)] * (0.5 - 0.5 * std::cos(2 * M_PI * n / (N - 1)));
  std::vector<double> power(F / 2 + 1);
  for (int k = 0; k <= F / 2; ++k) {
    double re = 0, im = 0;
    for (int n = 0; n < F; ++n) {
      re += x[std::size_t(n)] * std::cos(2 * M_PI * k * n / F);
      im -= x[std::size_t(n)] * std::sin(2 * M_PI * k * n / F);
    }
    power[std::size_t(k)] = re * re + im * im;
  }
  auto mel = [](double f) { return 1127.0 * std::log(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::exp(m / 1127.0) - 1.0); };
  std::vector<double> out(M);
  for (int m = 0; m < M; ++m) {
    const double step = (mel(8000.0) - mel(60.0)) / (M + 1);
    const double l = inv(mel(60.0) + m * step), c = inv(mel(60.0) + (m + 1) * step), r = inv(mel(60.0) + (m + 2) * step);
    double area = 0, e = 0;
    for (int k = 0; k <= F / 2; ++k) {
      const double f = k * 16000.0 / F;
      double w = 0;
      if (f > l && f <= c) w = (f - l) / (c - l);
      else if (f > c && f < r) w = (r - f) / (r - c);
      area += w;
      e += w * power[std::size_t(k)];
    }
    out[std::size_t(m)] = std::log(std::max(e / area, 1e-10));
  }
  return out;
}

}  // namespace kws::test
