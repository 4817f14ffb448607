#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <string>

#include "kwslab/errors.hpp"
#include "kwslab/features.hpp"

namespace kws {

namespace {

double upper_frequency(const LfbeConfig& config) {
  return config.fmax_hz > 0.0 ? config.fmax_hz : config.sample_rate / 2.0;
}

std::vector<double> mel_edges(const LfbeConfig& config) {
  const double lo = hz_to_mel(config.fmin_hz);
  const double hi = hz_to_mel(upper_frequency(config));
  std::vector<double> edges(std::size_t(config.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * double(i) / double(config.n_mels + 1));
  return edges;
}

}  // namespace

std::vector<double> mel_center_frequencies(const LfbeConfig& config) {
  auto edges = mel_edges(config);
  return {edges.begin() + 1, edges.end() - 1};
}

RowMatrix<double> mel_filterbank(const LfbeConfig& config) {
  const Index bins = config.fft_size / 2 + 1;
  const auto edges = mel_edges(config);
  RowMatrix<double> fb = RowMatrix<double>::Zero(config.n_mels, bins);
  for (int m = 0; m < config.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (Index k = 0; k < bins; ++k) {
      const double f = double(k) * config.sample_rate / config.fft_size;
      if (f > left && f < right)
        fb(m, k) = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
    }
    const double area = fb.row(m).sum();
    if (area <= 0.0) throw ConfigError("mel filter " + std::to_string(m) + " covers no FFT bin");
    fb.row(m) /= area;
  }
  return fb;
}

Index lfbe_frame_count(Index samples, const LfbeConfig& config) {
  if (samples < config.frame_len) return 0;
  return (samples - config.frame_len) / config.frame_shift + 1;
}

FeatureMatrix compute_lfbe(const AudioBuffer& audio, const LfbeConfig& config) {
  if (audio.sample_rate != config.sample_rate)
    throw ConfigError("resample required: audio is " + std::to_string(audio.sample_rate) + " Hz, frontend expects " +
                      std::to_string(config.sample_rate) + " Hz");
  const Index n_frames = lfbe_frame_count(Index(audio.samples.size()), config);
  if (n_frames == 0)
    throw DataError("empty input: " + std::to_string(audio.samples.size()) + " samples is shorter than one " +
                    std::to_string(config.frame_len) + "-sample frame");

  const RowMatrix<double> fb = mel_filterbank(config);
  std::vector<double> hann(std::size_t(config.frame_len));
  for (int n = 0; n < config.frame_len; ++n)
    hann[std::size_t(n)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / double(config.frame_len - 1));

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(std::size_t(config.fft_size), 0.0);
  std::vector<std::complex<double>> spectrum;
  Vec<double> power(config.fft_size / 2 + 1);
  const double log_floor = std::log(config.energy_floor);

  FeatureMatrix out;
  out.frames.resize(n_frames, config.n_mels);
  out.frame_shift_ms = config.frame_shift * 1000 / config.sample_rate;
  out.frame_len_ms = config.frame_len * 1000 / config.sample_rate;
  for (Index t = 0; t < n_frames; ++t) {
    const float* src = audio.samples.data() + t * config.frame_shift;
    for (int n = 0; n < config.frame_len; ++n) frame[std::size_t(n)] = double(src[n]) * hann[std::size_t(n)];
    fft.fwd(spectrum, frame);
    for (Index k = 0; k < power.size(); ++k) power[k] = std::norm(spectrum[std::size_t(k)]);
    const Vec<double> energy = fb * power;
    for (int m = 0; m < config.n_mels; ++m)
      out.frames(t, m) = float(energy[m] > config.energy_floor ? std::log(energy[m]) : log_floor);
  }
  return out;
}

}  // namespace kws
