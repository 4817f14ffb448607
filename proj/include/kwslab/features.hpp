#pragma once

#include <filesystem>
#include <vector>

#include "kwslab/tensor.hpp"

namespace kws {

/// Mono PCM samples in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = 16000;
};

/// T' x 64 log-mel energies, 25 ms frames every 10 ms.
struct FeatureMatrix {
  RowMatrix<float> frames;
  int frame_shift_ms = 10;
  int frame_len_ms = 25;
};

struct LfbeConfig {
  int n_mels = 64;
  double fmin_hz = 60.0;
  double fmax_hz = 0.0;  // 0 means sample_rate / 2
  double energy_floor = 1e-10;
  int frame_len = 400;
  int frame_shift = 160;
  int fft_size = 512;
  int sample_rate = 16000;
};

/// HTK mel scale.
inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filters over the fft_size/2+1 power bins, each row summing to one.
RowMatrix<double> mel_filterbank(const LfbeConfig& config);

/// Centre frequency of every mel filter, in Hz.
std::vector<double> mel_center_frequencies(const LfbeConfig& config);

/// Number of full frames in `samples` samples.
Index lfbe_frame_count(Index samples, const LfbeConfig& config = {});

/// Hann window, 512-point power spectrum, mel filterbank, natural log with floor.
FeatureMatrix compute_lfbe(const AudioBuffer& audio, const LfbeConfig& config = {});

/// Reads a mono RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
AudioBuffer read_wav(const std::filesystem::path& path);

enum class WavEncoding { pcm16, float32 };

/// Writes a mono WAV. pcm16 rounds to the nearest of 65536 levels.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::float32);

}  // namespace kws
