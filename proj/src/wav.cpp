#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "kwslab/errors.hpp"
#include "kwslab/features.hpp"

namespace kws {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV IO assumes a little-endian host");

struct Reader {
  const std::vector<char>& bytes;
  std::size_t pos = 0;
  std::string path;

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw DataError(path + ": " + what + " at byte offset " + std::to_string(at));
  }
  void need(std::size_t n) const {
    if (pos + n > bytes.size()) fail("truncated header", pos);
  }
  std::string tag() {
    need(4);
    std::string s(bytes.data() + pos, 4);
    pos += 4;
    return s;
  }
  template <typename T>
  T read() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{bytes, 0, path.string()};

  if (r.tag() != "RIFF") r.fail("missing RIFF tag", 0);
  r.read<std::uint32_t>();
  if (r.tag() != "WAVE") r.fail("missing WAVE tag", 8);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    const std::size_t chunk_at = r.pos;
    const std::string id = r.tag();
    const auto size = r.read<std::uint32_t>();
    const std::size_t body = r.pos;
    if (body + size > bytes.size()) r.fail("chunk '" + id + "' overruns file", chunk_at);
    if (id == "fmt ") {
      if (size < 16) r.fail("fmt chunk too small", chunk_at);
      format = r.read<std::uint16_t>();
      channels = r.read<std::uint16_t>();
      rate = r.read<std::uint32_t>();
      r.read<std::uint32_t>();
      r.read<std::uint16_t>();
      bits = r.read<std::uint16_t>();
      if (format == 0xFFFE && size >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: the real format code leads the subformat GUID.
        r.pos = body + 24;
        format = r.read<std::uint16_t>();
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) r.fail("data chunk before fmt chunk", chunk_at);
      if (channels != 1)
        throw DataError(path.string() + ": unsupported format: " + std::to_string(channels) +
                        " channels (mono only)");
      AudioBuffer audio;
      audio.sample_rate = int(rate);
      if (rate == 0) r.fail("zero sample rate", 24);
      if (format == 1 && bits == 16) {
        audio.samples.resize(size / 2);
        for (auto& s : audio.samples) s = float(r.read<std::int16_t>()) / 32768.0f;
      } else if (format == 3 && bits == 32) {
        audio.samples.resize(size / 4);
        for (auto& s : audio.samples) s = r.read<float>();
      } else {
        throw DataError(path.string() + ": unsupported format: code " + std::to_string(format) + ", " +
                        std::to_string(bits) + " bits");
      }
      return audio;
    }
    r.pos = body + size + (size & 1u);
    if (r.pos >= bytes.size()) r.fail("no data chunk", chunk_at);
  }
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const bool pcm = encoding == WavEncoding::pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const auto data_bytes = std::uint32_t(audio.samples.size() * (bits / 8));
  out.write("RIFF", 4);
  put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, pcm ? 1 : 3);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, std::uint32_t(audio.sample_rate));
  put<std::uint32_t>(out, std::uint32_t(audio.sample_rate) * (bits / 8));
  put<std::uint16_t>(out, bits / 8);
  put<std::uint16_t>(out, bits);
  out.write("data", 4);
  put<std::uint32_t>(out, data_bytes);
  for (float s : audio.samples) {
    if (pcm)
      put<std::int16_t>(out, std::int16_t(std::clamp(std::lround(double(s) * 32768.0), -32768L, 32767L)));
    else
      put<float>(out, s);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace kws
