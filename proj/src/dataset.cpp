// Dataset container.
//
// <dir>/manifest.txt   text, one record per line:
//   format=kwslab-dataset
//   version=1
//   config.<key>=<value>        corpus configuration snapshot
//   count=<n>
//   example id=<id> split=<train|dev|eval> label=<0|1> frames=<T> dims=<64>
//           keyword_start=<f> endpoint=<f> est_endpoint=<f> rough_start=<f>
//           rough_end=<f> snr_db=<x> offset=<byte> bytes=<n> checksum=<hex>
//   (one line per example, fields space separated, frame fields -1 for negatives)
//
// <dir>/features.bin   concatenated blocks, little-endian:
//   u32 rows, u32 cols, f32[rows*cols] row-major, u64 FNV-1a of the preceding
//   bytes of the block. `checksum` in the manifest repeats that value.

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "binary_io.hpp"
#include "kwslab/synth.hpp"

namespace kws {

namespace {

constexpr int kManifestVersion = 1;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string range_string(const Range& r) { return fmt_double(r.lo) + "," + fmt_double(r.hi); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string encode_block(const FeatureMatrix& f) {
  detail::ByteWriter w;
  w.put<std::uint32_t>(std::uint32_t(f.frames.rows()));
  w.put<std::uint32_t>(std::uint32_t(f.frames.cols()));
  w.put_array(f.frames.data(), std::size_t(f.frames.size()));
  w.put<std::uint64_t>(w.checksum());
  return {w.bytes().begin(), w.bytes().end()};
}

struct Record {
  std::map<std::string, std::string> fields;

  const std::string& at(const std::string& key, std::size_t line) const {
    auto it = fields.find(key);
    if (it == fields.end())
      throw DataError("manifest line " + std::to_string(line) + ": missing field '" + key + "'");
    return it->second;
  }
  long long integer(const std::string& key, std::size_t line) const {
    try {
      return std::stoll(at(key, line));
    } catch (const std::logic_error&) {
      throw DataError("manifest line " + std::to_string(line) + ": bad integer in '" + key + "'");
    }
  }
};

}  // namespace

std::map<std::string, Split> assign_splits(const std::vector<std::string>& ids, std::uint64_t seed) {
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  keyed.reserve(ids.size());
  for (const auto& id : ids) keyed.emplace_back(derive_seed(seed, fnv1a(id)), id);
  std::sort(keyed.begin(), keyed.end());
  const std::size_t n = ids.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_dev = n / 10;
  std::map<std::string, Split> out;
  for (std::size_t i = 0; i < n; ++i)
    out[keyed[i].second] = i < n_train ? Split::train : i < n_train + n_dev ? Split::dev : Split::eval;
  return out;
}

CorpusSummary build_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::pair<std::string, Label>> ids;
  char buf[32];
  for (int i = 0; i < cfg.n_pos; ++i) {
    std::snprintf(buf, sizeof buf, "pos_%05d", i);
    ids.emplace_back(buf, Label::keyword);
  }
  for (int i = 0; i < cfg.n_neg; ++i) {
    std::snprintf(buf, sizeof buf, "neg_%05d", i);
    ids.emplace_back(buf, Label::non_keyword);
  }
  std::vector<std::string> names;
  for (const auto& [id, label] : ids) names.push_back(id);
  const auto splits = assign_splits(names, cfg.seed);

  const auto bin_path = out_dir / "features.bin";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot write " + bin_path.string());

  std::ostringstream manifest;
  manifest << "format=kwslab-dataset\n"
           << "version=" << kManifestVersion << "\n"
           << "config.n_pos=" << cfg.n_pos << "\n"
           << "config.n_neg=" << cfg.n_neg << "\n"
           << "config.utterance_len_ms=" << range_string(cfg.utterance_len_ms) << "\n"
           << "config.keyword_len_ms=" << range_string(cfg.keyword_len_ms) << "\n"
           << "config.snr_db=" << range_string(cfg.snr_db) << "\n"
           << "config.jitter_ms=" << fmt_double(cfg.jitter_ms) << "\n"
           << "config.padding_ms=" << fmt_double(cfg.padding_ms) << "\n"
           << "config.seed=" << cfg.seed << "\n"
           << "count=" << ids.size() << "\n";

  CorpusSummary summary;
  for (auto s : {Split::train, Split::dev, Split::eval}) summary.split_sizes[s] = 0;
  std::uint64_t offset = 0;
  for (const auto& [id, label] : ids) {
    const Split split = splits.at(id);
    ++summary.split_sizes[split];
    Rng rng(derive_seed(cfg.seed, 0x5eed0000ULL + std::uint64_t(split), fnv1a(id)));
    Example ex = gen_utterance(rng, label, cfg, id);
    const std::string block = encode_block(ex.features);
    std::uint64_t checksum;
    std::memcpy(&checksum, block.data() + block.size() - 8, 8);
    bin.write(block.data(), std::streamsize(block.size()));
    if (!bin) throw DataError("write failed: " + bin_path.string());

    char snr[32];
    std::snprintf(snr, sizeof snr, "%.6f", ex.snr_db);
    manifest << "example id=" << id << " split=" << split_name(split) << " label=" << class_index(label)
             << " frames=" << ex.frames() << " dims=" << ex.features.frames.cols()
             << " keyword_start=" << ex.keyword_start << " endpoint=" << ex.endpoint_frame
             << " est_endpoint=" << ex.est_endpoint << " rough_start=" << ex.rough_start
             << " rough_end=" << ex.rough_end << " snr_db=" << snr << " offset=" << offset
             << " bytes=" << block.size() << " checksum=" << fmt_hex(checksum) << "\n";
    offset += block.size();
  }
  bin.close();

  const std::string text = manifest.str();
  const auto manifest_path = out_dir / "manifest.txt";
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw DataError("cannot write " + manifest_path.string());
  mf << text;
  if (!mf) throw DataError("write failed: " + manifest_path.string());
  summary.manifest_checksum = fnv1a(text);
  return summary;
}

std::uint64_t dataset_checksum(const std::filesystem::path& dir) { return fnv1a(read_file(dir / "manifest.txt")); }

std::vector<Example> load_dataset(const std::filesystem::path& dir, Split split) {
  const auto manifest_path = dir / "manifest.txt";
  if (!std::filesystem::exists(manifest_path)) throw DataError("missing manifest: " + manifest_path.string());
  std::istringstream manifest(read_file(manifest_path));

  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  bool format_ok = false;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("example ", 0) == 0) {
      Record r;
      std::istringstream fields(line.substr(8));
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw DataError("manifest line " + std::to_string(line_no) + ": bad field '" + kv + "'");
        r.fields[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      r.fields["#line"] = std::to_string(line_no);
      if (r.at("split", line_no) == split_name(split)) records.push_back(std::move(r));
    } else if (line == "format=kwslab-dataset") {
      format_ok = true;
    } else if (line.rfind("version=", 0) == 0) {
      if (line != "version=" + std::to_string(kManifestVersion))
        throw DataError(manifest_path.string() + ": incompatible manifest " + line);
    }
  }
  if (!format_ok) throw DataError(manifest_path.string() + ": not a kwslab dataset manifest");

  std::vector<Example> out;
  if (records.empty()) return out;
  const auto bin_path = dir / "features.bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot open " + bin_path.string());
  for (const auto& r : records) {
    const std::size_t ln = std::stoul(r.fields.at("#line"));
    Example ex;
    ex.id = r.at("id", ln);
    ex.split = split;
    ex.label = label_from_int(int(r.integer("label", ln)));
    ex.keyword_start = r.integer("keyword_start", ln);
    ex.endpoint_frame = r.integer("endpoint", ln);
    ex.est_endpoint = r.integer("est_endpoint", ln);
    ex.rough_start = r.integer("rough_start", ln);
    ex.rough_end = r.integer("rough_end", ln);
    ex.snr_db = std::stod(r.at("snr_db", ln));
    const auto offset = std::uint64_t(r.integer("offset", ln));
    const auto bytes = std::size_t(r.integer("bytes", ln));
    const std::uint64_t expected = std::stoull(r.at("checksum", ln), nullptr, 16);

    std::string block(bytes, '\0');
    bin.seekg(std::streamoff(offset));
    bin.read(block.data(), std::streamsize(bytes));
    if (!bin) throw DataError(bin_path.string() + ": truncated block for example " + ex.id);
    detail::ByteReader rd(block, bin_path.string() + " [" + ex.id + "]");
    const auto rows = rd.get<std::uint32_t>();
    const auto cols = rd.get<std::uint32_t>();
    if (std::size_t(rows) * cols * 4 + 16 != bytes || rows != r.integer("frames", ln) || cols != r.integer("dims", ln))
      throw DataError("corrupt example " + ex.id + ": block dimensions disagree with manifest");
    ex.features.frames.resize(rows, cols);
    rd.get_array(ex.features.frames.data(), std::size_t(rows) * cols);
    const std::uint64_t stored = rd.get<std::uint64_t>();
    const std::uint64_t actual = fnv1a(std::string_view(block).substr(0, bytes - 8));
    if (stored != actual || stored != expected) throw DataError("checksum mismatch: corrupt example " + ex.id);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace kws
