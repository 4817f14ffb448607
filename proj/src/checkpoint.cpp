#include "kwslab/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "binary_io.hpp"

namespace kws {

namespace {
constexpr std::string_view kMagic = "KWSCKPT1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  const auto& params = checkpoint.params;
  const auto& arch = params.arch;
  arch.validate();
  detail::ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(std::uint32_t(arch.input_frames));
  w.put<std::uint32_t>(std::uint32_t(arch.input_dims));
  w.put<std::uint32_t>(std::uint32_t(arch.conv.size()));
  for (const auto& c : arch.conv)
    for (auto v : {c.out_channels, c.kernel_h, c.kernel_w, c.stride_h, c.stride_w}) w.put<std::uint32_t>(std::uint32_t(v));
  w.put<std::uint32_t>(std::uint32_t(arch.pool_h));
  w.put<std::uint32_t>(std::uint32_t(arch.pool_w));
  w.put<std::uint32_t>(std::uint32_t(arch.fc.size()));
  for (auto width : arch.fc) w.put<std::uint32_t>(std::uint32_t(width));
  w.put<double>(arch.dropout_rate);
  w.put<std::uint32_t>(arch.conv_dropout ? 1u : 0u);

  std::string meta;
  for (const auto& [k, v] : checkpoint.metadata) meta += k + "=" + v + "\n";
  w.put<std::uint32_t>(std::uint32_t(meta.size()));
  w.put_bytes(meta);

  const auto shapes = arch.parameter_shapes();
  if (shapes.size() != params.tensors.size()) throw DimensionError("checkpoint: tensor count mismatch");
  w.put<std::uint64_t>(std::uint64_t(arch.parameter_count()));
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params.tensors[i].shape != shapes[i])
      throw DimensionError("checkpoint: tensor " + std::to_string(i) + " has shape " +
                           shape_string(params.tensors[i].shape) + ", expected " + shape_string(shapes[i]));
    w.put_array(params.tensors[i].data.data(), std::size_t(params.tensors[i].size()));
  }
  w.put<std::uint64_t>(w.checksum());
  return {w.bytes().begin(), w.bytes().end()};
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& origin) {
  detail::ByteReader r(bytes, origin);
  if (r.get_bytes(kMagic.size()) != kMagic) r.fail("bad checkpoint magic");
  if (const auto v = r.get<std::uint32_t>(); v != kVersion) r.fail("unsupported checkpoint version " + std::to_string(v));

  Checkpoint ck;
  auto& arch = ck.params.arch;
  arch.input_frames = r.get<std::uint32_t>();
  arch.input_dims = r.get<std::uint32_t>();
  const auto n_conv = r.get<std::uint32_t>();
  if (n_conv > 64) r.fail("implausible conv layer count");
  arch.conv.assign(n_conv, {});
  for (auto& c : arch.conv) {
    c.out_channels = r.get<std::uint32_t>();
    c.kernel_h = r.get<std::uint32_t>();
    c.kernel_w = r.get<std::uint32_t>();
    c.stride_h = r.get<std::uint32_t>();
    c.stride_w = r.get<std::uint32_t>();
  }
  arch.pool_h = r.get<std::uint32_t>();
  arch.pool_w = r.get<std::uint32_t>();
  const auto n_fc = r.get<std::uint32_t>();
  if (n_fc > 64) r.fail("implausible fc layer count");
  arch.fc.assign(n_fc, 0);
  for (auto& width : arch.fc) width = r.get<std::uint32_t>();
  arch.dropout_rate = r.get<double>();
  const auto flags = r.get<std::uint32_t>();
  if (flags > 1) r.fail("unknown architecture flags");
  arch.conv_dropout = flags == 1;
  try {
    arch.validate();
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid architecture (") + e.what() + ")");
  }

  const auto meta_len = r.get<std::uint32_t>();
  std::string_view meta = r.get_bytes(meta_len);
  while (!meta.empty()) {
    const auto nl = meta.find('\n');
    const auto line = meta.substr(0, nl);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) r.fail("malformed metadata line");
    ck.metadata.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    meta = nl == std::string_view::npos ? std::string_view{} : meta.substr(nl + 1);
  }

  const auto count = r.get<std::uint64_t>();
  if (count != std::uint64_t(arch.parameter_count())) r.fail("parameter count does not match architecture");
  for (const auto& shape : arch.parameter_shapes()) {
    Tensor<double> t(shape);
    r.get_array(t.data.data(), std::size_t(t.size()));
    ck.params.tensors.push_back(std::move(t));
  }
  const std::size_t body = r.pos();
  const auto stored = r.get<std::uint64_t>();
  if (fnv1a(bytes.substr(0, body)) != stored) throw DataError(origin + ": checkpoint checksum mismatch");
  if (r.remaining() != 0) r.fail("trailing bytes after checksum");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

}  // namespace kws
