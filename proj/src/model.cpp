#include "kwslab/model.hpp"

#include <string>

#include "kwslab/errors.hpp"

namespace kws {

std::vector<Shape> ArchConfig::activation_shapes() const {
  if (conv.empty()) throw ConfigError("architecture needs at least one convolution");
  std::vector<Shape> shapes;
  Index c = 1, h = input_frames, w = input_dims;
  for (std::size_t l = 0; l < conv.size(); ++l) {
    const auto& s = conv[l];
    const std::string layer = "conv" + std::to_string(l + 1);
    if (s.out_channels < 1 || s.kernel_h < 1 || s.kernel_w < 1 || s.stride_h < 1 || s.stride_w < 1)
      throw ConfigError(layer + ": channels, kernel and stride must be positive");
    if (s.kernel_h > h || s.kernel_w > w)
      throw ConfigError(layer + ": kernel " + std::to_string(s.kernel_h) + "x" + std::to_string(s.kernel_w) +
                        " larger than input " + std::to_string(h) + "x" + std::to_string(w));
    c = s.out_channels;
    h = (h - s.kernel_h) / s.stride_h + 1;
    w = (w - s.kernel_w) / s.stride_w + 1;
    if (l == 0) {
      if (pool_h < 1 || pool_w < 1 || h % pool_h != 0 || w % pool_w != 0)
        throw ConfigError("pool " + std::to_string(pool_h) + "x" + std::to_string(pool_w) +
                          " does not divide conv1 output " + std::to_string(h) + "x" + std::to_string(w));
      h /= pool_h;
      w /= pool_w;
    }
    shapes.push_back({c, h, w});
  }
  return shapes;
}

void ArchConfig::validate() const {
  if (input_frames < 1 || input_dims < 1) throw ConfigError("input window must be non-empty");
  activation_shapes();
  if (fc.empty() || fc.back() != 2) throw ConfigError("last fully connected layer must have 2 outputs");
  for (auto width : fc)
    if (width < 1) throw ConfigError("fully connected widths must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate must be in [0,1)");
}

std::vector<Shape> ArchConfig::parameter_shapes() const {
  const auto acts = activation_shapes();
  std::vector<Shape> shapes;
  Index in_c = 1;
  for (const auto& s : conv) {
    shapes.push_back({s.out_channels, in_c, s.kernel_h, s.kernel_w});
    shapes.push_back({s.out_channels});
    in_c = s.out_channels;
  }
  Index in = shape_size(acts.back());
  for (auto width : fc) {
    shapes.push_back({width, in});
    shapes.push_back({width});
    in = width;
  }
  return shapes;
}

std::vector<std::string> ArchConfig::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < conv.size(); ++l) {
    names.push_back("conv" + std::to_string(l + 1) + ".kernels");
    names.push_back("conv" + std::to_string(l + 1) + ".bias");
  }
  for (std::size_t l = 0; l < fc.size(); ++l) {
    names.push_back("fc" + std::to_string(l + 1) + ".weights");
    names.push_back("fc" + std::to_string(l + 1) + ".bias");
  }
  return names;
}

Index ArchConfig::parameter_count() const {
  Index n = 0;
  for (const auto& s : parameter_shapes()) n += shape_size(s);
  return n;
}

}  // namespace kws
