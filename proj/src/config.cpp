#include "kwslab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace kws {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

pt::ptree parse_ini(const std::string& text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("override must look like section.key=value; got '" + o + "'");
    tree.put(pt::ptree::path_type(trim(o.substr(0, eq)), '.'), trim(o.substr(eq + 1)));
  }
  return tree;
}

/// Typed access to one section, remembering which keys were read.
class Section {
 public:
  Section(const pt::ptree& tree, std::string name) : name_(std::move(name)) {
    if (auto child = tree.get_child_optional(name_)) node_ = &*child;
  }

  template <typename T>
  void read(const char* key, T& value) {
    used_.insert(key);
    if (!node_) return;
    const auto text = node_->get_optional<std::string>(key);
    if (!text) return;
    if constexpr (std::is_same_v<T, std::string>) {
      value = *text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (*text == "true" || *text == "1") value = true;
      else if (*text == "false" || *text == "0") value = false;
      else bad(key, *text);
    } else {
      std::istringstream in(*text);
      T parsed{};
      in >> parsed;
      if (in.fail() || !(in >> std::ws).eof()) bad(key, *text);
      value = parsed;
    }
  }

  void reject_unknown() const {
    if (!node_) return;
    for (const auto& [key, _] : *node_)
      if (!used_.count(key)) throw ConfigError("unknown config key " + name_ + "." + key);
  }

 private:
  [[noreturn]] void bad(const char* key, const std::string& text) const {
    throw ConfigError("invalid value for " + name_ + "." + key + ": '" + text + "'");
  }

  std::string name_;
  const pt::ptree* node_ = nullptr;
  std::set<std::string> used_;
};

void reject_unknown_sections(const pt::ptree& tree, const std::set<std::string>& known) {
  for (const auto& [name, node] : tree) {
    if (node.empty() && !node.data().empty()) throw ConfigError("config key '" + name + "' outside a section");
    if (!known.count(name)) throw ConfigError("unknown config section [" + name + "]");
  }
}

std::pair<Index, Index> parse_shape(const std::string& s, const char* what) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t u1 = 0, u2 = 0;
    const auto a = s.substr(0, x), b = s.substr(x + 1);
    const Index h = std::stol(a, &u1), w = std::stol(b, &u2);
    if (u1 != a.size() || u2 != b.size()) throw std::invalid_argument(s);
    return {h, w};
  } catch (const std::exception&) {
    throw ConfigError(std::string("invalid ") + what + " '" + s + "' (expected HxW)");
  }
}

Index parse_index(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const Index v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("invalid ") + what + " '" + s + "'");
  }
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

CorpusConfig parse_corpus_config(const std::string& text, const std::vector<std::string>& overrides) {
  const auto tree = parse_ini(text, overrides);
  reject_unknown_sections(tree, {"corpus"});
  CorpusConfig cfg;
  Section s(tree, "corpus");
  s.read("n_pos", cfg.n_pos);
  s.read("n_neg", cfg.n_neg);
  s.read("utterance_min_ms", cfg.utterance_len_ms.lo);
  s.read("utterance_max_ms", cfg.utterance_len_ms.hi);
  s.read("keyword_min_ms", cfg.keyword_len_ms.lo);
  s.read("keyword_max_ms", cfg.keyword_len_ms.hi);
  s.read("snr_min_db", cfg.snr_db.lo);
  s.read("snr_max_db", cfg.snr_db.hi);
  s.read("jitter_ms", cfg.jitter_ms);
  s.read("padding_ms", cfg.padding_ms);
  s.read("seed", cfg.seed);
  s.reject_unknown();
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides) {
  const auto tree = parse_ini(text, overrides);
  reject_unknown_sections(tree, {"train", "adam", "loss", "arch", "eval"});
  RunConfig cfg;
  auto& t = cfg.train;

  Section train(tree, "train");
  train.read("seed", t.seed);
  train.read("epochs", t.epochs);
  train.read("batch_size", t.batch_size);
  train.read("posterior_stride", t.posterior_stride);
  train.read("record_wall_time", t.record_wall_time);
  train.reject_unknown();

  Section adam(tree, "adam");
  adam.read("lr", t.adam.lr);
  adam.read("beta1", t.adam.beta1);
  adam.read("beta2", t.adam.beta2);
  adam.read("epsilon", t.adam.epsilon);
  adam.reject_unknown();

  Section loss(tree, "loss");
  std::string type = loss_kind_name(t.loss.kind);
  std::string dist = t.loss.dist.to_string();
  loss.read("type", type);
  loss.read("dist", dist);
  loss.read("f", t.loss.max_latency.f);
  loss.reject_unknown();
  t.loss.kind = parse_loss_kind(type);
  t.loss.dist = ShiftDistribution::parse(dist);

  Section arch(tree, "arch");
  auto& a = t.arch;
  std::string channels, kernels, strides, pool, fc;
  arch.read("input_frames", a.input_frames);
  arch.read("input_dims", a.input_dims);
  arch.read("conv_channels", channels);
  arch.read("conv_kernels", kernels);
  arch.read("conv_strides", strides);
  arch.read("pool", pool);
  arch.read("fc", fc);
  arch.read("dropout_rate", a.dropout_rate);
  arch.read("conv_dropout", a.conv_dropout);
  arch.reject_unknown();
  if (!channels.empty() || !kernels.empty() || !strides.empty()) {
    // Lists not given keep the current layer table.
    auto current = [&](auto&& item) {
      std::vector<std::string> out;
      for (const auto& c : a.conv) out.push_back(item(c));
      return out;
    };
    const auto c = channels.empty() ? current([](const ConvSpec& c) { return std::to_string(c.out_channels); })
                                    : split(channels, ',');
    const auto k = kernels.empty() ? current([](const ConvSpec& c) {
      return std::to_string(c.kernel_h) + "x" + std::to_string(c.kernel_w);
    })
                                   : split(kernels, ',');
    const auto s = strides.empty() ? current([](const ConvSpec& c) {
      return std::to_string(c.stride_h) + "x" + std::to_string(c.stride_w);
    })
                                   : split(strides, ',');
    if (c.size() != k.size() || c.size() != s.size())
      throw ConfigError("arch.conv_channels, conv_kernels and conv_strides must list the same number of layers");
    a.conv.clear();
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto [kh, kw] = parse_shape(k[i], "conv kernel");
      const auto [sh, sw] = parse_shape(s[i], "conv stride");
      a.conv.push_back({parse_index(c[i], "conv channel count"), kh, kw, sh, sw});
    }
  }
  if (!pool.empty()) std::tie(a.pool_h, a.pool_w) = parse_shape(pool, "pool");
  if (!fc.empty()) {
    a.fc.clear();
    for (const auto& w : split(fc, ',')) a.fc.push_back(parse_index(w, "fc width"));
  }

  Section eval(tree, "eval");
  eval.read("frr", cfg.eval.target_frr);
  eval.read("debounce_ms", cfg.eval.debounce_ms);
  eval.reject_unknown();
  cfg.eval.stride = t.posterior_stride;
  if (!(cfg.eval.target_frr > 0.0 && cfg.eval.target_frr < 1.0)) throw ConfigError("eval.frr must be in (0,1)");
  if (cfg.eval.debounce_ms < 0) throw ConfigError("eval.debounce_ms must be >= 0");

  t.validate();
  return cfg;
}

CorpusConfig load_corpus_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  return parse_corpus_config(read_text_file(path), overrides);
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  return parse_run_config(read_text_file(path), overrides);
}

std::string corpus_config_text(const CorpusConfig& c) {
  std::ostringstream out;
  out << "[corpus]\n"
      << "n_pos=" << c.n_pos << "\n"
      << "n_neg=" << c.n_neg << "\n"
      << "utterance_min_ms=" << num(c.utterance_len_ms.lo) << "\n"
      << "utterance_max_ms=" << num(c.utterance_len_ms.hi) << "\n"
      << "keyword_min_ms=" << num(c.keyword_len_ms.lo) << "\n"
      << "keyword_max_ms=" << num(c.keyword_len_ms.hi) << "\n"
      << "snr_min_db=" << num(c.snr_db.lo) << "\n"
      << "snr_max_db=" << num(c.snr_db.hi) << "\n"
      << "jitter_ms=" << num(c.jitter_ms) << "\n"
      << "padding_ms=" << num(c.padding_ms) << "\n"
      << "seed=" << c.seed << "\n";
  return out.str();
}

std::string run_config_text(const RunConfig& cfg) {
  const auto& t = cfg.train;
  const auto& a = t.arch;
  std::ostringstream out;
  out << "[train]\n"
      << "seed=" << t.seed << "\n"
      << "epochs=" << t.epochs << "\n"
      << "batch_size=" << t.batch_size << "\n"
      << "posterior_stride=" << t.posterior_stride << "\n"
      << "record_wall_time=" << (t.record_wall_time ? "true" : "false") << "\n\n"
      << "[adam]\n"
      << "lr=" << num(t.adam.lr) << "\n"
      << "beta1=" << num(t.adam.beta1) << "\n"
      << "beta2=" << num(t.adam.beta2) << "\n"
      << "epsilon=" << num(t.adam.epsilon) << "\n\n"
      << "[loss]\n"
      << "type=" << loss_kind_name(t.loss.kind) << "\n"
      << "dist=" << t.loss.dist.to_string() << "\n"
      << "f=" << t.loss.max_latency.f << "\n\n"
      << "[arch]\n"
      << "input_frames=" << a.input_frames << "\n"
      << "input_dims=" << a.input_dims << "\n";
  auto list = [&](const char* key, auto&& item) {
    out << key << "=";
    for (std::size_t i = 0; i < a.conv.size(); ++i) out << (i ? "," : "") << item(a.conv[i]);
    out << "\n";
  };
  list("conv_channels", [](const ConvSpec& c) { return std::to_string(c.out_channels); });
  list("conv_kernels", [](const ConvSpec& c) { return std::to_string(c.kernel_h) + "x" + std::to_string(c.kernel_w); });
  list("conv_strides", [](const ConvSpec& c) { return std::to_string(c.stride_h) + "x" + std::to_string(c.stride_w); });
  out << "pool=" << a.pool_h << "x" << a.pool_w << "\n" << "fc=";
  for (std::size_t i = 0; i < a.fc.size(); ++i) out << (i ? "," : "") << a.fc[i];
  out << "\n"
      << "dropout_rate=" << num(a.dropout_rate) << "\n"
      << "conv_dropout=" << (a.conv_dropout ? "true" : "false") << "\n\n"
      << "[eval]\n"
      << "frr=" << num(cfg.eval.target_frr) << "\n"
      << "debounce_ms=" << cfg.eval.debounce_ms << "\n";
  return out.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace kws
