#include "kwslab/losses.hpp"

#include <charconv>

namespace kws {

namespace {

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid " + what + ": '" + text + "'");
  }
}

}  // namespace

std::string ShiftDistribution::to_string() const {
  auto shortest = [](double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  return std::visit(
      [&](const auto& d) -> std::string {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Bernoulli>) return "bernoulli:" + shortest(d.b);
        else if constexpr (std::is_same_v<D, Constant>) return "constant:" + std::to_string(d.k);
        else return "poisson:" + shortest(d.lambda);
      },
      v_);
}

ShiftDistribution ShiftDistribution::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError("shift distribution must look like bernoulli:<b>, constant:<k> or poisson:<lambda>; got '" +
                      text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string arg = text.substr(colon + 1);
  if (kind == "bernoulli") return Bernoulli{parse_number(arg, "Bernoulli b")};
  if (kind == "poisson") return Poisson{parse_number(arg, "Poisson lambda")};
  if (kind == "constant") {
    const double k = parse_number(arg, "constant shift");
    if (k != std::floor(k)) throw ConfigError("constant shift must be an integer");
    return Constant{std::int64_t(k)};
  }
  throw ConfigError("unknown shift distribution '" + kind + "'");
}

}  // namespace kws
