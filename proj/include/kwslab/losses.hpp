#pragma once

// Frame-selecting losses over a posterior track.
//
// Every loss picks one row t of the track and evaluates a per-frame loss
// there. Positives pick the keyword argmax, optionally moved earlier by a
// random shift beta and clamped at zero; negatives pick the argmin of the
// non-keyword posterior. Gradients are returned w.r.t. the track
// probabilities and are non-zero only on the selected row.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>

#include "kwslab/autodiff.hpp"
#include "kwslab/errors.hpp"
#include "kwslab/model.hpp"
#include "kwslab/random.hpp"

namespace kws {

/// Class id: 0 non-keyword, 1 keyword.
enum class Label : int { non_keyword = 0, keyword = 1 };

inline int class_index(Label y) { return static_cast<int>(y); }

inline Label label_from_int(int y) {
  if (y != 0 && y != 1) throw ContractViolation("label must be 0 or 1, got " + std::to_string(y));
  return static_cast<Label>(y);
}

/// Floor applied inside -log(p).
inline constexpr double kLogFloor = 1e-12;

struct Bernoulli {
  double b = 0.0;
};
struct Constant {
  std::int64_t k = 0;
};
struct Poisson {
  double lambda = 1.0;
};

/// Distribution of the backward shift beta.
class ShiftDistribution {
 public:
  using Variant = std::variant<Bernoulli, Constant, Poisson>;

  ShiftDistribution() : v_(Bernoulli{0.0}) {}
  ShiftDistribution(Bernoulli d) : v_(d) { validate(); }
  ShiftDistribution(Constant d) : v_(d) { validate(); }
  ShiftDistribution(Poisson d) : v_(d) { validate(); }

  const Variant& variant() const { return v_; }

  /// One non-negative draw. Bernoulli and Poisson consume exactly one uniform;
  /// Constant consumes one as well so the rng stream position is independent
  /// of the variant.
  std::int64_t sample(Rng& rng) const {
    return std::visit(
        [&](const auto& d) -> std::int64_t {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Bernoulli>) {
            return rng.uniform() < d.b ? 1 : 0;
          } else if constexpr (std::is_same_v<D, Constant>) {
            rng.uniform();
            return d.k;
          } else {
            return rng.poisson(d.lambda);
          }
        },
        v_);
  }

  /// Mean of beta.
  double mean() const {
    return std::visit(
        [](const auto& d) -> double {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Bernoulli>) return d.b;
          else if constexpr (std::is_same_v<D, Constant>) return double(d.k);
          else return d.lambda;
        },
        v_);
  }

  std::string to_string() const;

  /// Parses "bernoulli:0.5", "constant:1" or "poisson:2.0".
  static ShiftDistribution parse(const std::string& text);

 private:
  void validate() const {
    std::visit(
        [](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Bernoulli>) {
            if (!(d.b >= 0.0 && d.b <= 1.0)) throw ConfigError("Bernoulli b must be in [0,1]");
          } else if constexpr (std::is_same_v<D, Constant>) {
            if (d.k < 0) throw ConfigError("Constant shift k must be >= 0");
          } else {
            if (!(d.lambda > 0.0)) throw ConfigError("Poisson lambda must be > 0");
          }
        },
        v_);
  }

  Variant v_;
};

/// Outcome of one per-example loss evaluation.
template <typename Scalar>
struct LossResult {
  Scalar value = 0;
  Index frame = 0;          // selected row
  std::int64_t beta = 0;    // drawn shift (0 when none)
  bool floored = false;     // the -log floor clamped the selected posterior
  RowMatrix<Scalar> grad;   // dLoss/dprobs, same shape as the track
};

/// Row used by the loss. Ties resolve to the earliest row.
template <typename Scalar>
Index select_frame(const RowMatrix<Scalar>& probs, Label label, std::int64_t beta) {
  if (probs.rows() == 0) throw ContractViolation("select_frame: empty track");
  if (beta < 0) throw ContractViolation("select_frame: beta must be >= 0");
  Index t = 0;
  if (label == Label::non_keyword) {
    for (Index i = 1; i < probs.rows(); ++i)
      if (probs(i, 0) < probs(t, 0)) t = i;
    return t;
  }
  const int y = class_index(label);
  for (Index i = 1; i < probs.rows(); ++i)
    if (probs(i, y) > probs(t, y)) t = i;
  return beta >= t ? 0 : t - Index(beta);
}

template <typename Scalar>
Index select_frame(const PosteriorTrack<Scalar>& track, Label label, std::int64_t beta) {
  return select_frame(track.probs, label, beta);
}

namespace detail {

template <typename Scalar>
LossResult<Scalar> xe_at(const RowMatrix<Scalar>& probs, Label label, Index t) {
  const int y = class_index(label);
  const Scalar floor = Scalar(kLogFloor);
  const Scalar p = probs(t, y);
  LossResult<Scalar> r;
  r.frame = t;
  r.floored = !(p > floor);
  r.value = -std::log(std::max(p, floor));
  r.grad = RowMatrix<Scalar>::Zero(probs.rows(), probs.cols());
  if (!r.floored) r.grad(t, y) = -(Scalar(1) / p);
  return r;
}

template <typename Scalar>
void check_track(const RowMatrix<Scalar>& probs) {
  if (probs.rows() == 0) throw ContractViolation("loss on empty track");
  if (probs.cols() < 2) throw ContractViolation("track needs at least 2 classes");
  if (!probs.allFinite()) throw NumericError("non-finite posterior in track");
}

}  // namespace detail

/// Cross-entropy at the max-pooled frame.
template <typename Scalar>
LossResult<Scalar> max_pooling_xe_loss(Label label, const PosteriorTrack<Scalar>& track) {
  detail::check_track(track.probs);
  return detail::xe_at(track.probs, label, select_frame(track.probs, label, 0));
}

/// Cross-entropy at the max-pooled frame shifted back by beta ~ dist.
/// One draw per call, for negatives as well (where it is ignored).
template <typename Scalar>
LossResult<Scalar> latency_controlled_loss(Label label, const PosteriorTrack<Scalar>& track,
                                           const ShiftDistribution& dist, Rng& rng) {
  detail::check_track(track.probs);
  const std::int64_t beta = dist.sample(rng);
  auto r = detail::xe_at(track.probs, label, select_frame(track.probs, label, beta));
  r.beta = label == Label::keyword ? beta : 0;
  return r;
}

/// Per-frame loss L(y, P_t) recorded on a tape; `row` has shape [K].
template <typename Scalar>
using FrameLoss = std::function<ad::Var<Scalar>(Label, ad::Var<Scalar>)>;

template <typename Scalar>
FrameLoss<Scalar> cross_entropy_frame() {
  return [](Label y, ad::Var<Scalar> row) { return -ad::log(ad::pick(row, class_index(y)), Scalar(kLogFloor)); };
}

/// Sum of squared differences to the one-hot target.
template <typename Scalar>
FrameLoss<Scalar> squared_error_frame() {
  return [](Label y, ad::Var<Scalar> row) {
    Tensor<Scalar> onehot(row.shape());
    onehot.data[class_index(y)] = Scalar(1);
    return ad::sum(ad::square(row - row.tape->constant(std::move(onehot))));
  };
}

/// (1 - p_y)^gamma * -log p_y with integer gamma.
template <typename Scalar>
FrameLoss<Scalar> focal_frame(int gamma = 2) {
  return [gamma](Label y, ad::Var<Scalar> row) {
    auto p = ad::pick(row, class_index(y));
    auto xe = -ad::log(p, Scalar(kLogFloor));
    auto one_minus = ad::add_scalar(-p, Scalar(1));
    auto w = one_minus;
    for (int i = 1; i < gamma; ++i) w = w * one_minus;
    return gamma == 0 ? xe : w * xe;
  };
}

/// Shifted max-pooling selection followed by an arbitrary per-frame loss,
/// differentiated on a tape. Consumes the rng exactly like
/// latency_controlled_loss.
template <typename Scalar>
LossResult<Scalar> generalized_latency_loss(Label label, const RowMatrix<Scalar>& probs,
                                            const FrameLoss<Scalar>& base_loss, const ShiftDistribution& dist,
                                            Rng& rng) {
  detail::check_track(probs);
  const std::int64_t beta = dist.sample(rng);
  const Index t = select_frame(probs, label, beta);
  const Index K = probs.cols();

  ad::Tape<Scalar> tape;
  Tensor<Scalar> flat({probs.rows(), K});
  flat.matrix(probs.rows(), K) = probs;
  auto track = tape.variable(std::move(flat));
  auto row = ad::slice(track, t * K, {K});
  auto loss = base_loss(label, row);
  tape.backward(loss);

  LossResult<Scalar> r;
  r.value = loss.value().data[0];
  r.frame = t;
  r.beta = label == Label::keyword ? beta : 0;
  r.floored = !(probs(t, class_index(label)) > Scalar(kLogFloor));
  r.grad = tape.grad(track).matrix(probs.rows(), K);
  return r;
}

template <typename Scalar>
LossResult<Scalar> generalized_latency_loss(Label label, const PosteriorTrack<Scalar>& track,
                                            const FrameLoss<Scalar>& base_loss, const ShiftDistribution& dist,
                                            Rng& rng) {
  return generalized_latency_loss(label, track.probs, base_loss, dist, rng);
}

/// Cross-entropy at a fixed (externally aligned) row.
template <typename Scalar>
LossResult<Scalar> aligned_xe_loss(Label label, const PosteriorTrack<Scalar>& track, Index align_index) {
  detail::check_track(track.probs);
  if (align_index < 0 || align_index >= track.rows())
    throw ContractViolation("aligned_xe_loss: index " + std::to_string(align_index) + " outside [0," +
                            std::to_string(track.rows() - 1) + "]");
  return detail::xe_at(track.probs, label, align_index);
}

/// Maximum number of feature frames past the keyword endpoint that a window
/// may end at and still take part in the argmax.
struct MaxLatencyConfig {
  std::int64_t f = 0;
};

/// Raised when masking removes every row; the trainer skips and counts the example.
class DegenerateMask : public Error {
 public:
  using Error::Error;
};

/// Prefix of `track` whose windows end no later than endpoint + f frames.
template <typename Scalar>
PosteriorTrack<Scalar> max_latency_mask(const PosteriorTrack<Scalar>& track, Index endpoint_frame,
                                        MaxLatencyConfig cfg, int frame_shift_ms = 10) {
  if (cfg.f < 0) throw ConfigError("max-latency f must be >= 0");
  if (endpoint_frame < 0) throw ContractViolation("max_latency_mask: negative endpoint");
  const std::int64_t limit_ms = (std::int64_t(endpoint_frame) + cfg.f) * frame_shift_ms;
  Index keep = 0;
  while (keep < track.rows() && track.frame_times_ms[std::size_t(keep)] <= limit_ms) ++keep;
  if (keep == 0)
    throw DegenerateMask("max-latency mask removes every row (first window ends at " +
                         std::to_string(track.frame_times_ms.empty() ? 0 : track.frame_times_ms.front()) +
                         " ms, limit " + std::to_string(limit_ms) + " ms)");
  PosteriorTrack<Scalar> out;
  out.probs = track.probs.topRows(keep);
  out.frame_times_ms.assign(track.frame_times_ms.begin(), track.frame_times_ms.begin() + keep);
  return out;
}

}  // namespace kws
