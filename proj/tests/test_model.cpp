#include <doctest.h>

#include "kwslab/grad_check.hpp"
#include "kwslab/trainer.hpp"
#include "support.hpp"

using namespace kws;

namespace {

Example random_example(Rng& rng, Label label, Index frames) {
  Example ex;
  ex.id = label == Label::keyword ? "pos" : "neg";
  ex.label = label;
  ex.features = test::random_features(rng, frames);
  if (label == Label::keyword) {
    ex.keyword_start = frames / 2 - 20;
    ex.endpoint_frame = frames / 2 + 20;
    ex.est_endpoint = ex.endpoint_frame + 2;
    ex.rough_start = 3;
    ex.rough_end = frames - 4;
  } else {
    ex.rough_start = 0;
    ex.rough_end = frames - 1;
  }
  return ex;
}

/// Largest relative error between accumulated parameter gradients and
/// central differences over `samples` random coordinates.
double example_grad_error(const ModelParams<double>& params, const Example& ex, const LossConfig& loss, Index stride,
                          std::uint64_t seed, int samples) {
  auto grads = zero_gradients(params);
  {
    Rng drop(seed), beta(seed + 1);
    example_loss(params, ex, loss, stride, Mode::train, drop, beta, &grads);
  }
  auto value_at = [&](const ModelParams<double>& p) {
    Rng drop(seed), beta(seed + 1);
    return example_loss(p, ex, loss, stride, Mode::train, drop, beta, static_cast<std::vector<Tensor<double>>*>(nullptr)).loss;
  };
  Rng pick(seed ^ 0x77);
  double worst = 0.0;
  auto probe = params;
  for (int s = 0; s < samples; ++s) {
    const auto k = std::size_t(pick.uniform_int(0, std::int64_t(params.tensors.size()) - 1));
    const Index i = pick.uniform_int(0, params.tensors[k].size() - 1);
    const double eps = 1e-6, orig = probe.tensors[k].data[i];
    probe.tensors[k].data[i] = orig + eps;
    const double up = value_at(probe);
    probe.tensors[k].data[i] = orig - eps;
    const double down = value_at(probe);
    probe.tensors[k].data[i] = orig;
    worst = std::max(worst, ad::relative_error(grads[k].data[i], (up - down) / (2 * eps)));
  }
  return worst;
}

}  // namespace

TEST_CASE("default architecture shapes") {
  ArchConfig arch;
  const auto shapes = arch.activation_shapes();
  REQUIRE(shapes.size() == 5);
  CHECK(shapes[0] == Shape{32, 36, 30});
  CHECK(shapes[1] == Shape{32, 12, 28});
  CHECK(shapes[2] == Shape{64, 10, 26});
  CHECK(shapes[3] == Shape{64, 8, 24});
  CHECK(shapes[4] == Shape{64, 6, 22});
  // conv: 32*25+32, 32*32*9+32, 32*64*9+64, 64*64*9+64 (x2); fc: 8448*128+128, 128*64+64, 64*2+2
  CHECK(arch.parameter_count() == 832 + 9248 + 18496 + 36928 + 36928 + 1081472 + 8256 + 130);
}

TEST_CASE("end-to-end parameter gradients match finite differences") {
  Rng rng(11);
  const auto params = test::lively_params(test::tiny_arch(), 5);
  for (LossKind kind : {LossKind::max_pool, LossKind::latency_mp, LossKind::xe_aligned, LossKind::max_latency}) {
    LossConfig loss;
    loss.kind = kind;
    loss.dist = Bernoulli{0.5};
    loss.max_latency.f = 3;
    for (Label label : {Label::keyword, Label::non_keyword}) {
      const auto ex = random_example(rng, label, 110);
      CAPTURE(loss_kind_name(kind));
      CHECK(example_grad_error(params, ex, loss, 4, 99, 40) < 1e-6);
    }
  }
}
