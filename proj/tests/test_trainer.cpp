#include <doctest.h>

#include <cmath>

#include "kwslab/adam.hpp"
#include "kwslab/errors.hpp"
#include "kwslab/trainer.hpp"
#include "support.hpp"

using namespace kws;

namespace {

/// Adam written out one scalar at a time.
struct ScalarAdam {
  double m = 0, v = 0;
  void step(double& p, double g, int t, const AdamHyper& h) {
    m = h.beta1 * m + (1 - h.beta1) * g;
    v = h.beta2 * v + (1 - h.beta2) * g * g;
    const double mhat = m / (1 - std::pow(h.beta1, t));
    const double vhat = v / (1 - std::pow(h.beta2, t));
    p -= h.lr * mhat / (std::sqrt(vhat) + h.epsilon);
  }
};

ArchConfig micro_arch() {
  ArchConfig a;
  a.conv = {{2, 5, 5, 1, 1}, {2, 3, 3, 3, 1}, {2, 3, 3, 1, 1}, {2, 3, 3, 1, 1}, {2, 3, 3, 1, 1}};
  a.fc = {8, 4, 2};
  return a;
}

std::vector<Example> small_set(std::uint64_t seed, int n) {
  Rng rng(seed);
  CorpusConfig cfg;
  std::vector<Example> out;
  for (int i = 0; i < n; ++i)
    out.push_back(gen_utterance(rng, i % 2 ? Label::non_keyword : Label::keyword, cfg, "ex" + std::to_string(i)));
  return out;
}

TrainConfig micro_config() {
  TrainConfig c;
  c.arch = micro_arch();
  c.epochs = 2;
  c.batch_size = 4;
  c.seed = 9;
  c.posterior_stride = 10;
  return c;
}

}  // namespace

TEST_CASE("adam: matches a scalar reference over 100 steps") {
  Rng rng(61);
  ArchConfig arch = micro_arch();
  auto params = ModelParams<double>::init(arch, 3);
  auto ref = params;
  auto state = AdamState<double>::init(params);
  std::vector<std::vector<ScalarAdam>> scalar;
  for (const auto& t : params.tensors) scalar.emplace_back(std::size_t(t.size()));
  AdamHyper h;
  h.lr = 3e-3;
  for (int step = 1; step <= 100; ++step) {
    auto grads = zero_gradients(params);
    for (auto& g : grads)
      for (Index i = 0; i < g.size(); ++i) g.data[i] = rng.normal(0.0, step % 7 == 0 ? 10.0 : 0.1);
    adam_step(params, grads, state, h);
    for (std::size_t k = 0; k < grads.size(); ++k)
      for (Index i = 0; i < grads[k].size(); ++i) scalar[k][std::size_t(i)].step(ref.tensors[k].data[i], grads[k].data[i], step, h);
  }
  CHECK(state.step == 100);
  double worst = 0;
  for (std::size_t k = 0; k < params.tensors.size(); ++k)
    worst = std::max(worst, (params.tensors[k].data - ref.tensors[k].data).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-7);
}

TEST_CASE("adam: first step moves by lr against the gradient sign") {
  auto params = ModelParams<double>::init(micro_arch(), 4);
  const auto before = params;
  auto state = AdamState<double>::init(params);
  Rng rng(62);
  auto grads = zero_gradients(params);
  for (auto& g : grads)
    for (Index i = 0; i < g.size(); ++i) g.data[i] = rng.uniform() < 0.5 ? -rng.uniform(0.01, 5) : rng.uniform(0.01, 5);
  AdamHyper h;
  adam_step(params, grads, state, h);
  for (std::size_t k = 0; k < grads.size(); ++k)
    for (Index i = 0; i < grads[k].size(); ++i) {
      const double delta = params.tensors[k].data[i] - before.tensors[k].data[i];
      CHECK(delta == doctest::Approx(-h.lr * (grads[k].data[i] > 0 ? 1 : -1)).epsilon(1e-5));
    }
}

TEST_CASE("adam: zero gradients leave parameters, moments only decay") {
  auto params = ModelParams<double>::init(micro_arch(), 5);
  auto state = AdamState<double>::init(params);
  for (auto& m : state.m) m.data.setConstant(0.5);
  for (auto& v : state.v) v.data.setConstant(0.0);
  state.step = 3;
  const auto before = params;
  AdamHyper h;
  h.lr = 0.0;
  adam_step(params, zero_gradients(params), state, h);
  for (std::size_t k = 0; k < params.tensors.size(); ++k) {
    CHECK(params.tensors[k].data == before.tensors[k].data);
    CHECK(state.m[k].data.isConstant(0.5 * 0.9));
    CHECK(state.v[k].data.isZero());
  }
  auto fresh = AdamState<double>::init(params);
  h.lr = 1e-3;
  adam_step(params, zero_gradients(params), fresh, h);
  for (std::size_t k = 0; k < params.tensors.size(); ++k) CHECK(params.tensors[k].data == before.tensors[k].data);
}

TEST_CASE("adam: non-finite gradient aborts and names the parameter") {
  auto params = ModelParams<double>::init(micro_arch(), 6);
  auto state = AdamState<double>::init(params);
  auto grads = zero_gradients(params);
  grads[3].data[1] = std::nan("");
  const auto names = params.arch.parameter_names();
  const auto before = params;
  CHECK_THROWS_WITH_AS(adam_step(params, grads, state, AdamHyper{}), doctest::Contains(names[3].c_str()), NumericError);
  CHECK(state.step == 0);
  CHECK(params.tensors[0].data == before.tensors[0].data);
  grads.pop_back();
  CHECK_THROWS_AS(adam_step(params, grads, state, AdamHyper{}), DimensionError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.adam.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.adam.lr = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_loss_kind("latency_mp") == LossKind::latency_mp);
  CHECK_THROWS_AS(parse_loss_kind("hinge"), ConfigError);
}

TEST_CASE("train: lr 0 over one batch returns the initialisation") {
  auto cfg = micro_config();
  cfg.epochs = 1;
  cfg.adam.lr = 0.0;
  const auto data = small_set(63, 4);
  const auto r = train(cfg, data, {});
  const auto init = initial_params(cfg);
  for (std::size_t k = 0; k < init.tensors.size(); ++k) CHECK(r.params.tensors[k].data == init.tensors[k].data);
}

TEST_CASE("train: b=0 equals max pooling bit for bit, and data order ignores the loss") {
  const auto data = small_set(64, 12);
  const auto dev = small_set(65, 4);
  auto base = micro_config();
  base.loss.kind = LossKind::max_pool;
  const auto a = train(base, data, dev);
  auto shifted = base;
  shifted.loss.kind = LossKind::latency_mp;
  shifted.loss.dist = Bernoulli{0.0};
  const auto b = train(shifted, data, dev);
  for (std::size_t k = 0; k < a.params.tensors.size(); ++k) CHECK(a.params.tensors[k].data == b.params.tensors[k].data);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t e = 0; e < a.metrics.size(); ++e) {
    CHECK(a.metrics[e].train_loss == b.metrics[e].train_loss);
    CHECK(a.metrics[e].dev_loss == b.metrics[e].dev_loss);
  }
  CHECK(a.consumed_ids.size() == 24);

  for (LossKind kind : {LossKind::xe_aligned, LossKind::latency_mp, LossKind::max_latency}) {
    auto c = base;
    c.loss.kind = kind;
    c.loss.dist = Bernoulli{0.7};
    CHECK(train(c, data, dev).consumed_ids == a.consumed_ids);
  }

  const auto again = train(base, data, dev);
  for (std::size_t k = 0; k < a.params.tensors.size(); ++k) CHECK(a.params.tensors[k].data == again.params.tensors[k].data);
}

TEST_CASE("train: epoch order is a seeded permutation") {
  const auto o = epoch_order(50, 3, 1);
  auto sorted = o;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
  CHECK(epoch_order(50, 3, 1) == o);
  CHECK(epoch_order(50, 3, 2) != o);
  CHECK(epoch_order(50, 4, 1) != o);
}

TEST_CASE("frozen batch: training loss strictly decreases for every loss variant") {
  const auto data = small_set(66, 4);
  std::vector<LossConfig> losses(6);
  losses[0].kind = LossKind::xe_aligned;
  losses[1].kind = LossKind::max_pool;
  losses[2].kind = LossKind::latency_mp;
  losses[2].dist = Bernoulli{0.5};
  losses[3].kind = LossKind::latency_mp;
  losses[3].dist = Constant{2};
  losses[4].kind = LossKind::latency_mp;
  losses[4].dist = Poisson{1.5};
  losses[5].kind = LossKind::max_latency;
  losses[5].max_latency.f = 0;
  for (const auto& loss : losses) {
    CAPTURE(loss_kind_name(loss.kind));
    auto arch = micro_arch();
    arch.dropout_rate = 0.0;
    auto params = test::lively_params(arch, 7).cast<float>();
    auto state = AdamState<float>::init(params);
    AdamHyper h;
    double prev = 1e300;
    int decreases = 0;
    for (int step = 0; step < 50; ++step) {
      auto grads = zero_gradients(params);
      double total = 0;
      for (const auto& ex : data) {
        Rng drop(1), beta(std::uint64_t(ex.frames()));
        total += example_loss(params, ex, loss, 10, Mode::train, drop, beta, &grads, 0.25f).loss / 4.0;
      }
      decreases += total < prev;
      prev = total;
      adam_step(params, grads, state, h);
    }
    CHECK(decreases == 50);
  }
}

TEST_CASE("smoke: 5 epochs of max pooling on the default corpus reach 90% dev accuracy" * doctest::skip()) {
  CorpusConfig cfg;
  const auto dir = std::filesystem::temp_directory_path() / "kwslab_smoke_corpus";
  std::filesystem::remove_all(dir);
  build_corpus(cfg, dir);
  TrainConfig tc;
  tc.epochs = 5;
  tc.loss.kind = LossKind::max_pool;
  const auto r = train(tc, load_dataset(dir, Split::train), load_dataset(dir, Split::dev));
  std::filesystem::remove_all(dir);
  MESSAGE("dev accuracy " << r.metrics.back().dev_acc);
  CHECK(r.metrics.back().dev_acc >= 0.90);
}
