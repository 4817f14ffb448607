#include <doctest.h>

#include "kwslab/checkpoint.hpp"
#include "kwslab/config.hpp"
#include "kwslab/errors.hpp"
#include "support.hpp"

using namespace kws;

TEST_CASE("run config: defaults, overrides and canonical round trip") {
  const auto d = parse_run_config("");
  CHECK(d.train.adam.lr == 1e-3);
  CHECK(d.train.adam.beta1 == 0.9);
  CHECK(d.train.adam.beta2 == 0.999);
  CHECK(d.train.adam.epsilon == 1e-8);
  CHECK(d.train.epochs == 15);
  CHECK(d.train.batch_size == 32);
  CHECK(d.train.arch == ArchConfig{});
  CHECK(d.eval.target_frr == 0.05);
  CHECK(d.eval.debounce_ms == 1000);

  const std::string text =
      "[train]\nseed = 3\nepochs=4\n[loss]\ntype=latency_mp\ndist=bernoulli:0.3\n"
      "[arch]\nconv_channels=8,8,16,16,16\nfc=64,32,2\ndropout_rate=0.1\n[eval]\nfrr=0.1\n";
  const auto c = parse_run_config(text, {"adam.lr=0.002", "train.posterior_stride=5"});
  CHECK(c.train.seed == 3);
  CHECK(c.train.epochs == 4);
  CHECK(c.train.loss.kind == LossKind::latency_mp);
  CHECK(c.train.loss.dist.to_string() == "bernoulli:0.3");
  CHECK(c.train.arch.conv[2].out_channels == 16);
  CHECK(c.train.arch.conv[1].stride_h == 3);
  CHECK(c.train.arch.fc == std::vector<Index>{64, 32, 2});
  CHECK(c.train.arch.dropout_rate == 0.1);
  CHECK(c.train.adam.lr == 0.002);
  CHECK(c.train.posterior_stride == 5);
  CHECK(c.eval.stride == 5);
  CHECK(c.eval.target_frr == 0.1);

  const auto canon = run_config_text(c);
  const auto back = parse_run_config(canon);
  CHECK(run_config_text(back) == canon);
  CHECK(back.train.arch == c.train.arch);
  CHECK(back.train.adam.lr == c.train.adam.lr);
  CHECK(canon.find("0.30000000000000004") == std::string::npos);
}

TEST_CASE("run config: errors") {
  CHECK_THROWS_WITH_AS(parse_run_config("[train]\nepoch=3\n"), doctest::Contains("train.epoch"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config("[trian]\nseed=1\n"), doctest::Contains("[trian]"), ConfigError);
  CHECK_NOTHROW(parse_run_config("[eval]\n"));
  CHECK_THROWS_WITH_AS(parse_run_config("seed=1\n"), doctest::Contains("outside a section"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[train]\nepochs=three\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[loss]\ndist=gamma:1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[arch]\nconv_kernels=5x5\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[eval]\nfrr=1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("", {"lr=3"}), ConfigError);
  CHECK_THROWS_AS(parse_run_config("", {"adam.beta1=1.0"}), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/kwslab.cfg"), DataError);
}

TEST_CASE("corpus config round trip") {
  const auto c = parse_corpus_config("[corpus]\nn_pos=10\nn_neg=12\nsnr_min_db=3\nseed=99\n");
  CHECK(c.n_pos == 10);
  CHECK(c.n_neg == 12);
  CHECK(c.snr_db.lo == 3.0);
  CHECK(c.snr_db.hi == 20.0);
  CHECK(c.seed == 99);
  CHECK(parse_corpus_config(corpus_config_text(c)) == c);
  CHECK(parse_corpus_config("") == CorpusConfig{});
  CHECK_THROWS_AS(parse_corpus_config("[corpus]\nutterance_min_ms=900\n"), ConfigError);
}

TEST_CASE("checkpoint: exact round trip and corruption") {
  auto arch = test::tiny_arch();
  arch.dropout_rate = 0.25;
  arch.conv_dropout = true;
  Checkpoint ck{ModelParams<float>::init(arch, 71).cast<double>(), {{"epoch", "3"}, {"loss", "max_pool"}}};
  const auto bytes = encode_checkpoint(ck);
  const auto back = decode_checkpoint(bytes);
  CHECK(back.params.arch == arch);
  CHECK(back.metadata == ck.metadata);
  REQUIRE(back.params.tensors.size() == ck.params.tensors.size());
  for (std::size_t k = 0; k < ck.params.tensors.size(); ++k) {
    CHECK(back.params.tensors[k].shape == ck.params.tensors[k].shape);
    CHECK(back.params.tensors[k].data == ck.params.tensors[k].data);
  }
  CHECK(encode_checkpoint(back) == bytes);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 1;
  CHECK_THROWS_AS(decode_checkpoint(flipped), DataError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), DataError);
  CHECK_THROWS_AS(decode_checkpoint("NOTACKPT" + bytes.substr(8)), DataError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), DataError);

  const auto path = std::filesystem::temp_directory_path() / "kwslab_test_ck.ckpt";
  save_checkpoint(path, ck);
  CHECK(encode_checkpoint(load_checkpoint(path)) == bytes);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("shipped configs parse and match the defaults") {
  const std::filesystem::path dir = KWSLAB_SOURCE_DIR "/configs";
  CHECK(load_corpus_config(dir / "corpus.cfg") == CorpusConfig{});
  const auto train = load_run_config(dir / "train.cfg");
  CHECK(train.train.arch == ArchConfig{});
  CHECK(train.train.arch.parameter_count() == 1192290);
  CHECK(train.train.loss.kind == LossKind::latency_mp);
  const auto small = load_run_config(dir / "small.cfg");
  CHECK(small.train.arch.conv[4].out_channels == 16);
  CHECK(small.train.epochs == 8);
}
