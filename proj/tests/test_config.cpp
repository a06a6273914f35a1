#include "oracles.hpp"

#include "musep/config.hpp"
#include "musep/synth.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace musep;
using testutil::error_code;
namespace fs = std::filesystem;

namespace {

fs::path corpus_dir() {
  static const fs::path dir = [] {
    const auto d = testutil::scratch_dir("config_corpus");
    SynthSpec spec;
    spec.n_train = 1;
    spec.n_dev = 1;
    spec.n_test = 1;
    spec.duration_s = 10;
    spec.with_ecg = false;
    write_synthetic_corpus(generate_synthetic_corpus(spec, 0), d / "corpus");
    return d;
  }();
  return dir;
}

RunConfig parse(const std::string& extra) {
  return parse_config_text("manifest = corpus/manifest.txt\ncombo = audio+video\ndimension = arousal\n" + extra,
                           corpus_dir(), "t");
}

}  // namespace

TEST_CASE("config: minimal file takes the reference defaults") {
  const RunConfig c = parse("");
  CHECK(c.model_dim == 256);
  CHECK(c.rnn_layers == 1);
  CHECK_FALSE(c.rnn_bi);
  CHECK(c.train.lr == 1e-3);
  CHECK(c.train.batch_size == 128);
  CHECK(c.train.stage1_window == WindowingConfig{200, 100});
  CHECK(c.train.stage2_window == WindowingConfig{10, 5});
  CHECK(c.train.finetune_lr == 1e-4);
  CHECK(c.train.max_epochs == 100);
  CHECK(c.train.patience == 15);
  CHECK(c.train.finetune_max_epochs == 50);
  CHECK(c.train.finetune_patience == 10);
  CHECK(c.train.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(c.modalities == std::vector<std::string>{"audio", "video"});
  CHECK(c.dimensions == std::vector<Dimension>{Dimension::Arousal});
  CHECK(c.warnings.empty());
  const ModelConfig m = c.model_config({16, 12});
  CHECK(m.fused_dim == 256);
  CHECK(m.head_hidden == 128);
}

TEST_CASE("config: overrides and the non-reference width warning") {
  const RunConfig c = parse("model_dim = 300\nrnn_bi = true\nrnn_layers = 2\nfinetune.seeds = 4, 5\n"
                            "pretrain.lr = 0.01\ndimension = both\nseed = 9\n");
  CHECK(c.model_dim == 300);
  CHECK(c.warnings.size() == 1);
  CHECK(c.rnn_bi);
  CHECK(c.rnn_layers == 2);
  CHECK(c.train.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.train.lr == 0.01);
  CHECK(c.dimensions.size() == 2);
  CHECK(c.model_config({1}).seed == 9);
  CHECK(c.train.shuffle_seed == 9);
}

TEST_CASE("config: errors name the key") {
  try {
    parse("model_dim = abc\n");
    FAIL("expected TypeError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TypeError);
    CHECK(std::string(e.what()).find("model_dim") != std::string::npos);
  }
  try {
    parse("modle_dim = 3\n");
    FAIL("expected UnknownKey");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownKey);
    CHECK(std::string(e.what()).find("modle_dim") != std::string::npos);
  }
  try {
    parse_config_text("manifest = corpus/manifest.txt\ndimension = arousal\n", corpus_dir());
    FAIL("expected MissingRequiredKey");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingRequiredKey);
    CHECK(std::string(e.what()).find("combo") != std::string::npos);
  }
  CHECK(error_code([] { parse("rnn_bi = maybe\n"); }) == ErrorCode::TypeError);
  CHECK(error_code([] { parse("dimension = dominance\n"); }) == ErrorCode::TypeError);
  CHECK(error_code([] { parse("pretrain.lr = -1\n"); }) == ErrorCode::TypeError);
  CHECK(error_code([] { parse("not a pair\n"); }) == ErrorCode::TypeError);
  CHECK(error_code([] { parse("combo = audio+phys\n"); }) == ErrorCode::PathError);
  CHECK(error_code([] { parse("manifest = nowhere.txt\n"); }) == ErrorCode::PathError);
  CHECK(error_code([] { parse_config("/nonexistent/run.cfg"); }) == ErrorCode::PathError);
}

TEST_CASE("config: paths resolve against the file; rendering round-trips") {
  const fs::path cfg = corpus_dir() / "run.cfg";
  std::ofstream(cfg) << "# comment\nmanifest = corpus/manifest.txt\ncombo = video\ndimension = valence\n"
                        "output_dir = out\nfinetune.batch_size = 4\n";
  const RunConfig c = parse_config(cfg);
  CHECK(fs::equivalent(c.manifest, corpus_dir() / "corpus" / "manifest.txt"));
  CHECK(c.output_dir == (corpus_dir() / "out").lexically_normal());
  CHECK(c.train.finetune_batch_size == 4);

  const RunConfig again = parse_config_text(render_config(c), "/");
  CHECK(render_config(again) == render_config(c));
  CHECK(again.train.finetune_batch_size == 4);
  CHECK(again.modalities == c.modalities);
}

TEST_CASE("config: default output root comes from the environment") {
  ::setenv("MUSEP_OUT", "/tmp/musep_env_root", 1);
  const RunConfig c = parse("");
  ::unsetenv("MUSEP_OUT");
  CHECK(c.output_dir == fs::path("/tmp/musep_env_root/t"));
}
