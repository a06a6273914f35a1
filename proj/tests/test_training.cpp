#include "oracles.hpp"

#include "musep/objective.hpp"
#include "musep/synth.hpp"
#include "musep/training.hpp"

#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace musep;
using testutil::error_code;

namespace {

Corpus small_corpus(std::uint64_t seed, double offset = 0.0, double duration = 90.0) {
  SynthSpec spec;
  spec.n_train = 3;
  spec.n_dev = 1;
  spec.n_test = 1;
  spec.duration_s = duration;
  spec.modalities = {{"audio", 4}, {"video", 3}};
  spec.subject_offset = offset;
  spec.with_ecg = false;
  return generate_synthetic_corpus(spec, seed).samples();
}

TrainConfig quick_config() {
  TrainConfig tc;
  tc.stage1_window = {40, 20};
  tc.max_epochs = 6;
  tc.patience = 100;
  tc.lr = 5e-3;
  tc.finetune_max_epochs = 3;
  tc.finetune_lr = 1e-3;
  tc.seeds = {0, 1, 2, 3};
  return tc;
}

ModelConfig quick_model() { return make_model_config({4, 3}, 8, 1, false, 0); }

}  // namespace

TEST_CASE("windows: worked enumerations") {
  const auto six = window_ranges(600, {200, 100});
  REQUIRE(six.size() == 6);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(six[i].begin == 100 * i);
    CHECK(six[i].size() == 200);
  }
  CHECK(six[5].begin == 500);
  CHECK(six[5].end == 600);

  const auto two = window_ranges(200, {200, 100});
  REQUIRE(two.size() == 2);
  CHECK(two[0].begin == 0);
  CHECK(two[0].end == 200);
  CHECK(two[1].begin == 100);
  CHECK(two[1].end == 200);

  const auto one = window_ranges(37, {37, 37});
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 37);

  // A 1-step tail is dropped.
  CHECK(window_ranges(11, {10, 5}).back().end == 11);
  CHECK(window_ranges(11, {10, 10}).size() == 1);
}

TEST_CASE("windows: enumeration oracle and coverage on random triples") {
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t win = 2 + rng.below(60);
    const std::size_t hop = 1 + rng.below(win);
    const std::size_t T = 2 + rng.below(400);
    const auto got = window_ranges(T, {win, hop});
    const auto want = oracle::windows(T, win, hop);
    REQUIRE(got.size() == want.size());
    std::vector<int> covered(T, 0);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].begin == want[i].begin);
      CHECK(got[i].end == want[i].end);
      for (std::size_t t = got[i].begin; t < got[i].end; ++t) covered[t] = 1;
    }
    // A lone final step can only be left over when windows do not overlap.
    const bool lone_tail = win == hop && T % hop == 1;
    CHECK(std::count(covered.begin(), covered.end(), 1) == static_cast<long>(lone_tail ? T - 1 : T));
  }
  CHECK(error_code([] { window_ranges(10, {1, 1}); }) == ErrorCode::InvalidConfig);
  CHECK(error_code([] { window_ranges(10, {5, 6}); }) == ErrorCode::InvalidConfig);
  CHECK(error_code([] { window_ranges(10, {5, 0}); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("make_windows slices features and labels") {
  const Corpus c = small_corpus(1);
  const AlignedSample& s = c.front();
  const auto ws = make_windows(s, {50, 30}, Dimension::Valence);
  const Matrix x = s.concat_features();
  REQUIRE(!ws.empty());
  for (const auto& w : ws) {
    CHECK(w.features.cols() == 7);
    CHECK(static_cast<std::size_t>(w.features.rows()) == w.range.size());
    CHECK(w.features.row(0) == x.row(static_cast<Eigen::Index>(w.range.begin)));
    CHECK(w.labels.front() == s.label(Dimension::Valence).values[w.range.begin]);
    CHECK(w.labels.size() == w.range.size());
  }
}

TEST_CASE("predict_full") {
  const Corpus c = small_corpus(2);
  const Model m = init_model(quick_model());
  const PredictionSequence p = predict_full(m, c[0], Dimension::Arousal);
  CHECK(p.values.size() == c[0].steps());
  CHECK(p.timestamps == c[0].timestamps());
  const ForwardResult fr = forward(m, c[0].concat_features());
  for (std::size_t t = 0; t < p.values.size(); ++t) CHECK(p.values[t] == fr.predictions(static_cast<Eigen::Index>(t), 0));

  const PredictionSequence z = predict_full(zero_model(quick_model()), c[0], Dimension::Arousal);
  for (const double v : z.values) CHECK(v == 0.0);

  const Model wrong = init_model(make_model_config({3, 4}, 8));
  CHECK(error_code([&] { predict_full(wrong, c[0], Dimension::Arousal); }) == ErrorCode::LayoutMismatch);
}

TEST_CASE("pretrain: bookkeeping, determinism, errors") {
  const Corpus c = small_corpus(3);
  const Corpus train = select_role(c, Role::Train), dev = select_role(c, Role::Dev);
  const TrainConfig tc = quick_config();
  const PretrainResult a = pretrain(train, dev, quick_model(), tc, Dimension::Arousal);
  REQUIRE(a.report.epochs.size() == tc.max_epochs);
  double best = -2.0;
  std::size_t best_epoch = 0;
  for (const auto& e : a.report.epochs) {
    if (e.dev_ccc > best) {
      best = e.dev_ccc;
      best_epoch = e.epoch;
    }
  }
  CHECK(a.report.best_dev_ccc == best);
  CHECK(a.report.best_epoch == best_epoch);
  // The stored model is the best epoch's model.
  double dev_sum = 0.0;
  for (const auto& s : dev) {
    dev_sum += ccc(predict_subject(a.checkpoint, s, Dimension::Arousal).values, s.label(Dimension::Arousal).values).ccc;
  }
  CHECK(dev_sum / static_cast<double>(dev.size()) == a.report.best_dev_ccc);

  const PretrainResult b = pretrain(train, dev, quick_model(), tc, Dimension::Arousal);
  CHECK(encode_checkpoint(a.checkpoint.model, a.checkpoint.stats) == encode_checkpoint(b.checkpoint.model, b.checkpoint.stats));
  const auto dir = testutil::scratch_dir("report");
  write_train_report_csv(dir / "a.csv", a.report);
  write_train_report_csv(dir / "b.csv", b.report);
  std::ifstream fa(dir / "a.csv"), fb(dir / "b.csv");
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("epoch,train_loss,dev_ccc\n1,", 0) == 0);

  CHECK(error_code([&] { pretrain({}, dev, quick_model(), tc, Dimension::Arousal); }) == ErrorCode::EmptyCorpus);
  CHECK(error_code([&] { pretrain(train, {}, quick_model(), tc, Dimension::Arousal); }) == ErrorCode::EmptyCorpus);
  Corpus mixed = train;
  const std::vector<std::string> only_audio = {"audio"};
  mixed[1] = select_modalities(mixed[1], only_audio);
  CHECK(error_code([&] { pretrain(mixed, dev, quick_model(), tc, Dimension::Arousal); }) == ErrorCode::LayoutMismatch);
  CHECK(error_code([&] { pretrain(train, dev, make_model_config({7}, 8), tc, Dimension::Arousal); }) ==
        ErrorCode::LayoutMismatch);
}

TEST_CASE("pretrain: patience 0 stops at the first non-improving epoch") {
  const Corpus c = small_corpus(4);
  TrainConfig tc = quick_config();
  tc.patience = 0;
  tc.max_epochs = 60;
  tc.lr = 0.05;  // large steps make a non-improving epoch come quickly
  const PretrainResult r = pretrain(select_role(c, Role::Train), select_role(c, Role::Dev), quick_model(), tc,
                                    Dimension::Valence);
  const auto& e = r.report.epochs;
  REQUIRE(!e.empty());
  double best = e[0].dev_ccc;
  for (std::size_t i = 1; i + 1 < e.size(); ++i) {
    CHECK(e[i].dev_ccc > best);
    best = e[i].dev_ccc;
  }
  if (e.size() < tc.max_epochs) CHECK(e.back().dev_ccc <= best);
}

TEST_CASE("personalise: selection, no-op budget, parallel equivalence") {
  const Corpus c = small_corpus(5, 1.0);
  const PretrainResult pre =
      pretrain(select_role(c, Role::Train), select_role(c, Role::Dev), quick_model(), quick_config(), Dimension::Arousal);
  const AlignedSample subject = select_role(c, Role::Test).front();
  const SubjectSplit split = make_subject_split(subject, 40);

  TrainConfig tc = quick_config();
  const PersonaliseResult r = personalise(pre.checkpoint, subject, split, tc, Dimension::Arousal);
  REQUIRE(r.sweep.size() == tc.seeds.size());
  double best = -2.0;
  std::uint64_t best_seed = 0;
  for (const auto& o : r.sweep) {
    if (o.dev_ccc > best) {
      best = o.dev_ccc;
      best_seed = o.seed;
    }
    CHECK(r.dev_ccc >= o.dev_ccc);
  }
  CHECK(r.dev_ccc == best);
  CHECK(r.seed == best_seed);
  const double measured = segment_ccc(predict_subject(r.checkpoint, subject, Dimension::Arousal), subject,
                                      Dimension::Arousal, split.personal_dev);
  CHECK(measured == r.dev_ccc);

  TrainConfig parallel = tc;
  parallel.jobs = 3;
  const PersonaliseResult p = personalise(pre.checkpoint, subject, split, parallel, Dimension::Arousal);
  CHECK(p.seed == r.seed);
  for (std::size_t k = 0; k < r.models.size(); ++k) {
    CHECK(encode_checkpoint(p.models[k], pre.checkpoint.stats) == encode_checkpoint(r.models[k], pre.checkpoint.stats));
  }

  TrainConfig none = tc;
  none.finetune_max_epochs = 0;
  const PersonaliseResult z = personalise(pre.checkpoint, subject, split, none, Dimension::Arousal);
  CHECK(encode_checkpoint(z.checkpoint.model, z.checkpoint.stats) ==
        encode_checkpoint(pre.checkpoint.model, pre.checkpoint.stats));
  const double pre_dev = segment_ccc(predict_subject(pre.checkpoint, subject, Dimension::Arousal), subject,
                                     Dimension::Arousal, split.personal_dev);
  CHECK(z.dev_ccc == pre_dev);
  CHECK(z.seed == tc.seeds.front());

  SubjectSplit empty = split;
  empty.personal_dev = {split.personal_dev.begin, split.personal_dev.begin};
  CHECK(error_code([&] { personalise(pre.checkpoint, subject, empty, tc, Dimension::Arousal); }) ==
        ErrorCode::EmptySegment);
}
