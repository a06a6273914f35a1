#include "oracles.hpp"

#include "musep/error.hpp"
#include "musep/manifest.hpp"
#include "musep/seqdata.hpp"
#include "musep/synth.hpp"

#include <doctest.h>

#include <Eigen/QR>

#include <fstream>
#include <functional>

using namespace musep;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

FeatureSequence make_feature(std::string subject, std::string modality, TimestampMs t0, std::size_t steps,
                             std::size_t dims, double base = 0.0) {
  FeatureSequence f;
  f.subject_id = std::move(subject);
  f.modality = std::move(modality);
  f.values = Matrix(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(dims));
  for (std::size_t t = 0; t < steps; ++t) {
    f.timestamps.push_back(t0 + static_cast<TimestampMs>(t) * kStepMs);
    for (std::size_t j = 0; j < dims; ++j) {
      f.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = base + static_cast<double>(t * 10 + j);
    }
  }
  return f;
}

LabelSequence make_label(std::string subject, TimestampMs t0, std::size_t steps) {
  LabelSequence l;
  l.subject_id = std::move(subject);
  for (std::size_t t = 0; t < steps; ++t) {
    l.timestamps.push_back(t0 + static_cast<TimestampMs>(t) * kStepMs);
    l.values.push_back(0.01 * static_cast<double>(t));
  }
  return l;
}

}  // namespace

TEST_CASE("feature csv: minimal file loads") {
  const auto dir = testutil::scratch_dir("csv_min");
  write_file(dir / "a.csv", "timestamp,f_0,f_1\n0,1.5,2\n500,3,4\n1000,5,-6e-3\n");
  const FeatureSequence f = load_feature_csv(dir / "a.csv", 2);
  CHECK(f.steps() == 3);
  CHECK(f.dims() == 2);
  CHECK(f.values(2, 1) == -6e-3);
  CHECK(f.timestamps == std::vector<TimestampMs>{0, 500, 1000});
}

TEST_CASE("feature csv: ingestion errors") {
  const auto dir = testutil::scratch_dir("csv_err");
  write_file(dir / "dup.csv", "timestamp,f_0\n0,1\n500,2\n500,3\n");
  CHECK(code_of([&] { load_feature_csv(dir / "dup.csv"); }) == ErrorCode::NonMonotoneTimestamps);
  write_file(dir / "gap.csv", "timestamp,f_0\n0,1\n500,2\n1500,3\n");
  CHECK(code_of([&] { load_feature_csv(dir / "gap.csv"); }) == ErrorCode::NonMonotoneTimestamps);
  write_file(dir / "hdr.csv", "time,f_0\n0,1\n500,2\n");
  CHECK(code_of([&] { load_feature_csv(dir / "hdr.csv"); }) == ErrorCode::MalformedCsv);
  write_file(dir / "arity.csv", "timestamp,f_0,f_1\n0,1,2\n500,2\n");
  CHECK(code_of([&] { load_feature_csv(dir / "arity.csv"); }) == ErrorCode::MalformedCsv);
  write_file(dir / "nan.csv", "timestamp,f_0,f_1\n0,1,2\n500,2,nan\n");
  try {
    load_feature_csv(dir / "nan.csv");
    FAIL("expected NonFiniteValue");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteValue);
    CHECK(std::string(e.what()).find("f_1") != std::string::npos);
  }
  write_file(dir / "ok.csv", "timestamp,f_0,f_1\n0,1,2\n500,2,3\n");
  CHECK(code_of([&] { load_feature_csv(dir / "ok.csv", 3); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { load_feature_csv(dir / "missing.csv"); }) == ErrorCode::IoError);
}

TEST_CASE("feature csv: phys-shaped round trip is bit-identical") {
  const auto dir = testutil::scratch_dir("csv_rt");
  Rng rng(11);
  FeatureSequence f;
  f.values = Matrix(600, 21);
  for (int t = 0; t < 600; ++t) {
    f.timestamps.push_back(1000 + t * kStepMs);
    for (int j = 0; j < 21; ++j) f.values(t, j) = rng.normal() * std::pow(10.0, static_cast<double>(j % 7) - 3.0);
  }
  write_feature_csv(dir / "p.csv", f);
  const FeatureSequence g = load_feature_csv(dir / "p.csv", 21);
  CHECK(g.timestamps == f.timestamps);
  CHECK((g.values.array() == f.values.array()).all());
}

TEST_CASE("label csv round trip") {
  const auto dir = testutil::scratch_dir("label_rt");
  LabelSequence l = make_label("S1", 0, 5);
  l.values[3] = -0.123456789012345678;
  write_label_csv(dir / "l.csv", l);
  const LabelSequence m = load_label_csv(dir / "l.csv", Dimension::Valence, "S1");
  CHECK(m.values == l.values);
  CHECK(m.dimension == Dimension::Valence);
}

TEST_CASE("align_and_label") {
  SUBCASE("overlap arithmetic") {
    const auto f = make_feature("S", "a", 0, 3, 2);   // 0..1000
    const auto l = make_label("S", 500, 3);           // 500..1500
    const AlignedSample s = align_and_label({f}, {l});
    CHECK(s.timestamps() == std::vector<TimestampMs>{500, 1000});
    CHECK(s.steps() == 2);
    CHECK(s.modalities[0].values(0, 0) == f.values(1, 0));
    CHECK(s.label(Dimension::Arousal).values == std::vector<double>{0.0, 0.01});
  }
  SUBCASE("identical grids are untouched") {
    const auto f = make_feature("S", "a", 0, 4, 3);
    const auto l = make_label("S", 0, 4);
    const AlignedSample s = align_and_label({f}, {l});
    CHECK((s.modalities[0].values.array() == f.values.array()).all());
    CHECK(s.label(Dimension::Arousal).values == l.values);
  }
  SUBCASE("concatenated width of three modalities") {
    const AlignedSample s = align_and_label(
        {make_feature("S", "deepspectrum", 0, 3, 1024), make_feature("S", "affectnet", 0, 3, 768),
         make_feature("S", "phys", 0, 3, 21)},
        {make_label("S", 0, 3)});
    CHECK(s.total_width() == 1813);
    CHECK(s.concat_features().cols() == 1813);
    CHECK(s.modality_names() == std::vector<std::string>{"deepspectrum", "affectnet", "phys"});
  }
  SUBCASE("errors") {
    CHECK(code_of([] { align_and_label({make_feature("S", "a", 0, 3, 1)}, {make_label("T", 0, 3)}); }) ==
          ErrorCode::SubjectMismatch);
    CHECK(code_of([] { align_and_label({make_feature("S", "a", 0, 3, 1)}, {make_label("S", 5000, 3)}); }) ==
          ErrorCode::EmptyIntersection);
  }
}

TEST_CASE("normalisation") {
  auto f1 = make_feature("A", "m", 0, 50, 3);
  auto f2 = make_feature("B", "m", 0, 40, 3, 7.0);
  Rng rng(3);
  for (auto* f : {&f1, &f2}) {
    for (Eigen::Index i = 0; i < f->values.rows(); ++i) {
      f->values(i, 1) = rng.normal() * 5 + 2;
      f->values(i, 2) = 4.25;  // constant column
    }
  }
  const std::vector<AlignedSample> pool = {align_and_label({f1}, {make_label("A", 0, 50)}),
                                           align_and_label({f2}, {make_label("B", 0, 40)})};
  const NormStats stats = fit_norm_stats(pool);
  std::vector<AlignedSample> normed;
  for (const auto& s : pool) normed.push_back(apply_norm(s, stats));

  Matrix all(90, 3);
  all << normed[0].modalities[0].values, normed[1].modalities[0].values;
  for (int j = 0; j < 2; ++j) {
    const double m = all.col(j).mean();
    const double sd = std::sqrt((all.col(j).array() - m).square().mean());
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-6);
  }
  CHECK((all.col(2).array() == 0.0).all());
  CHECK(normed[0].label(Dimension::Arousal).values == pool[0].label(Dimension::Arousal).values);

  const NormStats again = fit_norm_stats(normed);
  CHECK(std::abs(again.modalities[0].mean(1)) < 1e-9);
  CHECK(std::abs(again.modalities[0].std(0) - 1.0) < 1e-6);
  CHECK(stats.modalities[0].std(2) == kStdFloor);

  auto wrong = pool[0];
  wrong.modalities[0].values.conservativeResize(Eigen::NoChange, 2);
  CHECK(code_of([&] { apply_norm(wrong, stats); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] { fit_norm_stats({}); }) == ErrorCode::EmptyCorpus);
}

TEST_CASE("subject split partitions the timeline") {
  for (const std::size_t steps : {600u, 241u, 240u, 130u, 50u}) {
    const AlignedSample s = align_and_label({make_feature("S", "a", 0, steps, 1)}, {make_label("S", 0, steps)});
    const SubjectSplit sp = make_subject_split(s);
    CHECK(sp.personal_train.begin == 0);
    CHECK(sp.personal_train.end == sp.personal_dev.begin);
    CHECK(sp.personal_dev.end == sp.personal_test.begin);
    CHECK(sp.personal_test.end == steps);
    if (steps >= 240) {
      CHECK(sp.personal_train.size() == 120);
      CHECK(sp.personal_dev.size() == 120);
    }
  }
}

TEST_CASE("synthetic corpus is deterministic") {
  SynthSpec spec;
  spec.n_train = 2;
  spec.n_dev = 1;
  spec.n_test = 1;
  spec.duration_s = 30;
  const SynthCorpus a = generate_synthetic_corpus(spec, 5);
  const SynthCorpus b = generate_synthetic_corpus(spec, 5);
  const SynthCorpus c = generate_synthetic_corpus(spec, 6);
  REQUIRE(a.subjects.size() == 4);
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    const auto& x = a.subjects[i].sample;
    const auto& y = b.subjects[i].sample;
    CHECK(x.subject_id == y.subject_id);
    CHECK((x.concat_features().array() == y.concat_features().array()).all());
    CHECK(x.label(Dimension::Valence).values == y.label(Dimension::Valence).values);
    CHECK(a.subjects[i].signals.ecg.samples == b.subjects[i].signals.ecg.samples);
  }
  CHECK(a.subjects[0].sample.label(Dimension::Arousal).values != c.subjects[0].sample.label(Dimension::Arousal).values);

  const auto d1 = testutil::scratch_dir("synth_a");
  const auto d2 = testutil::scratch_dir("synth_b");
  write_synthetic_corpus(a, d1);
  write_synthetic_corpus(b, d2);
  for (const auto& e : fs::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), d1);
    std::ifstream f1(e.path(), std::ios::binary), f2(d2 / rel, std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK_MESSAGE(s1 == s2, rel.string());
  }
  // Written corpus loads back to the in-memory one.
  const Corpus loaded = load_corpus(read_manifest(d1 / "manifest.txt"), std::vector<std::string>{"audio", "video"});
  REQUIRE(loaded.size() == 4);
  CHECK((loaded[2].concat_features().array() == a.subjects[2].sample.concat_features().array()).all());
  CHECK(loaded[2].role == Role::Dev);
}

TEST_CASE("synthetic corpus: noise-free features determine labels linearly") {
  SynthSpec spec;
  spec.n_train = 3;
  spec.n_dev = 0;
  spec.n_test = 0;
  spec.duration_s = 60;
  spec.noise = 0.0;
  spec.with_ecg = false;
  const SynthCorpus corpus = generate_synthetic_corpus(spec, 9);
  for (const auto& subj : corpus.subjects) {
    const Matrix x = subj.sample.concat_features();
    Matrix design(x.rows(), x.cols() + 1);
    design << x, Matrix::Ones(x.rows(), 1);
    for (const Dimension d : {Dimension::Arousal, Dimension::Valence}) {
      const auto& y = subj.sample.label(d).values;
      const Vector target = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
      const Vector w = design.colPivHouseholderQr().solve(target);
      const double residual = (design * w - target).cwiseAbs().maxCoeff();
      CHECK(residual < 1e-8);
    }
  }
}

TEST_CASE("synthetic ECG: heart rate follows arousal") {
  Rng r1(1), r2(1);
  EcgSynthParams p;
  const SynthEcg high = synthesize_ecg(std::vector<double>(60, 0.8), p, r1);
  const SynthEcg low = synthesize_ecg(std::vector<double>(60, -0.8), p, r2);
  const auto mean_rr = [](const SynthEcg& e) {
    const auto nn = nn_intervals_ms(detect_r_peaks(e.ecg), e.ecg.rate_hz);
    return oracle::mean(nn);
  };
  CHECK(mean_rr(high) < mean_rr(low));
  CHECK(mean_rr(high) == doctest::Approx(800 - 150 * 0.8).epsilon(0.01));
}

TEST_CASE("synthetic spec validation") {
  SynthSpec spec;
  spec.n_train = spec.n_dev = spec.n_test = 0;
  CHECK(code_of([&] { generate_synthetic_corpus(spec, 0); }) == ErrorCode::InvalidSpec);
  spec = {};
  spec.modalities = {{"a", 0}};
  CHECK(code_of([&] { generate_synthetic_corpus(spec, 0); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("manifest round trip and errors") {
  const auto dir = testutil::scratch_dir("manifest");
  write_file(dir / "m.txt",
             "# comment\nsubject S1 train\nfeature S1 audio a/S1.csv\nlabel S1 arousal l/S1.csv\n"
             "subject S2 test\nsignal S2 ecg s/ecg.csv\n");
  const Manifest m = read_manifest(dir / "m.txt");
  REQUIRE(m.subjects.size() == 2);
  CHECK(m.subjects[1].role == Role::Test);
  CHECK(m.resolve(m.subjects[0].features.at("audio")) == dir / "a/S1.csv");
  write_manifest(dir / "m2.txt", m);
  const Manifest m2 = read_manifest(dir / "m2.txt");
  CHECK(m2.subjects[0].labels.at(Dimension::Arousal) == m.subjects[0].labels.at(Dimension::Arousal));

  write_file(dir / "bad.txt", "subject S1 train\nfeature S9 audio a.csv\n");
  CHECK(code_of([&] { read_manifest(dir / "bad.txt"); }) == ErrorCode::MalformedManifest);
  write_file(dir / "bad2.txt", "subject S1 sometimes\n");
  CHECK(code_of([&] { read_manifest(dir / "bad2.txt"); }) == ErrorCode::MalformedManifest);
}
