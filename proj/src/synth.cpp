#include "musep/synth.hpp"

#include "musep/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace musep {

namespace {

struct Wave {
  double offset_ms;
  double amplitude;
  double sigma_ms;
};

// P, Q, R, S, T relative to the R maximum.
constexpr Wave kComplex[] = {
    {-180.0, 0.12, 20.0}, {-28.0, -0.12, 8.0}, {0.0, 1.0, 10.0}, {28.0, -0.25, 8.0}, {260.0, 0.28, 45.0},
};

double interp(const std::vector<double>& v, double pos) {
  if (pos <= 0.0) return v.front();
  const double last = static_cast<double>(v.size() - 1);
  if (pos >= last) return v.back();
  const auto i = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(i);
  return v[i] + f * (v[i + 1] - v[i]);
}

std::string subject_name(std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return "S" + digits;
}

}  // namespace

RawSignal render_ecg(const PeakList& r_peaks, std::size_t n_samples, double rate_hz) {
  RawSignal sig;
  sig.rate_hz = rate_hz;
  sig.samples.assign(n_samples, 0.0);
  const double ms_per_sample = 1000.0 / rate_hz;
  for (const std::size_t peak : r_peaks) {
    for (const Wave& w : kComplex) {
      const double centre = static_cast<double>(peak) + w.offset_ms / ms_per_sample;
      const double sigma = w.sigma_ms / ms_per_sample;
      const auto lo = static_cast<std::ptrdiff_t>(std::floor(centre - 5.0 * sigma));
      const auto hi = static_cast<std::ptrdiff_t>(std::ceil(centre + 5.0 * sigma));
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0);
           i <= hi && i < static_cast<std::ptrdiff_t>(n_samples); ++i) {
        const double z = (static_cast<double>(i) - centre) / sigma;
        sig.samples[static_cast<std::size_t>(i)] += w.amplitude * std::exp(-0.5 * z * z);
      }
    }
  }
  return sig;
}

void add_noise_snr(RawSignal& signal, double snr_db, Rng& rng) {
  double power = 0.0;
  for (const double x : signal.samples) power += x * x;
  power /= static_cast<double>(signal.samples.size());
  const double sd = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  for (double& x : signal.samples) x += sd * rng.normal();
}

SynthEcg synthesize_ecg(const std::vector<double>& arousal_2hz, const EcgSynthParams& params, Rng& rng) {
  if (arousal_2hz.size() < 2) fail(ErrorCode::InvalidSpec, "arousal trace needs at least 2 steps");
  const double duration_ms = static_cast<double>((arousal_2hz.size() - 1) * kStepMs);
  const auto n = static_cast<std::size_t>(std::llround(duration_ms * params.rate_hz / 1000.0)) + 1;

  auto rr_at = [&](double t_ms) {
    return params.base_rr_ms - params.rr_per_arousal_ms * interp(arousal_2hz, t_ms / static_cast<double>(kStepMs));
  };

  SynthEcg out;
  double t = rng.uniform() * rr_at(0.0);
  while (true) {
    const auto idx = static_cast<std::size_t>(std::llround(t * params.rate_hz / 1000.0));
    if (idx >= n) break;
    out.true_peaks.push_back(idx);
    double rr = rr_at(t);
    if (params.rr_jitter_ms > 0.0) rr += params.rr_jitter_ms * rng.normal();
    t += std::max(rr, 300.0);
  }
  out.ecg = render_ecg(out.true_peaks, n, params.rate_hz);
  if (params.noise_sd > 0.0) {
    for (double& x : out.ecg.samples) x += params.noise_sd * rng.normal();
  }
  return out;
}

std::vector<double> synth_latent(std::size_t steps, Rng& rng) {
  struct Sine {
    double period_s, phase, amplitude;
  };
  Sine sines[3];
  for (auto& s : sines) {
    s.period_s = rng.uniform(20.0, 120.0);
    s.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.amplitude = rng.uniform(0.15, 0.35);
  }
  constexpr double kTauS = 10.0;
  constexpr double kOuStd = 0.1;
  const double dt = static_cast<double>(kStepMs) / 1000.0;
  const double decay = std::exp(-dt / kTauS);
  const double innovation = kOuStd * std::sqrt(1.0 - decay * decay);

  std::vector<double> out(steps);
  double ou = kOuStd * rng.normal();
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    double v = ou;
    for (const auto& s : sines) v += s.amplitude * std::sin(2.0 * std::numbers::pi * t / s.period_s + s.phase);
    out[k] = std::clamp(v, -1.0, 1.0);
    ou = decay * ou + innovation * rng.normal();
  }
  return out;
}

Corpus SynthCorpus::samples() const {
  Corpus out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(s.sample);
  return out;
}

SynthCorpus generate_synthetic_corpus(const SynthSpec& spec, std::uint64_t seed) {
  const std::size_t n_subjects = spec.n_train + spec.n_dev + spec.n_test;
  if (n_subjects == 0) fail(ErrorCode::InvalidSpec, "corpus needs at least one subject");
  if (!(spec.duration_s >= 1.0)) fail(ErrorCode::InvalidSpec, "duration must be at least 1 s");
  if (spec.modalities.empty()) fail(ErrorCode::InvalidSpec, "corpus needs at least one modality");
  if (spec.noise < 0.0 || spec.subject_offset < 0.0) fail(ErrorCode::InvalidSpec, "noise and offset must be non-negative");
  for (const auto& m : spec.modalities) {
    if (m.dims == 0) fail(ErrorCode::InvalidSpec, "modality " + m.name + " has zero dims");
    if (m.name == "phys" && (m.dims != kPhysDims || !spec.with_ecg)) {
      fail(ErrorCode::InvalidSpec, "phys modality requires with_ecg and 21 dims");
    }
  }
  const auto steps = static_cast<std::size_t>(std::llround(spec.duration_s * 1000.0 / static_cast<double>(kStepMs)));

  SynthCorpus corpus;
  corpus.spec = spec;
  corpus.seed = seed;

  Rng map_rng(seed, 1);
  for (const auto& m : spec.modalities) {
    Matrix a(static_cast<Eigen::Index>(m.dims), 2);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = map_rng.normal();
    corpus.maps.push_back(std::move(a));
  }

  std::vector<TimestampMs> grid(steps);
  for (std::size_t k = 0; k < steps; ++k) grid[k] = static_cast<TimestampMs>(k) * kStepMs;

  for (std::size_t s = 0; s < n_subjects; ++s) {
    SynthSubject subject;
    const std::string id = subject_name(s);
    const Role role = s < spec.n_train ? Role::Train : (s < spec.n_train + spec.n_dev ? Role::Dev : Role::Test);
    Rng rng(seed, 1000 + s);

    const std::vector<double> arousal = synth_latent(steps, rng);
    const std::vector<double> valence = synth_latent(steps, rng);
    Matrix latents(static_cast<Eigen::Index>(steps), 2);
    for (std::size_t k = 0; k < steps; ++k) {
      latents(static_cast<Eigen::Index>(k), 0) = arousal[k];
      latents(static_cast<Eigen::Index>(k), 1) = valence[k];
    }

    if (spec.with_ecg) {
      Rng ecg_rng(seed, 2000 + s);
      EcgSynthParams ep;
      ep.rr_jitter_ms = 15.0;
      ep.noise_sd = 0.02;
      SynthEcg ecg = synthesize_ecg(arousal, ep, ecg_rng);
      subject.true_peaks = std::move(ecg.true_peaks);
      subject.signals.ecg = std::move(ecg.ecg);

      auto two_hz = [&](std::vector<double> v) {
        RawSignal r;
        r.rate_hz = 2.0;
        r.samples = std::move(v);
        return r;
      };
      std::vector<double> ecg_2hz(steps), bpm(steps), resp(steps);
      const auto& raw = subject.signals.ecg.samples;
      const auto half_bin = static_cast<std::ptrdiff_t>(kStepMs / 2);
      for (std::size_t k = 0; k < steps; ++k) {
        const auto c = static_cast<std::ptrdiff_t>(grid[k]);
        const auto lo = std::max<std::ptrdiff_t>(0, c - half_bin);
        const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(raw.size()), c + half_bin);
        double sum = 0.0;
        for (auto i = lo; i < hi; ++i) sum += raw[static_cast<std::size_t>(i)];
        ecg_2hz[k] = sum / static_cast<double>(hi - lo);
        bpm[k] = 60000.0 / (ep.base_rr_ms - ep.rr_per_arousal_ms * arousal[k]);
        resp[k] = 15.0 + 3.0 * valence[k] + 0.3 * ecg_rng.normal();
      }
      subject.signals.ecg_2hz = two_hz(std::move(ecg_2hz));
      subject.signals.bpm = two_hz(std::move(bpm));
      subject.signals.resp = two_hz(std::move(resp));
    }

    std::vector<FeatureSequence> features;
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
      const auto& mod = spec.modalities[m];
      FeatureSequence f;
      if (mod.name == "phys") {
        f = extract_phys_sequence(subject.signals.ecg, subject.signals.resp, subject.signals.bpm,
                                  subject.signals.ecg_2hz);
      } else {
        const auto dims = static_cast<Eigen::Index>(mod.dims);
        Vector offset(dims);
        for (Eigen::Index i = 0; i < dims; ++i) offset[i] = spec.subject_offset * rng.normal();
        f.timestamps = grid;
        f.values = latents * corpus.maps[m].transpose();
        f.values.rowwise() += offset.transpose();
        if (spec.noise > 0.0) {
          for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values.data()[i] += spec.noise * rng.normal();
        }
        subject.offsets.push_back(std::move(offset));
      }
      f.subject_id = id;
      f.modality = mod.name;
      features.push_back(std::move(f));
    }

    std::vector<LabelSequence> labels;
    for (const Dimension d : {Dimension::Arousal, Dimension::Valence}) {
      LabelSequence l;
      l.subject_id = id;
      l.dimension = d;
      l.timestamps = grid;
      l.values = d == Dimension::Arousal ? arousal : valence;
      labels.push_back(std::move(l));
    }
    subject.sample = align_and_label(features, labels, role);
    corpus.subjects.push_back(std::move(subject));
  }
  return corpus;
}

Manifest write_synthetic_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  Manifest manifest;
  manifest.base_dir = dir;
  for (const auto& subject : corpus.subjects) {
    const auto& sample = subject.sample;
    SubjectRecord rec;
    rec.id = sample.subject_id;
    rec.role = sample.role;
    for (const auto& f : sample.modalities) {
      const std::filesystem::path rel = std::filesystem::path("features") / f.modality / (rec.id + ".csv");
      write_feature_csv(dir / rel, f);
      rec.features[f.modality] = rel;
    }
    for (const auto& [dim, l] : sample.labels) {
      const std::filesystem::path rel = std::filesystem::path("labels") / std::string(to_string(dim)) / (rec.id + ".csv");
      write_label_csv(dir / rel, l);
      rec.labels[dim] = rel;
    }
    if (corpus.spec.with_ecg) {
      const std::pair<const char*, const RawSignal*> signals[] = {
          {"ecg", &subject.signals.ecg}, {"resp", &subject.signals.resp},
          {"bpm", &subject.signals.bpm}, {"ecg2hz", &subject.signals.ecg_2hz}};
      for (const auto& [name, sig] : signals) {
        const std::filesystem::path rel = std::filesystem::path("signals") / rec.id / (std::string(name) + ".csv");
        write_signal_csv(dir / rel, *sig);
        rec.signals[name] = rel;
      }
    }
    manifest.subjects.push_back(std::move(rec));
  }
  write_manifest(dir / "manifest.txt", manifest);
  return manifest;
}

}  // namespace musep
