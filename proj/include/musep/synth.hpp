#pragma once

#include "musep/ecg.hpp"
#include "musep/manifest.hpp"
#include "musep/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace musep {

struct SynthModality {
  std::string name;
  std::size_t dims = 0;
};

/// Declares the shape of a synthetic corpus. A modality named "phys" is not
/// drawn from the linear model; it is extracted from the generated raw ECG.
struct SynthSpec {
  std::size_t n_train = 8;
  std::size_t n_dev = 3;
  std::size_t n_test = 3;
  double duration_s = 300.0;
  std::vector<SynthModality> modalities = {{"audio", 16}, {"video", 12}};
  double noise = 0.1;
  /// Std of the per-subject constant offset added to every feature.
  double subject_offset = 0.0;
  bool with_ecg = true;
};

struct EcgSynthParams {
  double rate_hz = 1000.0;
  /// RR interval (ms) = base_rr_ms - rr_per_arousal_ms * arousal.
  double base_rr_ms = 800.0;
  double rr_per_arousal_ms = 150.0;
  /// Std of independent per-beat RR perturbations (ms).
  double rr_jitter_ms = 0.0;
  double noise_sd = 0.0;
};

struct SynthEcg {
  RawSignal ecg;
  PeakList true_peaks;
};

/// Renders stereotyped P-QRS-T complexes with R maxima at the given sample indices.
RawSignal render_ecg(const PeakList& r_peaks, std::size_t n_samples, double rate_hz);

/// Adds white Gaussian noise at the given SNR relative to the signal's mean power.
void add_noise_snr(RawSignal& signal, double snr_db, Rng& rng);

/// ECG whose instantaneous heart rate follows an affine map of an arousal
/// trace sampled at 2 Hz (linearly interpolated). Covers the whole 2 Hz grid.
SynthEcg synthesize_ecg(const std::vector<double>& arousal_2hz, const EcgSynthParams& params, Rng& rng);

/// Physiological side channels of one subject.
struct PhysSignals {
  RawSignal ecg;     // 1000 Hz
  RawSignal resp;    // 2 Hz
  RawSignal bpm;     // 2 Hz
  RawSignal ecg_2hz; // 2 Hz
};

struct SynthSubject {
  AlignedSample sample;
  PhysSignals signals;
  PeakList true_peaks;
  std::vector<Vector> offsets;  // one per linear modality
};

struct SynthCorpus {
  SynthSpec spec;
  std::uint64_t seed = 0;
  std::vector<SynthSubject> subjects;
  /// Fixed per-corpus linear maps latents -> features, one per linear modality (dims x 2).
  std::vector<Matrix> maps;

  Corpus samples() const;
};

/// Smooth random latent trajectory in [-1, 1]: three random-phase sinusoids
/// with periods in [20, 120] s plus an Ornstein-Uhlenbeck term, clipped.
std::vector<double> synth_latent(std::size_t steps, Rng& rng);

SynthCorpus generate_synthetic_corpus(const SynthSpec& spec, std::uint64_t seed);

/// Writes features, labels and raw signals below `dir` plus `dir/manifest.txt`.
Manifest write_synthetic_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace musep
