#pragma once

#include "musep/seqdata.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace musep {

struct RawSignal {
  std::vector<double> samples;
  double rate_hz = 1000.0;
  TimestampMs start_ms = 0;

  std::size_t size() const { return samples.size(); }
  /// Timestamp of the last sample, in ms.
  double end_ms() const;
};

void validate(const RawSignal& signal);

/// Reads a `timestamp,value` CSV with constant spacing; the rate is inferred
/// from the spacing (1 ms -> 1000 Hz, 500 ms -> 2 Hz).
RawSignal load_signal_csv(const std::filesystem::path& path);
void write_signal_csv(const std::filesystem::path& path, const RawSignal& signal);

/// Strictly increasing sample indices of detected R peaks.
using PeakList = std::vector<std::size_t>;

struct PeakDetectorParams {
  // Band-pass stage: smoothing width (low-pass) and baseline width (high-pass).
  double smoothing_ms = 20.0;
  double baseline_ms = 200.0;
  double integration_ms = 150.0;
  double refractory_ms = 250.0;
  double threshold_ratio = 0.5;
  // Weight of a newly accepted peak in the running signal-peak estimate.
  double signal_peak_learning_rate = 0.125;
};

/// Simplified Pan-Tompkins: zero-phase band-pass, five-point derivative, squaring, trailing moving
/// integration, adaptive threshold on the running signal-peak level and a
/// refractory period. Each accepted integrator peak is mapped back to the
/// local maximum of the raw signal that produced it.
PeakList detect_r_peaks(const RawSignal& ecg, const PeakDetectorParams& params = {});

/// NN intervals in ms from consecutive peaks.
std::vector<double> nn_intervals_ms(const PeakList& peaks, double rate_hz);

enum class HrvFeature : std::size_t {
  MeanNN, SDNN, RMSSD, SDSD, CVNN, CVSD, MedianNN, MadNN, MCVNN, IQRNN,
  Prc20NN, Prc80NN, pNN50, pNN20, MinNN, MaxNN, RangeNN, HTI,
};

inline constexpr std::size_t kHrvFeatureCount = 18;
inline constexpr double kHtiBinWidthMs = 7.8125;

std::string_view hrv_feature_name(HrvFeature f);

struct HrvVector {
  std::array<double, kHrvFeatureCount> values{};

  double operator[](HrvFeature f) const { return values[static_cast<std::size_t>(f)]; }
  double& operator[](HrvFeature f) { return values[static_cast<std::size_t>(f)]; }
};

/// Time-domain HRV statistics of one window of NN intervals (ms).
HrvVector hrv_time_features(std::span<const double> nn_intervals_ms);

/// Percentile with linear interpolation between order statistics; `sorted`
/// must be ascending and non-empty, q in [0, 100].
double percentile_sorted(std::span<const double> sorted, double q);

inline constexpr std::size_t kPhysDims = 3 + kHrvFeatureCount;

/// Builds the 21-d physiological feature sequence on the grid of the 2 Hz
/// inputs: [ecg_2hz, resp, bpm, 18 HRV features]. HRV features come from 4 s
/// windows of the raw ECG centred on each grid point (the signal is
/// edge-padded by 2 s on both sides). A window with fewer than two usable
/// NN intervals repeats the previous row's HRV values, or zeros for the first.
FeatureSequence extract_phys_sequence(const RawSignal& raw_ecg, const RawSignal& resp,
                                      const RawSignal& bpm, const RawSignal& ecg_2hz);

}  // namespace musep
