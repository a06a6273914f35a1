#include "musep/ecg.hpp"
#include "musep/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace musep {

double RawSignal::end_ms() const {
  return static_cast<double>(start_ms) + static_cast<double>(samples.size() - 1) * 1000.0 / rate_hz;
}

void validate(const RawSignal& signal) {
  if (!(signal.rate_hz > 0.0)) fail(ErrorCode::InvalidSpec, "signal rate must be positive");
  if (signal.samples.size() < 2) fail(ErrorCode::SignalTooShort, "signal needs at least 2 samples");
  for (std::size_t i = 0; i < signal.samples.size(); ++i) {
    if (!std::isfinite(signal.samples[i])) {
      fail(ErrorCode::NonFiniteValue, "signal sample " + std::to_string(i));
    }
  }
}

RawSignal load_signal_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "timestamp,value") {
    fail(ErrorCode::MalformedCsv, path.string() + ": header must be 'timestamp,value'");
  }
  RawSignal sig;
  std::vector<TimestampMs> ts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_view(line, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != 2) fail(ErrorCode::MalformedCsv, where + ": expected 2 fields");
    const auto t = try_parse_int(cells[0]);
    const auto v = try_parse_double(cells[1]);
    if (!t || !v) fail(ErrorCode::MalformedCsv, where + ": bad number");
    if (!std::isfinite(*v)) fail(ErrorCode::NonFiniteValue, where);
    if (!ts.empty() && *t <= ts.back()) fail(ErrorCode::NonMonotoneTimestamps, where);
    if (ts.size() >= 2 && *t - ts.back() != ts[1] - ts[0]) {
      fail(ErrorCode::NonMonotoneTimestamps, where + ": irregular spacing");
    }
    ts.push_back(*t);
    sig.samples.push_back(*v);
  }
  if (ts.size() < 2) fail(ErrorCode::SignalTooShort, path.string());
  sig.start_ms = ts.front();
  sig.rate_hz = 1000.0 / static_cast<double>(ts[1] - ts[0]);
  return sig;
}

void write_signal_csv(const std::filesystem::path& path, const RawSignal& signal) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  const double step = 1000.0 / signal.rate_hz;
  if (std::abs(step - std::round(step)) > 1e-9) {
    fail(ErrorCode::InvalidSpec, "signal rate does not give integer millisecond spacing");
  }
  out << "timestamp,value\n";
  for (std::size_t i = 0; i < signal.size(); ++i) {
    out << signal.start_ms + static_cast<TimestampMs>(i) * static_cast<TimestampMs>(std::llround(step))
        << ',' << format_double(signal.samples[i]) << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// R-peak detection

namespace {

// Mean over [i - w/2, i - w/2 + w) with edge replication.
std::vector<double> centred_mean(const std::vector<double>& x, std::size_t w) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto half = static_cast<std::ptrdiff_t>(w / 2);
  auto at = [&](std::ptrdiff_t i) { return x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, n - 1))]; };
  std::vector<double> out(x.size());
  double acc = 0.0;
  for (std::ptrdiff_t j = -half; j < -half + static_cast<std::ptrdiff_t>(w); ++j) acc += at(j);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = acc / static_cast<double>(w);
    acc += at(i - half + static_cast<std::ptrdiff_t>(w)) - at(i - half);
  }
  return out;
}

}  // namespace

PeakList detect_r_peaks(const RawSignal& ecg, const PeakDetectorParams& params) {
  const auto n = ecg.samples.size();
  const auto min_len = static_cast<std::size_t>(std::llround(2.0 * ecg.rate_hz));
  if (n < min_len || n < 8) {
    fail(ErrorCode::SignalTooShort,
         "R-peak detection needs 2 s of signal, got " + std::to_string(n) + " samples");
  }
  const auto& x = ecg.samples;
  const auto samples_for = [&](double ms) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ms * ecg.rate_hz / 1000.0)));
  };

  // Band-pass: centred moving-average smoothing minus a centred moving-average
  // baseline. Both are zero-phase, so filtered peaks stay where the raw ones are.
  const std::vector<double> smooth = centred_mean(x, samples_for(params.smoothing_ms));
  const std::vector<double> baseline = centred_mean(x, samples_for(params.baseline_ms));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = smooth[i] - baseline[i];
  auto at = [&](std::ptrdiff_t i) { return y[static_cast<std::size_t>(std::max<std::ptrdiff_t>(i, 0))]; };

  // Five-point derivative with taps 5 ms apart, squared.
  const auto tap = static_cast<std::ptrdiff_t>(samples_for(5.0));
  std::vector<double> energy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    const double d = (2.0 * at(k) + at(k - tap) - at(k - 3 * tap) - 2.0 * at(k - 4 * tap)) / 8.0;
    energy[i] = d * d;
  }

  // Trailing moving-window integration.
  const auto win = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.integration_ms * ecg.rate_hz / 1000.0)));
  std::vector<double> mwi(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += energy[i];
    if (i >= win) acc -= energy[i - win];
    mwi[i] = acc / static_cast<double>(win);
  }

  const auto refractory = static_cast<std::size_t>(std::llround(params.refractory_ms * ecg.rate_hz / 1000.0));
  double signal_peak = *std::max_element(mwi.begin(), mwi.end());
  if (!(signal_peak > 0.0)) return {};

  // Integrator peaks above the adaptive threshold, merged within the refractory period.
  struct Candidate {
    std::size_t index;
    double value;
  };
  std::vector<Candidate> accepted;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double v = mwi[i];
    if (!(v > mwi[i - 1] && v >= mwi[i + 1])) continue;
    if (v < params.threshold_ratio * signal_peak) continue;
    if (!accepted.empty() && i - accepted.back().index < refractory) {
      if (v > accepted.back().value) accepted.back() = {i, v};
      continue;
    }
    accepted.push_back({i, v});
    signal_peak = params.signal_peak_learning_rate * v +
                  (1.0 - params.signal_peak_learning_rate) * signal_peak;
  }

  // Map each integrator peak to the raw-signal maximum inside its integration window.
  PeakList peaks;
  for (const auto& c : accepted) {
    const std::size_t lo = c.index >= win ? c.index - win : 0;
    std::size_t p = lo;
    for (std::size_t i = lo; i <= c.index; ++i) {
      if (x[i] > x[p]) p = i;
    }
    while (p > 0 && x[p - 1] > x[p]) --p;
    while (p + 1 < n && x[p + 1] > x[p]) ++p;
    if (p == 0 || p + 1 == n) continue;  // truncated beat at the signal edge
    if (!peaks.empty() && p - peaks.back() < refractory) {
      if (p > peaks.back() && x[p] > x[peaks.back()]) peaks.back() = p;
      continue;
    }
    if (!peaks.empty() && p <= peaks.back()) continue;
    peaks.push_back(p);
  }
  return peaks;
}

std::vector<double> nn_intervals_ms(const PeakList& peaks, double rate_hz) {
  std::vector<double> out;
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    out.push_back(static_cast<double>(peaks[i] - peaks[i - 1]) * 1000.0 / rate_hz);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Phys feature assembly

FeatureSequence extract_phys_sequence(const RawSignal& raw_ecg, const RawSignal& resp,
                                      const RawSignal& bpm, const RawSignal& ecg_2hz) {
  validate(raw_ecg);
  for (const RawSignal* s : {&resp, &bpm, &ecg_2hz}) {
    validate(*s);
    if (std::abs(s->rate_hz - 2.0) > 1e-12) fail(ErrorCode::GridMismatch, "2 Hz inputs must be sampled at 2 Hz");
    if (s->size() != ecg_2hz.size() || s->start_ms != ecg_2hz.start_ms) {
      fail(ErrorCode::GridMismatch, "resp, bpm and ecg_2hz must share one grid");
    }
  }
  const std::size_t steps = ecg_2hz.size();
  const double grid_first = static_cast<double>(ecg_2hz.start_ms);
  const double grid_last = grid_first + static_cast<double>((steps - 1) * kStepMs);
  if (static_cast<double>(raw_ecg.start_ms) > grid_first || raw_ecg.end_ms() < grid_last) {
    fail(ErrorCode::CoverageError, "raw ECG does not span the 2 Hz grid");
  }

  // 4 s windows: pad by half a window of edge-replicated samples each side.
  const auto half = static_cast<std::size_t>(std::llround(2.0 * raw_ecg.rate_hz));
  std::vector<double> padded;
  padded.reserve(raw_ecg.size() + 2 * half);
  padded.insert(padded.end(), half, raw_ecg.samples.front());
  padded.insert(padded.end(), raw_ecg.samples.begin(), raw_ecg.samples.end());
  padded.insert(padded.end(), half, raw_ecg.samples.back());

  FeatureSequence out;
  out.modality = "phys";
  out.values = Matrix::Zero(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(kPhysDims));
  out.timestamps.resize(steps);

  HrvVector previous{};
  RawSignal window;
  window.rate_hz = raw_ecg.rate_hz;
  for (std::size_t k = 0; k < steps; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const double t = grid_first + static_cast<double>(k * kStepMs);
    out.timestamps[k] = ecg_2hz.start_ms + static_cast<TimestampMs>(k) * kStepMs;
    out.values(row, 0) = ecg_2hz.samples[k];
    out.values(row, 1) = resp.samples[k];
    out.values(row, 2) = bpm.samples[k];

    const auto centre = static_cast<std::size_t>(
        std::llround((t - static_cast<double>(raw_ecg.start_ms)) * raw_ecg.rate_hz / 1000.0));
    // centre + half is the padded index of the grid point; the window is [centre, centre + 2*half).
    window.samples.assign(padded.begin() + static_cast<std::ptrdiff_t>(centre),
                          padded.begin() + static_cast<std::ptrdiff_t>(centre + 2 * half));
    const auto intervals = nn_intervals_ms(detect_r_peaks(window), raw_ecg.rate_hz);
    if (intervals.size() >= 2) previous = hrv_time_features(intervals);
    for (std::size_t f = 0; f < kHrvFeatureCount; ++f) {
      out.values(row, static_cast<Eigen::Index>(3 + f)) = previous.values[f];
    }
  }
  return out;
}

}  // namespace musep
