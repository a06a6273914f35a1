#include "musep/ecg.hpp"
#include "musep/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace musep {

std::string_view hrv_feature_name(HrvFeature f) {
  static constexpr std::array<std::string_view, kHrvFeatureCount> names = {
      "MeanNN", "SDNN",    "RMSSD",   "SDSD",  "CVNN",  "CVSD",  "MedianNN", "MadNN",   "MCVNN",
      "IQRNN",  "Prc20NN", "Prc80NN", "pNN50", "pNN20", "MinNN", "MaxNN",    "RangeNN", "HTI"};
  return names[static_cast<std::size_t>(f)];
}

double percentile_sorted(std::span<const double> sorted, double q) {
  const double rank = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Divisor n-1; zero when there is a single element.
double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

HrvVector hrv_time_features(std::span<const double> nn) {
  if (nn.size() < 2) {
    fail(ErrorCode::TooFewIntervals, "need at least 2 NN intervals, got " + std::to_string(nn.size()));
  }
  for (const double x : nn) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      fail(ErrorCode::NonPositiveInterval, "NN interval " + std::to_string(x));
    }
  }

  std::vector<double> sorted(nn.begin(), nn.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> diffs(nn.size() - 1);
  for (std::size_t i = 0; i + 1 < nn.size(); ++i) diffs[i] = nn[i + 1] - nn[i];

  HrvVector h;
  using F = HrvFeature;
  h[F::MeanNN] = mean_of(nn);
  h[F::SDNN] = sample_std(nn);

  double sq = 0.0;
  std::size_t over50 = 0;
  std::size_t over20 = 0;
  for (const double d : diffs) {
    sq += d * d;
    if (std::abs(d) > 50.0) ++over50;
    if (std::abs(d) > 20.0) ++over20;
  }
  const auto n_diffs = static_cast<double>(diffs.size());
  h[F::RMSSD] = std::sqrt(sq / n_diffs);
  h[F::SDSD] = sample_std(diffs);
  h[F::CVNN] = h[F::SDNN] / h[F::MeanNN];
  h[F::CVSD] = h[F::RMSSD] / h[F::MeanNN];

  h[F::MedianNN] = percentile_sorted(sorted, 50.0);
  std::vector<double> dev(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) dev[i] = std::abs(sorted[i] - h[F::MedianNN]);
  std::sort(dev.begin(), dev.end());
  h[F::MadNN] = 1.4826 * percentile_sorted(dev, 50.0);
  h[F::MCVNN] = h[F::MadNN] / h[F::MedianNN];
  h[F::IQRNN] = percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0);
  h[F::Prc20NN] = percentile_sorted(sorted, 20.0);
  h[F::Prc80NN] = percentile_sorted(sorted, 80.0);
  h[F::pNN50] = 100.0 * static_cast<double>(over50) / n_diffs;
  h[F::pNN20] = 100.0 * static_cast<double>(over20) / n_diffs;
  h[F::MinNN] = sorted.front();
  h[F::MaxNN] = sorted.back();
  h[F::RangeNN] = sorted.back() - sorted.front();

  // Triangular index: count over the tallest bin of a histogram anchored at 0.
  std::map<long long, std::size_t> bins;
  std::size_t tallest = 0;
  for (const double x : nn) {
    tallest = std::max(tallest, ++bins[static_cast<long long>(std::floor(x / kHtiBinWidthMs))]);
  }
  h[F::HTI] = static_cast<double>(nn.size()) / static_cast<double>(tallest);
  return h;
}

}  // namespace musep
