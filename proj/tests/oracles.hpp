#pragma once

#include "musep/error.hpp"

// Test-side reference implementations, written independently of the library
// code they check: direct textbook formulas, no shared helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

// CCC via raw moments E[xy] - E[x]E[y], in long double.
inline long double ccc(const std::vector<double>& x, const std::vector<double>& y) {
  const long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double mx = sx / n, my = sy / n;
  const long double vx = sxx / n - mx * mx, vy = syy / n - my * my, cov = sxy / n - mx * my;
  return 2 * cov / (vx + vy + (mx - my) * (mx - my));
}

inline double mean(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s / static_cast<long double>(v.size()));
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  long double s = 0;
  for (double x : v) s += static_cast<long double>(x - m) * (x - m);
  return static_cast<double>(std::sqrt(s / static_cast<long double>(v.size() - 1)));
}

// Linear-interpolation percentile by explicit rank position (1-based h).
inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q / 100.0 + 1.0;
  const double fl = std::floor(h);
  const std::size_t i = static_cast<std::size_t>(fl) - 1;
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (h - fl) * (v[i + 1] - v[i]);
}

inline double median(const std::vector<double>& v) { return percentile(v, 50.0); }

// The 18 features in reporting order, each computed straight from its definition.
inline std::vector<double> hrv(const std::vector<double>& nn) {
  std::vector<double> d;
  for (std::size_t i = 1; i < nn.size(); ++i) d.push_back(nn[i] - nn[i - 1]);
  const double mean_nn = mean(nn);
  const double sdnn = sample_sd(nn);
  long double ss = 0;
  for (double x : d) ss += static_cast<long double>(x) * x;
  const double rmssd = static_cast<double>(std::sqrt(ss / static_cast<long double>(d.size())));
  const double sdsd = sample_sd(d);
  const double med = median(nn);
  std::vector<double> absdev;
  for (double x : nn) absdev.push_back(std::fabs(x - med));
  const double mad = 1.4826 * median(absdev);
  const double iqr = percentile(nn, 75) - percentile(nn, 25);
  int c50 = 0, c20 = 0;
  for (double x : d) {
    c50 += std::fabs(x) > 50.0;
    c20 += std::fabs(x) > 20.0;
  }
  const double mn = *std::min_element(nn.begin(), nn.end());
  const double mx = *std::max_element(nn.begin(), nn.end());
  std::map<long long, int> hist;
  for (double x : nn) hist[static_cast<long long>(std::floor(x / 7.8125))]++;
  int tallest = 0;
  for (const auto& kv : hist) tallest = std::max(tallest, kv.second);
  return {mean_nn,
          sdnn,
          rmssd,
          sdsd,
          sdnn / mean_nn,
          rmssd / mean_nn,
          med,
          mad,
          mad / med,
          iqr,
          percentile(nn, 20),
          percentile(nn, 80),
          100.0 * c50 / static_cast<double>(d.size()),
          100.0 * c20 / static_cast<double>(d.size()),
          mn,
          mx,
          mx - mn,
          static_cast<double>(nn.size()) / tallest};
}

// Window starts by plain enumeration with clipping.
struct Range {
  std::size_t begin, end;
};
inline std::vector<Range> windows(std::size_t T, std::size_t win, std::size_t hop) {
  std::vector<Range> out;
  for (std::size_t s = 0; s < T; s += hop) {
    const std::size_t e = s + win < T ? s + win : T;
    if (e - s >= 2) out.push_back({s, e});
  }
  return out;
}

// Greedy one-to-one matching of detections to truth within a tolerance.
struct Match {
  std::size_t true_positive = 0, detected = 0, truth = 0;
  double recall() const { return truth ? static_cast<double>(true_positive) / truth : 1.0; }
  double precision() const { return detected ? static_cast<double>(true_positive) / detected : 1.0; }
};
inline Match match_peaks(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& detected,
                         std::size_t tol) {
  Match m;
  m.truth = truth.size();
  m.detected = detected.size();
  std::vector<bool> used(detected.size(), false);
  for (std::size_t t : truth) {
    for (std::size_t j = 0; j < detected.size(); ++j) {
      const std::size_t dist = detected[j] > t ? detected[j] - t : t - detected[j];
      if (!used[j] && dist <= tol) {
        used[j] = true;
        ++m.true_positive;
        break;
      }
    }
  }
  return m;
}

}  // namespace oracle

namespace testutil {

// Runs f and returns the code of the musep::Error it throws; a missing or
// foreign exception is reported as a test failure.
template <class F>
std::optional<musep::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const musep::Error& e) {
    return e.code();
  } catch (...) {
    return std::nullopt;
  }
  return std::nullopt;
}

// Fresh scratch directory below the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("musep_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
