#include "musep/objective.hpp"

#include "musep/error.hpp"

#include <cmath>

namespace musep {

namespace {

struct Moments {
  double mean_x, mean_y, var_x, var_y, cov;
};

Moments moments(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorCode::LengthMismatch, "ccc: " + std::to_string(x.size()) + " predictions vs " +
                                        std::to_string(y.size()) + " targets");
  }
  if (x.size() < 2) fail(ErrorCode::LengthMismatch, "ccc: need at least 2 steps");
  const auto t = static_cast<double>(x.size());
  Moments m{0.0, 0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += x[i];
    m.mean_y += y[i];
  }
  m.mean_x /= t;
  m.mean_y /= t;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x;
    const double dy = y[i] - m.mean_y;
    m.var_x += dx * dx;
    m.var_y += dy * dy;
    m.cov += dx * dy;
  }
  m.var_x /= t;
  m.var_y /= t;
  m.cov /= t;
  return m;
}

double denominator(const Moments& m) {
  const double dm = m.mean_x - m.mean_y;
  return m.var_x + m.var_y + dm * dm;
}

}  // namespace

CccBreakdown ccc(std::span<const double> pred, std::span<const double> target) {
  const Moments m = moments(pred, target);
  const double den = denominator(m);
  if (!(den > 0.0)) fail(ErrorCode::Degenerate, "ccc: both sequences constant and equal");
  CccBreakdown out;
  out.mean_x = m.mean_x;
  out.mean_y = m.mean_y;
  out.std_x = std::sqrt(m.var_x);
  out.std_y = std::sqrt(m.var_y);
  out.denominator = den;
  out.ccc = 2.0 * m.cov / den;
  out.pearson = (out.std_x > 0.0 && out.std_y > 0.0) ? m.cov / (out.std_x * out.std_y) : 0.0;
  return out;
}

LossAndGrad ccc_loss(std::span<const double> pred, std::span<const double> target) {
  const Moments m = moments(pred, target);
  const double den = denominator(m);
  if (!(den > 0.0)) fail(ErrorCode::Degenerate, "ccc loss: both sequences constant and equal");
  const double num = 2.0 * m.cov;
  const auto t = static_cast<double>(pred.size());

  LossAndGrad out;
  out.loss = 1.0 - num / den;
  out.grad.resize(pred.size());
  // d num / dx_i = 2 (y_i - mean_y) / T
  // d den / dx_i = 2 (x_i - mean_x) / T + 2 (mean_x - mean_y) / T
  const double dm = m.mean_x - m.mean_y;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d_num = 2.0 * (target[i] - m.mean_y) / t;
    const double d_den = 2.0 * (pred[i] - m.mean_x + dm) / t;
    out.grad[i] = -(d_num * den - num * d_den) / (den * den);
  }
  return out;
}

LossAndGrad ccc_training_loss(std::span<const double> pred, std::span<const double> target) {
  const Moments m = moments(pred, target);
  if (!(denominator(m) > 0.0)) return {1.0, std::vector<double>(pred.size(), 0.0)};
  return ccc_loss(pred, target);
}

double combined_score(double arousal_ccc, double valence_ccc) { return (arousal_ccc + valence_ccc) / 2.0; }

}  // namespace musep
