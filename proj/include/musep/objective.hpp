#pragma once

#include "musep/types.hpp"

#include <span>
#include <vector>

namespace musep {

/// Concordance between a prediction x and a target y. All moments use the
/// population convention (divide by T).
struct CccBreakdown {
  double ccc = 0.0;
  double pearson = 0.0;  // 0 when either sequence is constant
  double mean_x = 0.0;
  double mean_y = 0.0;
  double std_x = 0.0;
  double std_y = 0.0;
  double denominator = 0.0;  // var_x + var_y + (mean_x - mean_y)^2, > 0
};

/// CCC = 2 cov(x, y) / (var(x) + var(y) + (mean_x - mean_y)^2).
/// Throws LengthMismatch, or Degenerate when the denominator is zero.
CccBreakdown ccc(std::span<const double> pred, std::span<const double> target);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d pred
};

/// 1 - CCC and its analytic gradient w.r.t. the predictions; the target is
/// treated as constant.
LossAndGrad ccc_loss(std::span<const double> pred, std::span<const double> target);

/// Training variant: a degenerate pair yields loss 1 and a zero gradient
/// instead of throwing.
LossAndGrad ccc_training_loss(std::span<const double> pred, std::span<const double> target);

double combined_score(double arousal_ccc, double valence_ccc);

}  // namespace musep
