#pragma once

#include "musep/nn.hpp"

#include <cstdint>

namespace musep {

struct AdamState {
  ParamSet m;  // first moments
  ParamSet v;  // second moments
  std::uint64_t t = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam_state(const Model& model, double learning_rate);

/// One bias-corrected Adam update of every parameter; bumps model.revision.
void adam_step(Model& model, const ParamSet& grads, AdamState& state);

}  // namespace musep
