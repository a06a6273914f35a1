#include "musep/adam.hpp"

#include "musep/error.hpp"

#include <cmath>
#include <initializer_list>

namespace musep {

AdamState make_adam_state(const Model& model, double learning_rate) {
  AdamState s;
  s.m = zeros_like(model.params);
  s.v = zeros_like(model.params);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(Model& model, const ParamSet& grads, AdamState& state) {
  const std::size_t n = model.params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    fail(ErrorCode::ShapeMismatch, "adam_step: parameter count mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = model.params[i];
    for (const Matrix* other : std::initializer_list<const Matrix*>{&grads[i], &state.m[i], &state.v[i]}) {
      if (other->rows() != p.rows() || other->cols() != p.cols()) {
        fail(ErrorCode::ShapeMismatch, "adam_step: shape mismatch at parameter " + std::to_string(i));
      }
    }
  }

  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < n; ++i) {
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = grads[i].array();
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    model.params[i].array() -= state.learning_rate * (m / c1) / ((v / c2).sqrt() + state.epsilon);
  }
  model.revision += 1;
}

}  // namespace musep
