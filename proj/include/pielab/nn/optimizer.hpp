#pragma once

#include <cstdint>

#include "pielab/mask.hpp"
#include "pielab/nn/model.hpp"

namespace pielab::nn {

struct SgdHyper {
  double learning_rate = 0.05;
  double momentum = 0.9;
};

template <typename Scalar>
struct OptimizerState {
  std::vector<Matrix<Scalar>> velocity;
  std::int64_t step = 0;

  static OptimizerState fresh(const ParamSet<Scalar>& params) { return {zeros_like(params), 0}; }
  bool operator==(const OptimizerState&) const = default;
};

/// SGD with heavy-ball momentum: v <- mu v + g, w <- w - lr v. Positions pruned
/// in `mask` are held at exactly 0 with zero velocity.
template <typename Scalar>
void opt_step(ParamSet<Scalar>& params, const Gradients<Scalar>& grads, const PruneMask& mask,
              OptimizerState<Scalar>& state, const SgdHyper& hyper) {
  if (grads.size() != params.layers.size() || state.velocity.size() != params.layers.size())
    throw Error("opt_step: gradient/state/parameter count mismatch");
  const auto lr = static_cast<Scalar>(hyper.learning_rate);
  const auto mu = static_cast<Scalar>(hyper.momentum);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& w = params.layers[i].value;
    auto& v = state.velocity[i];
    if (grads[i].rows() != w.rows() || grads[i].cols() != w.cols()) throw Error("opt_step: shape mismatch");
    v = mu * v + grads[i];
    w -= lr * v;
    if (const auto* e = mask.find(params.layers[i].name)) {
      Scalar* wd = w.data();
      Scalar* vd = v.data();
      for (std::size_t k = 0; k < e->active.size(); ++k) {
        if (!e->active[k]) {
          wd[k] = Scalar(0);
          vd[k] = Scalar(0);
        }
      }
    }
  }
  ++state.step;
}

}  // namespace pielab::nn
