#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "aspd/tensor.hpp"

namespace aspd {

// Named parameter tensors; ordered so iteration (and serialization) is stable.
using ParamSet = std::map<std::string, Tensor>;

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

// One bias-corrected Adam update of every parameter that has a gradient.
// Parameters absent from `grads` (frozen ones) are left untouched.
void adam_step(ParamSet& params, const GradMap& grads, AdamState& state);

// Largest |analytic - central difference| / max(1, |central difference|)
// over the elements of theta. `f` builds a scalar on the given tape from a
// node holding theta. Evaluate at generic points: relu kinks and max-pool
// ties are not differentiable and are expected to disagree.
using ScalarFn = std::function<Var(Tape&, Var)>;
double grad_check(const ScalarFn& f, const Tensor& theta, double eps = 1e-5);

}  // namespace aspd
